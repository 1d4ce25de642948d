#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vasim {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON or CSV syntax, wrong value types).
class ParseError : public Error {
  public:
    using Error::Error;
};

enum class ValidationCode {
    UnknownKey,
    MissingKey,
    DuplicateId,
    DanglingReference,
    NonPositiveRadius,
    BadCenterline,
    EndpointMismatch,
    DisconnectedInlet,
    BadSac,
    BadInflow,
    OutOfRange,
    InsufficientSamples,
    Topology,
    Schema,
};

inline std::string_view to_string(ValidationCode code) {
    switch (code) {
    case ValidationCode::UnknownKey: return "unknown_key";
    case ValidationCode::MissingKey: return "missing_key";
    case ValidationCode::DuplicateId: return "duplicate_id";
    case ValidationCode::DanglingReference: return "dangling_reference";
    case ValidationCode::NonPositiveRadius: return "non_positive_radius";
    case ValidationCode::BadCenterline: return "bad_centerline";
    case ValidationCode::EndpointMismatch: return "endpoint_mismatch";
    case ValidationCode::DisconnectedInlet: return "disconnected_inlet";
    case ValidationCode::BadSac: return "bad_sac";
    case ValidationCode::BadInflow: return "bad_inflow";
    case ValidationCode::OutOfRange: return "out_of_range";
    case ValidationCode::InsufficientSamples: return "insufficient_samples";
    case ValidationCode::Topology: return "topology";
    case ValidationCode::Schema: return "schema";
    }
    return "unknown";
}

/// Input parsed but violates a model invariant. `code()` names the rule.
class ValidationError : public Error {
  public:
    ValidationError(ValidationCode code, const std::string& what)
        : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ValidationCode code() const noexcept { return code_; }

  private:
    ValidationCode code_;
};

/// Flow network has no path to a reference-pressure outlet.
class TopologyError : public ValidationError {
  public:
    explicit TopologyError(const std::string& what) : ValidationError(ValidationCode::Topology, what) {}
};

class IoError : public Error {
  public:
    using Error::Error;
};

/// A command referenced something the world does not have (no arm, no sheath, ...).
class CommandError : public Error {
  public:
    using Error::Error;
};

} // namespace vasim
