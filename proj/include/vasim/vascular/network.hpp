#pragma once

/// Vessel network geometry: nodes, centerline segments, aneurysm sacs and the
/// inflow boundary condition, loaded from the JSON network description.
///
/// File units are millimetres and mL/s; everything in memory is SI.

#include "vasim/core/errors.hpp"
#include "vasim/core/json_util.hpp"
#include "vasim/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

namespace vasim::vascular {

struct Node {
    int id{};
    Vec3 position{Vec3::Zero()};
};

struct Segment {
    int id{};
    int from_node{};
    int to_node{};
    std::vector<Vec3> centerline;
    double radius{};
    double length{};
    /// Arc length at each centerline vertex; front() == 0, back() == length.
    std::vector<double> cumulative;
};

struct AneurysmSac {
    int id{};
    int host_segment{};
    double arc_position{};
    double neck_radius{};
    double neck_length{};
    double sac_volume{};
    /// Unit direction from the host centerline into the sac.
    Vec3 normal{Vec3::UnitZ()};
};

struct InflowSpec {
    int inlet_node{};
    double mean_flow{};  // m³/s
    double peak_ratio{1.0};
    double heart_rate{}; // Hz
    std::vector<int> outlet_nodes;
};

/// Pulse amplitude and baseline of the rectified-sine inflow, solved so that
/// the period mean is 1 and the peak equals the peak ratio.
struct WaveformCoefficients {
    double amplitude{};
    double baseline{1.0};
};

inline WaveformCoefficients waveform_coefficients(double peak_ratio) {
    const double amplitude = (peak_ratio - 1.0) / (1.0 - 1.0 / kPi);
    return {amplitude, 1.0 - amplitude / kPi};
}

inline void validate_inflow(const InflowSpec& spec) {
    if (!(spec.mean_flow > 0.0) || !std::isfinite(spec.mean_flow)) {
        throw ValidationError(ValidationCode::BadInflow, "mean_flow must be > 0");
    }
    if (!(spec.peak_ratio >= 1.0) || !std::isfinite(spec.peak_ratio)) {
        throw ValidationError(ValidationCode::BadInflow, "peak_ratio must be >= 1");
    }
    if (waveform_coefficients(spec.peak_ratio).baseline < 0.0) {
        throw ValidationError(ValidationCode::BadInflow,
                              "peak_ratio " + std::to_string(spec.peak_ratio) +
                                  " forces retrograde inflow (limit is pi)");
    }
    if (!(spec.heart_rate >= 0.0) || !std::isfinite(spec.heart_rate)) {
        throw ValidationError(ValidationCode::BadInflow, "heart_rate must be >= 0");
    }
}

struct Frame {
    Vec3 point;
    Vec3 tangent;
    double radius{};
};

/// A point on the network: arc length `s` along segment `segment`.
struct Location {
    int segment{};
    double s{};
};

class VesselNetwork {
  public:
    VesselNetwork() = default;

    /// Validates and indexes. Throws ValidationError on any broken invariant.
    VesselNetwork(std::vector<Node> nodes, std::vector<Segment> segments, std::vector<AneurysmSac> sacs,
                  InflowSpec inflow)
        : nodes_(std::move(nodes)), segments_(std::move(segments)), sacs_(std::move(sacs)),
          inflow_(std::move(inflow)) {
        auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
        std::sort(nodes_.begin(), nodes_.end(), by_id);
        std::sort(segments_.begin(), segments_.end(), by_id);
        std::sort(sacs_.begin(), sacs_.end(), by_id);
        index_and_validate();
    }

    [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<Segment>& segments() const { return segments_; }
    [[nodiscard]] const std::vector<AneurysmSac>& sacs() const { return sacs_; }
    [[nodiscard]] const InflowSpec& inflow() const { return inflow_; }

    [[nodiscard]] bool has_node(int id) const { return node_index_.count(id) != 0; }
    [[nodiscard]] bool has_segment(int id) const { return segment_index_.count(id) != 0; }
    [[nodiscard]] bool has_sac(int id) const { return sac_index_.count(id) != 0; }

    [[nodiscard]] const Node& node(int id) const { return nodes_.at(lookup(node_index_, id, "node")); }
    [[nodiscard]] const Segment& segment(int id) const {
        return segments_.at(lookup(segment_index_, id, "segment"));
    }
    [[nodiscard]] const AneurysmSac& sac(int id) const { return sacs_.at(lookup(sac_index_, id, "sac")); }

    [[nodiscard]] std::size_t node_index(int id) const { return lookup(node_index_, id, "node"); }
    [[nodiscard]] std::size_t segment_index(int id) const { return lookup(segment_index_, id, "segment"); }
    [[nodiscard]] std::size_t sac_index(int id) const { return lookup(sac_index_, id, "sac"); }

    /// Segment ids touching `node_id`, ascending.
    [[nodiscard]] const std::vector<int>& incident(int node_id) const {
        return incident_.at(node_index(node_id));
    }

    [[nodiscard]] bool is_outlet(int node_id) const {
        return std::find(inflow_.outlet_nodes.begin(), inflow_.outlet_nodes.end(), node_id) !=
               inflow_.outlet_nodes.end();
    }

  private:
    static std::size_t lookup(const std::unordered_map<int, std::size_t>& index, int id, const char* what) {
        auto it = index.find(id);
        if (it == index.end()) {
            throw ValidationError(ValidationCode::DanglingReference,
                                  std::string("no ") + what + " with id " + std::to_string(id));
        }
        return it->second;
    }

    void index_and_validate();

    std::vector<Node> nodes_;
    std::vector<Segment> segments_;
    std::vector<AneurysmSac> sacs_;
    InflowSpec inflow_;
    std::unordered_map<int, std::size_t> node_index_;
    std::unordered_map<int, std::size_t> segment_index_;
    std::unordered_map<int, std::size_t> sac_index_;
    std::vector<std::vector<int>> incident_;
};

inline void finalize_segment(Segment& seg) {
    if (seg.centerline.size() < 2) {
        throw ValidationError(ValidationCode::BadCenterline,
                              "segment " + std::to_string(seg.id) + " needs at least 2 centerline points");
    }
    seg.cumulative.assign(1, 0.0);
    for (std::size_t i = 1; i < seg.centerline.size(); ++i) {
        const double piece = (seg.centerline[i] - seg.centerline[i - 1]).norm();
        if (!(piece > 0.0)) {
            throw ValidationError(ValidationCode::BadCenterline,
                                  "segment " + std::to_string(seg.id) + " has repeated centerline points");
        }
        seg.cumulative.push_back(seg.cumulative.back() + piece);
    }
    seg.length = seg.cumulative.back();
}

inline void VesselNetwork::index_and_validate() {
    constexpr double kEndpointTol = 1e-9;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!node_index_.emplace(nodes_[i].id, i).second) {
            throw ValidationError(ValidationCode::DuplicateId, "duplicate node id " + std::to_string(nodes_[i].id));
        }
        if (!nodes_[i].position.allFinite()) {
            throw ValidationError(ValidationCode::OutOfRange, "node " + std::to_string(nodes_[i].id) +
                                                                  " has a non-finite position");
        }
    }
    incident_.assign(nodes_.size(), {});
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        Segment& seg = segments_[i];
        const std::string name = "segment " + std::to_string(seg.id);
        if (!segment_index_.emplace(seg.id, i).second) {
            throw ValidationError(ValidationCode::DuplicateId, "duplicate " + name);
        }
        if (!has_node(seg.from_node) || !has_node(seg.to_node)) {
            throw ValidationError(ValidationCode::DanglingReference,
                                  name + " references node " +
                                      std::to_string(has_node(seg.from_node) ? seg.to_node : seg.from_node) +
                                      " which does not exist");
        }
        if (!(seg.radius > 0.0) || !std::isfinite(seg.radius)) {
            throw ValidationError(ValidationCode::NonPositiveRadius, name + " radius must be > 0");
        }
        if (seg.centerline.empty()) {
            seg.centerline = {node(seg.from_node).position, node(seg.to_node).position};
        }
        finalize_segment(seg);
        if ((seg.centerline.front() - node(seg.from_node).position).norm() > kEndpointTol ||
            (seg.centerline.back() - node(seg.to_node).position).norm() > kEndpointTol) {
            throw ValidationError(ValidationCode::EndpointMismatch,
                                  name + " centerline endpoints do not coincide with its nodes");
        }
        incident_[node_index(seg.from_node)].push_back(seg.id);
        if (seg.to_node != seg.from_node) {
            incident_[node_index(seg.to_node)].push_back(seg.id);
        }
    }
    for (auto& list : incident_) {
        std::sort(list.begin(), list.end());
    }

    for (std::size_t i = 0; i < sacs_.size(); ++i) {
        AneurysmSac& sac = sacs_[i];
        const std::string name = "sac " + std::to_string(sac.id);
        if (!sac_index_.emplace(sac.id, i).second) {
            throw ValidationError(ValidationCode::DuplicateId, "duplicate " + name);
        }
        if (!has_segment(sac.host_segment)) {
            throw ValidationError(ValidationCode::DanglingReference,
                                  name + " host segment " + std::to_string(sac.host_segment) + " does not exist");
        }
        const Segment& host = segment(sac.host_segment);
        if (!(sac.arc_position >= 0.0 && sac.arc_position <= host.length)) {
            throw ValidationError(ValidationCode::BadSac, name + " arc_position outside host segment");
        }
        if (!(sac.neck_radius > 0.0) || !(sac.neck_length > 0.0) || !(sac.sac_volume > 0.0)) {
            throw ValidationError(ValidationCode::BadSac, name + " neck radius, neck length and volume must be > 0");
        }
        if (!(sac.normal.norm() > 0.0) || !sac.normal.allFinite()) {
            throw ValidationError(ValidationCode::BadSac, name + " normal must be a nonzero vector");
        }
    }

    if (!has_node(inflow_.inlet_node)) {
        throw ValidationError(ValidationCode::DanglingReference,
                              "inlet node " + std::to_string(inflow_.inlet_node) + " does not exist");
    }
    if (inflow_.outlet_nodes.empty()) {
        throw ValidationError(ValidationCode::BadInflow, "at least one outlet node is required");
    }
    for (int outlet : inflow_.outlet_nodes) {
        if (!has_node(outlet)) {
            throw ValidationError(ValidationCode::DanglingReference,
                                  "outlet node " + std::to_string(outlet) + " does not exist");
        }
        if (outlet == inflow_.inlet_node) {
            throw ValidationError(ValidationCode::BadInflow, "inlet node cannot also be an outlet");
        }
    }
    validate_inflow(inflow_);

    std::vector<bool> seen(nodes_.size(), false);
    std::queue<int> frontier;
    frontier.push(inflow_.inlet_node);
    seen[node_index(inflow_.inlet_node)] = true;
    while (!frontier.empty()) {
        const int current = frontier.front();
        frontier.pop();
        for (int seg_id : incident(current)) {
            const Segment& seg = segment(seg_id);
            const int other = seg.from_node == current ? seg.to_node : seg.from_node;
            if (!seen[node_index(other)]) {
                seen[node_index(other)] = true;
                frontier.push(other);
            }
        }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!seen[i]) {
            throw ValidationError(ValidationCode::DisconnectedInlet,
                                  "node " + std::to_string(nodes_[i].id) + " is not reachable from the inlet");
        }
    }
}

/// Point, unit tangent and radius at arc length `s` along a segment.
inline Frame segment_frame(const VesselNetwork& net, int segment_id, double s) {
    const Segment& seg = net.segment(segment_id);
    const double slack = 1e-12 * seg.length;
    if (!(s >= -slack && s <= seg.length + slack)) {
        throw ValidationError(ValidationCode::OutOfRange, "arc length " + std::to_string(s) +
                                                              " outside segment " + std::to_string(segment_id));
    }
    s = std::clamp(s, 0.0, seg.length);
    // Piece i spans cumulative[i]..cumulative[i+1]; a vertex belongs to the piece it starts.
    auto it = std::upper_bound(seg.cumulative.begin(), seg.cumulative.end(), s);
    std::size_t piece = static_cast<std::size_t>(std::distance(seg.cumulative.begin(), it));
    piece = std::clamp<std::size_t>(piece, 1, seg.centerline.size() - 1) - 1;
    const Vec3& a = seg.centerline[piece];
    const Vec3& b = seg.centerline[piece + 1];
    const double span = seg.cumulative[piece + 1] - seg.cumulative[piece];
    const double t = (s - seg.cumulative[piece]) / span;
    Frame frame;
    frame.tangent = (b - a) / span;
    frame.point = s == seg.length ? seg.centerline.back() : Vec3(a + t * (b - a));
    frame.radius = seg.radius;
    return frame;
}

inline double sac_dome_radius(const AneurysmSac& sac) {
    return std::cbrt(3.0 * sac.sac_volume / (4.0 * kPi));
}

/// Centre of the spherical dome standing for the sac compartment.
inline Vec3 sac_center(const VesselNetwork& net, const AneurysmSac& sac) {
    const Frame host = segment_frame(net, sac.host_segment, sac.arc_position);
    return host.point + sac.normal * (host.radius + sac.neck_length + sac_dome_radius(sac));
}

/// Shortest distance along vessel centerlines between two locations.
inline double path_distance(const VesselNetwork& net, const Location& a, const Location& b) {
    if (a.segment == b.segment) {
        return std::abs(a.s - b.s);
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(net.nodes().size(), kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    const Segment& start = net.segment(a.segment);
    auto relax = [&](int node_id, double d) {
        const std::size_t idx = net.node_index(node_id);
        if (d < dist[idx]) {
            dist[idx] = d;
            queue.emplace(d, node_id);
        }
    };
    relax(start.from_node, a.s);
    relax(start.to_node, start.length - a.s);
    while (!queue.empty()) {
        auto [d, node_id] = queue.top();
        queue.pop();
        if (d > dist[net.node_index(node_id)]) {
            continue;
        }
        for (int seg_id : net.incident(node_id)) {
            const Segment& seg = net.segment(seg_id);
            relax(seg.from_node == node_id ? seg.to_node : seg.from_node, d + seg.length);
        }
    }
    const Segment& end = net.segment(b.segment);
    return std::min(dist[net.node_index(end.from_node)] + b.s,
                    dist[net.node_index(end.to_node)] + (end.length - b.s));
}

// ---------------------------------------------------------------------------
// JSON network description

namespace detail {

inline int require_id(const json_util::json& node, const std::string& key, const std::string& ctx) {
    return json_util::require<int>(node, key, ctx);
}

} // namespace detail

inline VesselNetwork network_from_json(const json_util::json& doc) {
    using json_util::require;
    using namespace units;
    json_util::reject_unknown_keys(doc, {"nodes", "segments", "sacs", "inflow"}, "network");

    std::vector<Node> nodes;
    if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
        throw ParseError("network.nodes: expected an array");
    }
    for (const auto& item : doc["nodes"]) {
        json_util::reject_unknown_keys(item, {"id", "position"}, "node");
        nodes.push_back({detail::require_id(item, "id", "node"),
                         json_util::require_vec3(item, "position", "node") * mm});
    }

    std::vector<Segment> segments;
    if (!doc.contains("segments") || !doc["segments"].is_array()) {
        throw ParseError("network.segments: expected an array");
    }
    for (const auto& item : doc["segments"]) {
        json_util::reject_unknown_keys(item, {"id", "from_node", "to_node", "radius", "centerline"}, "segment");
        Segment seg;
        seg.id = detail::require_id(item, "id", "segment");
        const std::string ctx = "segment " + std::to_string(seg.id);
        seg.from_node = detail::require_id(item, "from_node", ctx);
        seg.to_node = detail::require_id(item, "to_node", ctx);
        seg.radius = require<double>(item, "radius", ctx) * mm;
        if (item.contains("centerline")) {
            const auto& pts = item["centerline"];
            if (!pts.is_array()) {
                throw ParseError(ctx + ".centerline: expected an array of points");
            }
            for (const auto& p : pts) {
                seg.centerline.push_back(json_util::to_vec3(p, ctx + ".centerline") * mm);
            }
            if (seg.centerline.size() < 2) {
                throw ValidationError(ValidationCode::BadCenterline, ctx + " needs at least 2 centerline points");
            }
        }
        segments.push_back(std::move(seg));
    }

    std::vector<AneurysmSac> sacs;
    if (doc.contains("sacs")) {
        if (!doc["sacs"].is_array()) {
            throw ParseError("network.sacs: expected an array");
        }
        for (const auto& item : doc["sacs"]) {
            json_util::reject_unknown_keys(
                item, {"id", "host_segment", "arc_position", "neck_radius", "neck_length", "volume", "normal"}, "sac");
            AneurysmSac sac;
            sac.id = detail::require_id(item, "id", "sac");
            const std::string ctx = "sac " + std::to_string(sac.id);
            sac.host_segment = detail::require_id(item, "host_segment", ctx);
            sac.arc_position = require<double>(item, "arc_position", ctx) * mm;
            sac.neck_radius = require<double>(item, "neck_radius", ctx) * mm;
            sac.neck_length = require<double>(item, "neck_length", ctx) * mm;
            sac.sac_volume = require<double>(item, "volume", ctx) * mm * mm * mm;
            if (item.contains("normal")) {
                sac.normal = json_util::to_vec3(item["normal"], ctx + ".normal");
            } else {
                sac.normal = Vec3::Zero(); // resolved below once the host exists
            }
            sacs.push_back(sac);
        }
    }

    if (!doc.contains("inflow")) {
        throw ValidationError(ValidationCode::MissingKey, "network: missing key 'inflow'");
    }
    const auto& in = doc["inflow"];
    json_util::reject_unknown_keys(in, {"inlet_node", "mean_flow", "peak_ratio", "heart_rate", "outlet_nodes"},
                                   "inflow");
    InflowSpec inflow;
    inflow.inlet_node = require<int>(in, "inlet_node", "inflow");
    inflow.mean_flow = require<double>(in, "mean_flow", "inflow") * mL;
    inflow.peak_ratio = json_util::value_or<double>(in, "peak_ratio", 1.0, "inflow");
    inflow.heart_rate = json_util::value_or<double>(in, "heart_rate", 0.0, "inflow");
    inflow.outlet_nodes = require<std::vector<int>>(in, "outlet_nodes", "inflow");

    // Sac normals default to a direction perpendicular to the host tangent;
    // explicit normals are orthogonalised against it.
    VesselNetwork probe(nodes, segments, {}, inflow);
    for (auto& sac : sacs) {
        if (!probe.has_segment(sac.host_segment)) {
            continue; // reported by the full validation below
        }
        const Segment& host = probe.segment(sac.host_segment);
        const double s = std::clamp(sac.arc_position, 0.0, host.length);
        const Vec3 tangent = segment_frame(probe, sac.host_segment, s).tangent;
        Vec3 n = sac.normal.norm() > 0.0 ? Vec3(sac.normal - sac.normal.dot(tangent) * tangent)
                                         : any_perpendicular(tangent);
        if (!(n.norm() > 1e-9)) {
            throw ValidationError(ValidationCode::BadSac,
                                  "sac " + std::to_string(sac.id) + " normal is parallel to its host vessel");
        }
        sac.normal = n.normalized();
    }
    return VesselNetwork(std::move(nodes), std::move(segments), std::move(sacs), std::move(inflow));
}

inline VesselNetwork load_network(std::string_view document) {
    return network_from_json(json_util::parse(document, "network"));
}

inline VesselNetwork load_network_file(const std::string& path) {
    return load_network(json_util::read_file(path));
}

} // namespace vasim::vascular
