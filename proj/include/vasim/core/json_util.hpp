#pragma once

#include "vasim/core/errors.hpp"
#include "vasim/core/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace vasim::json_util {

using json = nlohmann::json;

inline json parse(std::string_view text, std::string_view what) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void expect_object(const json& node, std::string_view ctx) {
    if (!node.is_object()) {
        throw ParseError(std::string(ctx) + ": expected a JSON object");
    }
}

inline void reject_unknown_keys(const json& node, std::initializer_list<std::string_view> allowed,
                                std::string_view ctx) {
    expect_object(node, ctx);
    for (const auto& [key, value] : node.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError(ValidationCode::UnknownKey,
                                  std::string(ctx) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
T as(const json& node, std::string_view ctx) {
    try {
        return node.get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string(ctx) + ": " + e.what());
    }
}

template <typename T>
T require(const json& node, const std::string& key, std::string_view ctx) {
    auto it = node.find(key);
    if (it == node.end()) {
        throw ValidationError(ValidationCode::MissingKey,
                              std::string(ctx) + ": missing key '" + key + "'");
    }
    return as<T>(*it, std::string(ctx) + "." + key);
}

template <typename T>
T value_or(const json& node, const std::string& key, T fallback, std::string_view ctx) {
    auto it = node.find(key);
    if (it == node.end() || it->is_null()) {
        return fallback;
    }
    return as<T>(*it, std::string(ctx) + "." + key);
}

inline Vec3 to_vec3(const json& node, std::string_view ctx) {
    if (!node.is_array() || node.size() != 3) {
        throw ParseError(std::string(ctx) + ": expected [x, y, z]");
    }
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!node[i].is_number()) {
            throw ParseError(std::string(ctx) + ": non-numeric component");
        }
        v[i] = node[i].get<double>();
    }
    if (!v.allFinite()) {
        throw ValidationError(ValidationCode::OutOfRange, std::string(ctx) + ": non-finite component");
    }
    return v;
}

inline Vec3 require_vec3(const json& node, const std::string& key, std::string_view ctx) {
    auto it = node.find(key);
    if (it == node.end()) {
        throw ValidationError(ValidationCode::MissingKey,
                              std::string(ctx) + ": missing key '" + key + "'");
    }
    return to_vec3(*it, std::string(ctx) + "." + key);
}

inline json from_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

} // namespace vasim::json_util
