#pragma once

// Shared helpers for the unit suites: fixture paths, tiny network builders
// and seeded random generators for the property tests.

#include "vasim/vascular/network.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace vasim::test {

inline std::filesystem::path source_dir() { return VASIM_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "fixtures" / name; }
inline std::filesystem::path scenario_file(const std::string& name) {
    return source_dir() / "fixtures" / "scenarios" / (name + ".json");
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vasim_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Seeded generator; every property test names its own seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    bool coin() { return integer(0, 1) == 1; }
    Vec3 unit_vector() {
        for (;;) {
            Vec3 v(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
            if (v.norm() > 0.1 && v.norm() <= 1.0) return v.normalized();
        }
    }

  private:
    std::mt19937_64 engine_;
};

/// Straight tube from the origin along +x. Lengths in metres.
inline vascular::VesselNetwork straight_tube(double length, double radius, double mean_flow = 1e-6,
                                             double peak_ratio = 1.0, double heart_rate = 0.0) {
    using namespace vascular;
    std::vector<Node> nodes = {{1, Vec3::Zero()}, {2, Vec3(length, 0, 0)}};
    std::vector<Segment> segments(1);
    segments[0].id = 1;
    segments[0].from_node = 1;
    segments[0].to_node = 2;
    segments[0].radius = radius;
    InflowSpec inflow{1, mean_flow, peak_ratio, heart_rate, {2}};
    return VesselNetwork(nodes, segments, {}, inflow);
}

/// Random binary tree: node 1 is the inlet, leaves are outlets, straight
/// segments with random lengths and radii (metres).
inline vascular::VesselNetwork random_tree(Rng& rng, int max_depth, int sac_count = 0) {
    using namespace vascular;
    std::vector<Node> nodes = {{1, Vec3::Zero()}};
    std::vector<Segment> segments;
    std::vector<int> leaves;
    struct Pending {
        int node;
        int depth;
    };
    std::vector<Pending> stack = {{1, 0}};
    int next_node = 2;
    while (!stack.empty()) {
        const auto [parent, depth] = stack.back();
        stack.pop_back();
        const int children = (depth == 0) ? 1 : (depth < max_depth && rng.integer(0, 3) > 0 ? 2 : 0);
        if (children == 0) {
            leaves.push_back(parent);
            continue;
        }
        for (int c = 0; c < children; ++c) {
            const Vec3 from = nodes[static_cast<std::size_t>(parent - 1)].position;
            const int id = next_node++;
            nodes.push_back({id, from + rng.unit_vector() * rng.uniform(0.005, 0.05)});
            Segment seg;
            seg.id = static_cast<int>(segments.size()) + 1;
            seg.from_node = parent;
            seg.to_node = id;
            seg.radius = rng.uniform(0.5e-3, 2.5e-3);
            segments.push_back(seg);
            stack.push_back({id, depth + 1});
        }
    }
    std::vector<AneurysmSac> sacs;
    for (int k = 0; k < sac_count; ++k) {
        const auto& host = segments[static_cast<std::size_t>(rng.integer(0, static_cast<int>(segments.size()) - 1))];
        AneurysmSac sac;
        sac.id = k + 1;
        sac.host_segment = host.id;
        const double length =
            (nodes[static_cast<std::size_t>(host.to_node - 1)].position - nodes[static_cast<std::size_t>(host.from_node - 1)].position)
                .norm();
        sac.arc_position = rng.uniform(0.0, length);
        sac.neck_radius = rng.uniform(0.3e-3, 1.2e-3);
        sac.neck_length = rng.uniform(0.5e-3, 2e-3);
        sac.sac_volume = rng.uniform(10e-9, 200e-9);
        sac.normal = any_perpendicular(
            (nodes[static_cast<std::size_t>(host.to_node - 1)].position - nodes[static_cast<std::size_t>(host.from_node - 1)].position)
                .normalized());
        sacs.push_back(sac);
    }
    InflowSpec inflow{1, rng.uniform(0.2e-6, 3e-6), rng.uniform(1.0, 3.0), rng.uniform(0.5, 2.0), leaves};
    return VesselNetwork(nodes, segments, sacs, inflow);
}

} // namespace vasim::test
