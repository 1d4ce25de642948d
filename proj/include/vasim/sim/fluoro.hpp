#pragma once

/// Orthographic "fluoroscopy" projection of the world: vessel centerlines,
/// the two end magnets of the spinner as markers, payload opacity and sac fill.

#include "vasim/sim/world.hpp"

#include <array>
#include <vector>

namespace vasim::sim {

inline Vec2 project(const ViewBasis& view, const Vec3& p) { return {p.dot(view.right), p.dot(view.up)}; }

struct SacOverlay {
    int id{};
    Vec2 center;
    double radius{}; // projected dome radius, m
    double fill{};   // occlusion in [0, 1]
};

struct FluoroScene {
    ViewBasis view;
    std::vector<int> vessel_ids;
    std::vector<std::vector<Vec2>> vessels;
    std::array<Vec2, 2> markers;
    double payload_opacity{};
    std::vector<SacOverlay> sacs;
};

/// Payload shading: the loaded powder is fully visible until it starts to leave.
inline double payload_opacity(const therapy::PayloadState& payload) {
    if (payload.agent == therapy::Agent::None) return 0.0;
    return payload.seal.integrity > 0.0 ? 1.0 : 1.0 - payload.released_fraction;
}

inline FluoroScene fluoro_project(const WorldState& world, const ViewBasis& view) {
    view.validate();
    const auto& net = world.network();
    FluoroScene scene;
    scene.view = view;
    for (const auto& seg : net.segments()) {
        std::vector<Vec2> line;
        line.reserve(seg.centerline.size());
        for (const auto& p : seg.centerline) {
            line.push_back(project(view, p));
        }
        scene.vessel_ids.push_back(seg.id);
        scene.vessels.push_back(std::move(line));
    }
    const Vec3 centre = spinner::spinner_position(net, world.spinner);
    const Vec3 half = 0.5 * world.config->spinner_spec.body_length * spinner::spinner_axis(net, world.spinner);
    scene.markers = {project(view, centre - half), project(view, centre + half)};
    scene.payload_opacity = payload_opacity(world.payload);
    for (std::size_t j = 0; j < net.sacs().size(); ++j) {
        const auto& sac = net.sacs()[j];
        scene.sacs.push_back({sac.id, project(view, vascular::sac_center(net, sac)), vascular::sac_dome_radius(sac),
                              world.sacs.at(j).occlusion});
    }
    return scene;
}

} // namespace vasim::sim
