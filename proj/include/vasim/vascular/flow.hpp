#pragma once

/// Quasi-steady lumped-parameter hemodynamics: Poiseuille resistances, the
/// pulsatile inflow waveform, and linear nodal analysis of the network.

#include "vasim/core/errors.hpp"
#include "vasim/core/types.hpp"
#include "vasim/vascular/network.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <queue>
#include <span>
#include <vector>

namespace vasim::vascular {

struct FluidProperties {
    double viscosity{3.5e-3}; // Pa·s
    double density{1050.0};   // kg/m³
};

inline double poiseuille_resistance(double viscosity, double length, double radius) {
    const double r2 = radius * radius;
    return 8.0 * viscosity * length / (kPi * r2 * r2);
}

/// Hydraulic resistances (Pa·s/m³), indexed like `net.segments()` and `net.sacs()`.
struct Resistances {
    std::vector<double> segment;
    std::vector<double> sac_neck;
};

inline Resistances build_resistances(const VesselNetwork& net, double viscosity) {
    if (!(viscosity > 0.0)) {
        throw ValidationError(ValidationCode::OutOfRange, "viscosity must be > 0");
    }
    Resistances out;
    out.segment.reserve(net.segments().size());
    for (const auto& seg : net.segments()) {
        out.segment.push_back(poiseuille_resistance(viscosity, seg.length, seg.radius));
    }
    out.sac_neck.reserve(net.sacs().size());
    for (const auto& sac : net.sacs()) {
        out.sac_neck.push_back(poiseuille_resistance(viscosity, sac.neck_length, sac.neck_radius));
    }
    return out;
}

/// Q(t) = Q̄·[c + A·max(0, sin 2π f t)]. A zero heart rate means steady flow.
inline double inflow_waveform(double t, const InflowSpec& spec) {
    if (spec.heart_rate == 0.0 || spec.peak_ratio == 1.0) {
        return spec.mean_flow;
    }
    const auto [amplitude, baseline] = waveform_coefficients(spec.peak_ratio);
    const double pulse = std::max(0.0, std::sin(2.0 * kPi * spec.heart_rate * t));
    return spec.mean_flow * (baseline + amplitude * pulse);
}

struct FlowField {
    /// Signed along each segment's centerline (from_node -> to_node), m³/s.
    std::vector<double> segment_flow;
    std::vector<double> node_pressure; // Pa, indexed like net.nodes()
    /// Exchange flow through each sac neck, m³/s (always >= 0).
    std::vector<double> sac_neck_flow;
};

/// Fraction of the host flow exchanged through an unoccluded sac neck, scaled
/// by the neck-to-host area ratio.
struct SacExchangeModel {
    double kappa{0.05};
};

/// Solves node pressures with the inlet as a flow source and every outlet held
/// at 0 Pa. `occlusion` (one entry per sac, or empty for none) scales each
/// neck conductance by (1 - occlusion).
inline FlowField solve_flow(const VesselNetwork& net, const Resistances& resistances, double q_in,
                            std::span<const double> occlusion = {}, SacExchangeModel exchange = {}) {
    const std::size_t n_nodes = net.nodes().size();
    const std::size_t n_sacs = net.sacs().size();
    if (!occlusion.empty() && occlusion.size() != n_sacs) {
        throw ValidationError(ValidationCode::OutOfRange, "one occlusion factor per sac is required");
    }
    for (double o : occlusion) {
        if (!(o >= 0.0 && o <= 1.0)) {
            throw ValidationError(ValidationCode::OutOfRange, "occlusion factors must lie in [0, 1]");
        }
    }

    // Every node must drain to some outlet, otherwise the system is singular.
    std::vector<bool> drains(n_nodes, false);
    std::queue<int> frontier;
    for (int outlet : net.inflow().outlet_nodes) {
        drains[net.node_index(outlet)] = true;
        frontier.push(outlet);
    }
    while (!frontier.empty()) {
        const int current = frontier.front();
        frontier.pop();
        for (int seg_id : net.incident(current)) {
            const Segment& seg = net.segment(seg_id);
            const int other = seg.from_node == current ? seg.to_node : seg.from_node;
            if (!drains[net.node_index(other)]) {
                drains[net.node_index(other)] = true;
                frontier.push(other);
            }
        }
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (!drains[i]) {
            throw TopologyError("node " + std::to_string(net.nodes()[i].id) + " cannot reach any outlet");
        }
    }

    // Unknowns are the pressures of non-outlet nodes.
    std::vector<int> unknown(n_nodes, -1);
    int n_unknown = 0;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (!net.is_outlet(net.nodes()[i].id)) {
            unknown[i] = n_unknown++;
        }
    }
    Eigen::MatrixXd conductance = Eigen::MatrixXd::Zero(n_unknown, n_unknown);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
    const auto& segments = net.segments();
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const double g = 1.0 / resistances.segment.at(k);
        const int a = unknown[net.node_index(segments[k].from_node)];
        const int b = unknown[net.node_index(segments[k].to_node)];
        if (a >= 0) conductance(a, a) += g;
        if (b >= 0) conductance(b, b) += g;
        if (a >= 0 && b >= 0) {
            conductance(a, b) -= g;
            conductance(b, a) -= g;
        }
    }
    rhs(unknown[net.node_index(net.inflow().inlet_node)]) = q_in;

    FlowField field;
    field.node_pressure.assign(n_nodes, 0.0);
    if (n_unknown > 0) {
        const Eigen::VectorXd pressure = conductance.ldlt().solve(rhs);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            if (unknown[i] >= 0) {
                field.node_pressure[i] = pressure(unknown[i]);
            }
        }
    }
    field.segment_flow.resize(segments.size());
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const double dp = field.node_pressure[net.node_index(segments[k].from_node)] -
                          field.node_pressure[net.node_index(segments[k].to_node)];
        field.segment_flow[k] = dp / resistances.segment.at(k);
    }

    field.sac_neck_flow.resize(n_sacs);
    for (std::size_t j = 0; j < n_sacs; ++j) {
        const AneurysmSac& sac = net.sacs()[j];
        const Segment& host = net.segment(sac.host_segment);
        const double host_flow = std::abs(field.segment_flow[net.segment_index(sac.host_segment)]);
        const double area_ratio = (sac.neck_radius / host.radius) * (sac.neck_radius / host.radius);
        const double open_fraction = occlusion.empty() ? 1.0 : 1.0 - occlusion[j];
        const double neck_conductance = open_fraction / resistances.sac_neck.at(j);
        field.sac_neck_flow[j] =
            exchange.kappa * host_flow * area_ratio * neck_conductance * resistances.sac_neck.at(j);
    }
    return field;
}

/// Signed flow balance at a node (inflow source counted at the inlet, outlets
/// excluded). Zero for a conserving solution.
inline double node_residual(const VesselNetwork& net, const FlowField& flow, int node_id, double q_in) {
    double sum = node_id == net.inflow().inlet_node ? q_in : 0.0;
    for (int seg_id : net.incident(node_id)) {
        const Segment& seg = net.segment(seg_id);
        const double q = flow.segment_flow[net.segment_index(seg_id)];
        if (seg.to_node == node_id) sum += q;
        if (seg.from_node == node_id) sum -= q;
    }
    return sum;
}

/// Largest |residual| over every non-outlet node.
inline double max_conservation_residual(const VesselNetwork& net, const FlowField& flow, double q_in) {
    double worst = 0.0;
    for (const auto& node : net.nodes()) {
        if (!net.is_outlet(node.id)) {
            worst = std::max(worst, std::abs(node_residual(net, flow, node.id, q_in)));
        }
    }
    return worst;
}

/// Mean axial velocity (m/s) at a location, signed along the local tangent.
inline double local_velocity(const VesselNetwork& net, const FlowField& flow, int segment_id, double /*s*/) {
    const Segment& seg = net.segment(segment_id);
    return flow.segment_flow.at(net.segment_index(segment_id)) / (kPi * seg.radius * seg.radius);
}

} // namespace vasim::vascular
