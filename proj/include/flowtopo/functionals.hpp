#pragma once

#include <utility>
#include <vector>

#include "flowtopo/assembly.hpp"

namespace flowtopo {

enum class FunctionalKind {
    dissipation,
    volume,
    point_velocity,
    inlet_pressure,
    drag,
    lift,
};

/// Value of a design-dependent functional with its explicit partial
/// derivatives.  Zero-size vectors stand for identically zero partials.
struct FunctionalValue {
    double value = 0.0;
    Eigen::VectorXd dstate;  ///< partial wrt the state vector
    Eigen::VectorXd ddesign; ///< explicit partial wrt element design values
};

/// Power dissipated by viscosity and penalization over the assembled elements.
inline FunctionalValue dissipation_functional(const Assembler& asm_,
                                              const Eigen::VectorXd& state,
                                              const Eigen::VectorXd& gamma,
                                              const FlowParams& p) {
    FunctionalValue f;
    f.dstate = Eigen::VectorXd::Zero(asm_.mesh().num_dofs());
    f.ddesign = Eigen::VectorXd::Zero(asm_.mesh().num_elements());
    Vector12 se;
    for (int e : asm_.elements()) {
        const auto dofs = asm_.mesh().element_dofs(e);
        for (int i = 0; i < 12; ++i) se[i] = state[dofs[i]];
        const ElementPhi ep = element_phi(asm_.quad_cache(), se, gamma[e], p);
        f.value += ep.value;
        for (int i = 0; i < 12; ++i) f.dstate[dofs[i]] += ep.dvds[i];
        f.ddesign[e] += ep.dvdg;
    }
    return f;
}

/// Net penalization reaction along one axis (0 for drag, 1 for lift).
inline FunctionalValue force_functional(const Assembler& asm_,
                                        const Eigen::VectorXd& state,
                                        const Eigen::VectorXd& gamma,
                                        const FlowParams& p, int component,
                                        double sign = 1.0) {
    FunctionalValue f;
    f.dstate = Eigen::VectorXd::Zero(asm_.mesh().num_dofs());
    f.ddesign = Eigen::VectorXd::Zero(asm_.mesh().num_elements());
    Vector12 se;
    for (int e : asm_.elements()) {
        const auto dofs = asm_.mesh().element_dofs(e);
        for (int i = 0; i < 12; ++i) se[i] = state[dofs[i]];
        const ElementForce ef = element_force(asm_.quad_cache(), se, gamma[e], p);
        const double v = component == 0 ? ef.drag : ef.lift;
        const Vector12& dvds = component == 0 ? ef.ddrag_ds : ef.dlift_ds;
        const double dvdg = component == 0 ? ef.ddrag_dg : ef.dlift_dg;
        f.value += sign * v;
        for (int i = 0; i < 12; ++i) f.dstate[dofs[i]] += sign * dvds[i];
        f.ddesign[e] += sign * dvdg;
    }
    return f;
}

/// Functional that reads a weighted combination of state entries.
inline FunctionalValue linear_state_functional(
    int num_dofs, const std::vector<std::pair<int, double>>& weights,
    const Eigen::VectorXd& state) {
    FunctionalValue f;
    f.dstate = Eigen::VectorXd::Zero(num_dofs);
    for (const auto& [dof, w] : weights) {
        f.value += w * state[dof];
        f.dstate[dof] += w;
    }
    return f;
}

/// Velocity component at the node nearest to (x, y).
struct PointProbe {
    int node;
    int dof;
    double snapped_x, snapped_y;
    double sign;
};

inline PointProbe make_point_probe(const Mesh& mesh, double x, double y, int component,
                                   double sign = 1.0) {
    PointProbe pr{};
    pr.node = mesh.nearest_node(x, y);
    pr.dof = component == 0 ? mesh.u1_dof(pr.node) : mesh.u2_dof(pr.node);
    pr.snapped_x = mesh.node_x(pr.node);
    pr.snapped_y = mesh.node_y(pr.node);
    pr.sign = sign;
    return pr;
}

/// Equal weights averaging the pressure over a node set.
inline std::vector<std::pair<int, double>> mean_pressure_weights(
    const Mesh& mesh, const std::vector<int>& nodes) {
    std::vector<std::pair<int, double>> w;
    w.reserve(nodes.size());
    const double inv = 1.0 / static_cast<double>(nodes.size());
    for (int n : nodes) w.emplace_back(mesh.p_dof(n), inv);
    return w;
}

/// Mean design value over the active elements.
inline FunctionalValue volume_functional(const Eigen::VectorXd& gamma,
                                         const std::vector<int>& active) {
    FunctionalValue f;
    f.ddesign = Eigen::VectorXd::Zero(gamma.size());
    const double inv = 1.0 / static_cast<double>(active.size());
    for (int e : active) {
        f.value += gamma[e] * inv;
        f.ddesign[e] = inv;
    }
    return f;
}

/// Non-discreteness in percent: 0 for a fully solid/fluid design, 100 when
/// every active element sits at one half.
inline double greyscale_measure(const Eigen::VectorXd& gamma,
                                const std::vector<int>& active) {
    double acc = 0.0;
    for (int e : active) acc += gamma[e] * (1.0 - gamma[e]);
    return 400.0 * acc / static_cast<double>(active.size());
}

} // namespace flowtopo
