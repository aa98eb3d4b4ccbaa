#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "flowtopo/assembly.hpp"
#include "flowtopo/errors.hpp"
#include "flowtopo/functionals.hpp"
#include "flowtopo/interpolation.hpp"
#include "flowtopo/mesh.hpp"

namespace flowtopo {

enum class OptimizerKind { oc, mma };

/// One inequality constraint: functional value <= bound.
struct ConstraintSpec {
    FunctionalKind kind;
    double bound;
};

/// A complete benchmark setup: boundary conditions, passive regions,
/// objective and constraints.
struct ProblemDefinition {
    std::string name;
    Mesh mesh;
    FlowParams params;
    DirichletBC bc;
    std::vector<int> passive_solid; ///< held at gamma = 0
    std::vector<int> passive_fluid; ///< held at gamma = 1
    std::vector<int> active;
    double volfrac = 1.0;
    OptimizerKind optimizer = OptimizerKind::oc;

    FunctionalKind objective = FunctionalKind::dissipation;
    double objective_sign = 1.0; ///< -1 turns maximization into minimization
    std::vector<std::pair<int, double>> objective_weights; ///< linear kinds
    PointProbe probe{};                                    ///< point-velocity objective
    std::vector<std::pair<int, double>> pressure_weights;  ///< inlet mean pressure
    std::vector<ConstraintSpec> constraints;

    double reynolds = 0.0;
    double Uin = 1.0;

    /// Elements not listed as passive, in index order.
    void finalize_active() {
        std::set<int> passive(passive_solid.begin(), passive_solid.end());
        passive.insert(passive_fluid.begin(), passive_fluid.end());
        if (passive.size() != passive_solid.size() + passive_fluid.size())
            throw ConfigError("passive solid and fluid sets overlap");
        active.clear();
        for (int e = 0; e < mesh.num_elements(); ++e)
            if (!passive.count(e)) active.push_back(e);
        if (active.empty()) throw ConfigError("no active elements remain");
    }

    /// Initial design: uniform xinit on active elements, prescribed passive values.
    Eigen::VectorXd initial_design(double xinit) const {
        Eigen::VectorXd g = Eigen::VectorXd::Constant(mesh.num_elements(), xinit);
        apply_passive(g);
        return g;
    }

    void apply_passive(Eigen::VectorXd& g) const {
        for (int e : passive_solid) g[e] = 0.0;
        for (int e : passive_fluid) g[e] = 1.0;
    }
};

namespace detail {

/// Parabolic profile vanishing exactly at y0 and y1, peaking at Uin.
inline double parabola(double y, double y0, double y1, double Uin) {
    const double w = y1 - y0;
    return 4.0 * Uin * (y - y0) * (y1 - y) / (w * w);
}

/// No-slip everywhere on the outer boundary.
inline std::vector<std::pair<int, double>> wall_pairs(const Mesh& m) {
    std::vector<std::pair<int, double>> bc;
    for (int n : m.boundary_nodes()) {
        bc.emplace_back(m.u1_dof(n), 0.0);
        bc.emplace_back(m.u2_dof(n), 0.0);
    }
    return bc;
}

inline void erase_dof(std::vector<std::pair<int, double>>& bc, int dof) {
    bc.erase(std::remove_if(bc.begin(), bc.end(),
                            [dof](const auto& pr) { return pr.first == dof; }),
             bc.end());
}

/// Overrides an existing prescription (wall zeros) or adds a new one.
inline void set_dof(std::vector<std::pair<int, double>>& bc, int dof, double value) {
    for (auto& pr : bc)
        if (pr.first == dof) {
            pr.second = value;
            return;
        }
    bc.emplace_back(dof, value);
}

} // namespace detail

/// Two parallel inlets on the left and mirrored outlets on the right, both of
/// height Ly/6 centered at Ly/4 and 3Ly/4.  Walls are no-slip; outlets pin
/// pressure to zero and let the flow leave normally.
inline ProblemDefinition double_pipe(Mesh mesh, double Uin, FlowParams params,
                                     double volfrac = 1.0 / 3.0) {
    if (mesh.nely() % 6 != 0)
        throw ConfigError("double pipe: number of elements per side must be divisible by 6");
    ProblemDefinition prob{.name = "double_pipe", .mesh = mesh, .params = params};
    prob.Uin = Uin;
    prob.volfrac = volfrac;

    auto bc = detail::wall_pairs(mesh);
    const int rows_per_sixth = mesh.nely() / 6;
    for (int pipe = 0; pipe < 2; ++pipe) {
        const int j0 = (pipe == 0 ? 1 : 4) * rows_per_sixth;
        const int j1 = j0 + rows_per_sixth;
        const double ylo = mesh.node_y(mesh.node_index(0, j0));
        const double yhi = mesh.node_y(mesh.node_index(0, j1));
        for (int j = j0; j <= j1; ++j) {
            const int nin = mesh.node_index(0, j);
            detail::set_dof(bc, mesh.u1_dof(nin),
                            detail::parabola(mesh.node_y(nin), ylo, yhi, Uin));
            detail::set_dof(bc, mesh.u2_dof(nin), 0.0);
            const int nout = mesh.node_index(mesh.nodx() - 1, j);
            detail::set_dof(bc, mesh.p_dof(nout), 0.0);
            detail::set_dof(bc, mesh.u2_dof(nout), 0.0);
            if (j > j0 && j < j1) detail::erase_dof(bc, mesh.u1_dof(nout));
        }
    }
    prob.bc = DirichletBC::from_pairs(std::move(bc));
    prob.constraints = {{FunctionalKind::volume, volfrac}};
    prob.reynolds = Uin * (mesh.Ly() / 6.0) * params.rho / params.mu;
    prob.finalize_active();
    return prob;
}

/// Left inlet of width Ly/5 (spanning [Ly/5, 2Ly/5] from the top) turning to a
/// bottom outlet of width Lx/5 (spanning [3Lx/5, 4Lx/5]).
inline ProblemDefinition pipe_bend(Mesh mesh, double Uin, FlowParams params,
                                   double volfrac = 0.25) {
    if (mesh.nely() % 5 != 0 || mesh.nelx() % 5 != 0)
        throw ConfigError("pipe bend: number of elements per side must be divisible by 5");
    ProblemDefinition prob{.name = "pipe_bend", .mesh = mesh, .params = params};
    prob.Uin = Uin;
    prob.volfrac = volfrac;

    auto bc = detail::wall_pairs(mesh);
    const int j0 = mesh.nely() / 5, j1 = 2 * mesh.nely() / 5;
    const double ylo = mesh.node_y(mesh.node_index(0, j0));
    const double yhi = mesh.node_y(mesh.node_index(0, j1));
    for (int j = j0; j <= j1; ++j) {
        const int n = mesh.node_index(0, j);
        detail::set_dof(bc, mesh.u1_dof(n), detail::parabola(mesh.node_y(n), ylo, yhi, Uin));
        detail::set_dof(bc, mesh.u2_dof(n), 0.0);
    }
    const int i0 = 3 * mesh.nelx() / 5, i1 = 4 * mesh.nelx() / 5;
    for (int i = i0; i <= i1; ++i) {
        const int n = mesh.node_index(i, mesh.nody() - 1);
        detail::set_dof(bc, mesh.p_dof(n), 0.0);
        detail::set_dof(bc, mesh.u1_dof(n), 0.0);
        if (i > i0 && i < i1) detail::erase_dof(bc, mesh.u2_dof(n));
    }
    prob.bc = DirichletBC::from_pairs(std::move(bc));
    prob.constraints = {{FunctionalKind::volume, volfrac}};
    prob.reynolds = Uin * (mesh.Ly() / 5.0) * params.rho / params.mu;
    prob.finalize_active();
    return prob;
}

/// Uniform free-stream velocity on the whole outer boundary with a single
/// zero-pressure pin in the upper-left corner.  A one-element fluid ring is
/// kept passive along the edge and a central square block is kept solid.
inline ProblemDefinition rugby_ball(Mesh mesh, double Uin, FlowParams params,
                                    double volfrac = 0.94) {
    if (mesh.nelx() % 5 != 0 || mesh.nely() % 5 != 0)
        throw ConfigError("rugby ball: number of elements per side must be divisible by 5");
    ProblemDefinition prob{.name = "rugby_ball", .mesh = mesh, .params = params};
    prob.Uin = Uin;
    prob.volfrac = volfrac;

    std::vector<std::pair<int, double>> bc;
    for (int n : mesh.boundary_nodes()) {
        bc.emplace_back(mesh.u1_dof(n), Uin);
        bc.emplace_back(mesh.u2_dof(n), 0.0);
    }
    bc.emplace_back(mesh.p_dof(0), 0.0);
    prob.bc = DirichletBC::from_pairs(std::move(bc));

    std::set<int> ring;
    for (int i = 0; i < mesh.nelx(); ++i)
        for (int j = 0; j < mesh.nely(); ++j)
            if (i == 0 || i == mesh.nelx() - 1 || j == 0 || j == mesh.nely() - 1)
                ring.insert(mesh.element_index(i, j));
    prob.passive_fluid.assign(ring.begin(), ring.end());
    // Central block spanning the middle fifth, inclusive on both ends.
    for (int i = 2 * mesh.nelx() / 5 - 1; i <= 3 * mesh.nelx() / 5 - 1; ++i)
        for (int j = 2 * mesh.nely() / 5 - 1; j <= 3 * mesh.nely() / 5 - 1; ++j)
            prob.passive_solid.push_back(mesh.element_index(i, j));

    prob.constraints = {{FunctionalKind::volume, volfrac}};
    prob.reynolds = Uin * mesh.Ly() * params.rho / params.mu;
    prob.finalize_active();
    return prob;
}

/// Full-height parabolic inlet on the left, normal outlet on the right, and a
/// point-velocity objective at the domain center rewarding downward flow
/// reversal.  Constrains volume and the mean inlet pressure.
inline ProblemDefinition flow_reversal(Mesh mesh, double Uin, FlowParams params,
                                       double beta, double p_ref,
                                       double volfrac = 0.6) {
    if (!(beta > 0.0)) throw ConfigError("flow reversal: beta must be positive");
    ProblemDefinition prob{.name = "flow_reversal", .mesh = mesh, .params = params};
    prob.Uin = Uin;
    prob.volfrac = volfrac;

    auto bc = detail::wall_pairs(mesh);
    for (int j = 0; j < mesh.nody(); ++j) {
        const int n = mesh.node_index(0, j);
        detail::set_dof(bc, mesh.u1_dof(n),
                        detail::parabola(mesh.node_y(n), 0.0, mesh.Ly(), Uin));
        detail::set_dof(bc, mesh.u2_dof(n), 0.0);
        const int nout = mesh.node_index(mesh.nodx() - 1, j);
        detail::set_dof(bc, mesh.p_dof(nout), 0.0);
        detail::set_dof(bc, mesh.u2_dof(nout), 0.0);
        if (j > 0 && j < mesh.nody() - 1) detail::erase_dof(bc, mesh.u1_dof(nout));
    }
    prob.bc = DirichletBC::from_pairs(std::move(bc));

    // Minimizing u2 at the center maximizes the reversed (upward-reported) flow.
    prob.objective = FunctionalKind::point_velocity;
    prob.probe = make_point_probe(mesh, 0.5 * mesh.Lx(), 0.5 * mesh.Ly(), 1, 1.0);
    prob.objective_weights = {{prob.probe.dof, 1.0}};
    prob.pressure_weights = mean_pressure_weights(mesh, mesh.left_edge_nodes());
    prob.constraints = {{FunctionalKind::volume, volfrac},
                        {FunctionalKind::inlet_pressure, beta * p_ref}};
    prob.optimizer = OptimizerKind::mma;
    prob.reynolds = Uin * mesh.Ly() * params.rho / params.mu;
    prob.finalize_active();
    return prob;
}

enum class DragLiftMode { min_drag, max_lift };

/// Free-stream outer boundary around a centered Lx/2 x Ly/2 design block;
/// everything outside the block is passive fluid.  Minimizes drag, or
/// maximizes lift subject to a drag bound.
inline ProblemDefinition drag_lift(Mesh mesh, double Uin, FlowParams params,
                                   DragLiftMode mode, double volfrac = 0.85,
                                   double beta = 0.0, double drag_ref = 0.0) {
    if (mesh.nelx() % 4 != 0 || mesh.nely() % 4 != 0)
        throw ConfigError("drag/lift: number of elements per side must be divisible by 4");
    if (mode == DragLiftMode::max_lift && !(beta > 0.0 && drag_ref > 0.0))
        throw ConfigError("drag/lift: lift mode needs beta > 0 and a drag reference");
    ProblemDefinition prob{.name = mode == DragLiftMode::min_drag ? "min_drag" : "max_lift",
                           .mesh = mesh,
                           .params = params};
    prob.Uin = Uin;
    prob.volfrac = volfrac;

    std::vector<std::pair<int, double>> bc;
    for (int n : mesh.boundary_nodes()) {
        bc.emplace_back(mesh.u1_dof(n), Uin);
        bc.emplace_back(mesh.u2_dof(n), 0.0);
    }
    bc.emplace_back(mesh.p_dof(0), 0.0);
    prob.bc = DirichletBC::from_pairs(std::move(bc));

    const int i0 = mesh.nelx() / 4, i1 = 3 * mesh.nelx() / 4;
    const int j0 = mesh.nely() / 4, j1 = 3 * mesh.nely() / 4;
    for (int i = 0; i < mesh.nelx(); ++i)
        for (int j = 0; j < mesh.nely(); ++j)
            if (i < i0 || i >= i1 || j < j0 || j >= j1)
                prob.passive_fluid.push_back(mesh.element_index(i, j));

    if (mode == DragLiftMode::min_drag) {
        prob.objective = FunctionalKind::drag;
        prob.constraints = {{FunctionalKind::volume, volfrac}};
    } else {
        prob.objective = FunctionalKind::lift;
        prob.objective_sign = -1.0;
        prob.constraints = {{FunctionalKind::volume, volfrac},
                            {FunctionalKind::drag, beta * drag_ref}};
    }
    prob.optimizer = OptimizerKind::mma;
    const double Lc = std::sqrt(volfrac * 0.5 * mesh.Lx() * 0.5 * mesh.Ly());
    prob.reynolds = Uin * Lc * params.rho / params.mu;
    prob.finalize_active();
    return prob;
}

/// Consistency checks shared by all catalog problems.
inline void audit_problem(const ProblemDefinition& prob) {
    const Mesh& m = prob.mesh;
    bool pressure_pinned = false;
    for (size_t k = 0; k < prob.bc.dofs.size(); ++k) {
        const int d = prob.bc.dofs[k];
        if (d < 0 || d >= m.num_dofs()) throw ConfigError("BC DOF out of range");
        if (!std::isfinite(prob.bc.values[k])) throw ConfigError("BC value not finite");
        if (d >= m.num_velocity_dofs()) pressure_pinned = true;
    }
    if (!pressure_pinned) throw ConfigError("no pressure reference in BC set");
    std::set<int> solid(prob.passive_solid.begin(), prob.passive_solid.end());
    for (int e : prob.passive_fluid)
        if (solid.count(e)) throw ConfigError("passive sets overlap");
    if (!(prob.volfrac > 0.0) || prob.volfrac >= 1.0 + 1e-12)
        throw ConfigError("volume fraction must lie in (0, 1]");
}

} // namespace flowtopo
