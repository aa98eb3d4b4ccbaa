#pragma once

#include <cmath>
#include <vector>

#include "flowtopo/optimizers.hpp"

namespace flowtopo {

/// How the maximum Brinkman penalty scales with the flow parameters.  The
/// porous form alpha_max = mu / Da matches a porous-media analogy; the
/// alternative adds a convective contribution, alpha_max = (1 + 1/Re) / Da.
enum class PenaltyScaling { porous, kondoh };

/// Channel of aspect-ratio length with a hollow box obstacle sitting on the
/// bottom wall.  All sizes are in element counts so every face aligns with
/// the grid; negative values pick defaults proportional to nely.
struct ObstacleChannelConfig {
    int nely = 32;
    double aspect = 3.0;
    int box_start = -1;      ///< element column of the box's left face
    int box_width = -1;      ///< outer box width (default nely / 2)
    int box_height = -1;     ///< outer box height (default nely / 2)
    int wall_thickness = -1; ///< box wall thickness in elements (default nely / 10,
                             ///< a fixed physical thickness so wall leakage does
                             ///< not grow with refinement)
    double Uin = 1.0;        ///< peak of the parabolic inlet
};

/// The benchmark geometry with its element partition and both boundary
/// condition sets: the continuous model penalizes the walls through the
/// design field, the discrete reference pins every node of a non-fluid
/// element to zero velocity and assembles only the fluid elements.
struct ObstacleChannel {
    Mesh mesh{2, 2, 1.0, 1.0};
    ObstacleChannelConfig cfg;
    std::vector<int> fluid, solid, cavity;
    DirichletBC bc_continuous;
    DirichletBC bc_discrete;
    std::vector<std::pair<int, double>> inlet_mean, outlet_mean;

    /// Binary design for the continuous model: walls solid, rest fluid.
    Eigen::VectorXd design() const {
        Eigen::VectorXd g = Eigen::VectorXd::Ones(mesh.num_elements());
        for (int e : solid) g[e] = 0.0;
        return g;
    }
};

inline ObstacleChannel make_obstacle_channel(ObstacleChannelConfig cfg = {}) {
    if (cfg.nely < 8) throw ConfigError("obstacle channel: nely must be at least 8");
    const int nelx = static_cast<int>(std::lround(cfg.aspect * cfg.nely));
    if (cfg.box_start < 0) cfg.box_start = cfg.nely;
    if (cfg.box_width < 0) cfg.box_width = cfg.nely / 2;
    if (cfg.box_height < 0) cfg.box_height = cfg.nely / 2;
    if (cfg.wall_thickness < 0) cfg.wall_thickness = std::max(2, cfg.nely / 10);
    const int i0 = cfg.box_start, i1 = cfg.box_start + cfg.box_width;
    const int j1 = cfg.nely, j0 = cfg.nely - cfg.box_height;
    const int t = cfg.wall_thickness;
    if (i1 > nelx || j0 < 1)
        throw ConfigError("obstacle channel: box does not fit inside the channel");
    if (2 * t >= cfg.box_width || 2 * t >= cfg.box_height)
        throw ConfigError("obstacle channel: walls leave no cavity");

    ObstacleChannel geo;
    geo.cfg = cfg;
    geo.mesh = Mesh(nelx, cfg.nely, cfg.aspect, 1.0);
    const Mesh& m = geo.mesh;

    for (int i = 0; i < nelx; ++i)
        for (int j = 0; j < cfg.nely; ++j) {
            const int e = m.element_index(i, j);
            if (i < i0 || i >= i1 || j < j0) {
                geo.fluid.push_back(e);
            } else if (i < i0 + t || i >= i1 - t || j < j0 + t || j >= j1 - t) {
                geo.solid.push_back(e);
            } else {
                geo.cavity.push_back(e);
            }
        }

    // channel walls, parabolic inlet, zero normal-stress (natural) outlet
    std::vector<std::pair<int, double>> bc;
    for (int n : m.top_edge_nodes()) {
        detail::set_dof(bc, m.u1_dof(n), 0.0);
        detail::set_dof(bc, m.u2_dof(n), 0.0);
    }
    for (int n : m.bottom_edge_nodes()) {
        detail::set_dof(bc, m.u1_dof(n), 0.0);
        detail::set_dof(bc, m.u2_dof(n), 0.0);
    }
    for (int n : m.left_edge_nodes()) {
        detail::set_dof(bc, m.u1_dof(n), detail::parabola(m.node_y(n), 0.0, m.Ly(), cfg.Uin));
        detail::set_dof(bc, m.u2_dof(n), 0.0);
    }
    geo.bc_continuous = DirichletBC::from_pairs(bc);

    for (int e : geo.solid)
        for (int n : m.element_nodes(e)) {
            detail::set_dof(bc, m.u1_dof(n), 0.0);
            detail::set_dof(bc, m.u2_dof(n), 0.0);
        }
    for (int e : geo.cavity)
        for (int n : m.element_nodes(e)) {
            detail::set_dof(bc, m.u1_dof(n), 0.0);
            detail::set_dof(bc, m.u2_dof(n), 0.0);
        }
    geo.bc_discrete = DirichletBC::from_pairs(bc);

    geo.inlet_mean = mean_pressure_weights(m, m.left_edge_nodes());
    geo.outlet_mean = mean_pressure_weights(m, m.right_edge_nodes());
    return geo;
}

/// Flow parameters for the study's non-dimensionalization: Uin = 1, rho = 1,
/// mu = 1/Re, no background friction and the penalty from the Darcy number.
inline FlowParams study_params(double reynolds, double darcy, PenaltyScaling scaling) {
    FlowParams p;
    p.rho = 1.0;
    p.mu = 1.0 / reynolds;
    p.alpha_min = 0.0;
    p.alpha_max = scaling == PenaltyScaling::porous ? p.mu / darcy
                                                    : (1.0 + 1.0 / reynolds) / darcy;
    p.q_alpha = 1.0; // irrelevant for a binary design
    return p;
}

/// One forward solve of either representation; the state is a warm start.
inline NewtonReport solve_obstacle_flow(const ObstacleChannel& geo, bool discrete,
                                        const FlowParams& p, Eigen::VectorXd& state,
                                        const NewtonConfig& ncfg = {}) {
    if (discrete) {
        Assembler assem(geo.mesh, geo.bc_discrete, {}, geo.fluid);
        LinearSolver solver;
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(geo.mesh.num_elements());
        return newton_solve(assem, solver, state, ones, p, ncfg);
    }
    Assembler assem(geo.mesh, geo.bc_continuous, {});
    LinearSolver solver;
    const Eigen::VectorXd gamma = geo.design();
    return newton_solve(assem, solver, state, gamma, p, ncfg);
}

namespace detail {

inline Vector12 gather_state(const Mesh& m, int e, const Eigen::VectorXd& s) {
    Vector12 out;
    const auto dofs = m.element_dofs(e);
    for (int i = 0; i < 12; ++i) out[i] = s[dofs[i]];
    return out;
}

/// Viscous dissipation over an element subset (alpha contribution vanishes
/// on fluid elements because alpha_min = 0 in the study parameters).
inline double subset_phi(const Mesh& m, const std::vector<int>& subset,
                         const Eigen::VectorXd& state, const Eigen::VectorXd& gamma,
                         const FlowParams& p) {
    const QuadCache qc = make_quad_cache(m.element_coords(subset.front()));
    double acc = 0.0;
    for (int e : subset)
        acc += element_phi(qc, gather_state(m, e, state), gamma[e], p).value;
    return acc;
}

inline double subset_mean_speed(const Mesh& m, const std::vector<int>& subset,
                                const Eigen::VectorXd& state) {
    const QuadCache qc = make_quad_cache(m.element_coords(subset.front()));
    double acc = 0.0;
    for (int e : subset) acc += element_mean_speed(qc, gather_state(m, e, state));
    return acc / static_cast<double>(subset.size());
}

inline double weighted_sum(const std::vector<std::pair<int, double>>& w,
                           const Eigen::VectorXd& state) {
    double acc = 0.0;
    for (const auto& [dof, wk] : w) acc += wk * state[dof];
    return acc;
}

} // namespace detail

/// Deviation of the penalized (continuous) solution from the node-pinned
/// discrete reference: mean speeds where the truth is zero, and relative
/// errors of the fluid dissipation and the inlet-to-outlet pressure drop.
struct ErrorMeasures {
    double reynolds = 0.0;
    double darcy = 0.0;
    double eps_u_solid = 0.0;
    double eps_u_cavity = 0.0;
    double eps_phi = 0.0;
    double eps_dp = 0.0;
    bool converged = false;
};

inline ErrorMeasures measure_errors(const ObstacleChannel& geo, const FlowParams& p,
                                    const Eigen::VectorXd& s_cont,
                                    const Eigen::VectorXd& s_disc) {
    const Mesh& m = geo.mesh;
    const Eigen::VectorXd gamma = geo.design();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.num_elements());

    ErrorMeasures em;
    em.eps_u_solid = detail::subset_mean_speed(m, geo.solid, s_cont);
    em.eps_u_cavity = detail::subset_mean_speed(m, geo.cavity, s_cont);

    const double phi_disc = detail::subset_phi(m, geo.fluid, s_disc, ones, p);
    const double phi_cont = detail::subset_phi(m, geo.fluid, s_cont, gamma, p);
    em.eps_phi = std::abs(phi_disc - phi_cont) / phi_disc;

    const double dp_disc = detail::weighted_sum(geo.inlet_mean, s_disc) -
                           detail::weighted_sum(geo.outlet_mean, s_disc);
    const double dp_cont = detail::weighted_sum(geo.inlet_mean, s_cont) -
                           detail::weighted_sum(geo.outlet_mean, s_cont);
    em.eps_dp = std::abs(dp_disc - dp_cont) / dp_disc;
    return em;
}

/// Sweeps the penalty accuracy benchmark over the cross product of Reynolds
/// and Darcy numbers.  The discrete reference is solved once per Reynolds
/// number; continuous solves warm-start from the previous Darcy point.
/// Non-convergence marks the point and moves on.
inline std::vector<ErrorMeasures> brinkman_accuracy_study(
    const std::vector<double>& reynolds_list, const std::vector<double>& darcy_list,
    PenaltyScaling scaling = PenaltyScaling::porous,
    const ObstacleChannelConfig& cfg = {}, const NewtonConfig& newton = {}) {
    if (reynolds_list.empty() || darcy_list.empty())
        throw ConfigError("accuracy study: empty parameter list");
    const ObstacleChannel geo = make_obstacle_channel(cfg);
    std::vector<ErrorMeasures> out;
    out.reserve(reynolds_list.size() * darcy_list.size());
    for (double re : reynolds_list) {
        Eigen::VectorXd s_disc = Eigen::VectorXd::Zero(geo.mesh.num_dofs());
        const FlowParams p_ref = study_params(re, darcy_list.front(), scaling);
        const NewtonReport rep_disc = solve_obstacle_flow(geo, true, p_ref, s_disc, newton);

        Eigen::VectorXd s_cont = Eigen::VectorXd::Zero(geo.mesh.num_dofs());
        for (double da : darcy_list) {
            const FlowParams p = study_params(re, da, scaling);
            const NewtonReport rep_cont = solve_obstacle_flow(geo, false, p, s_cont, newton);
            ErrorMeasures em = measure_errors(geo, p, s_cont, s_disc);
            em.reynolds = re;
            em.darcy = da;
            em.converged = rep_disc.converged && rep_cont.converged;
            out.push_back(em);
        }
    }
    return out;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("slope fit needs matching lists of at least 2 points");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Convergence orders fitted from one Reynolds number's Darcy sweep.
struct SlopeSummary {
    double velocity_solid = 0.0;
    double velocity_cavity = 0.0;
    double dissipation = 0.0;
    double pressure_drop = 0.0;
    int velocity_points = 0;  ///< points in the velocity fit window
    int pressure_points = 0;  ///< points in the dissipation / pressure window
};

/// Fits convergence orders over the Darcy window where they are meaningful.
/// Two regimes are excluded:
///   - saturation (eps_u_solid > saturation_cut): the penalty is too weak to
///     seal the box, so the errors measure the leaking geometry rather than
///     the penalty strength;
///   - subgrid interface layers (darcy < h^2/4): once the layer width
///     sqrt(darcy) drops below half a cell the penalized operator converges
///     directly to the node-pinned reference on the same mesh, which turns
///     the dissipation and pressure-drop orders from 1/2 into 1.  Velocity
///     measures keep their order there, so only the derived-quantity fit
///     drops those points.
/// All points must share one Reynolds number; non-converged points are skipped.
inline SlopeSummary fit_error_slopes(const std::vector<ErrorMeasures>& pts, double h,
                                     double saturation_cut = 0.25) {
    std::vector<double> da_v, eus, euc, da_p, phi, dp;
    for (const ErrorMeasures& em : pts) {
        if (!em.converged || em.eps_u_solid > saturation_cut) continue;
        da_v.push_back(em.darcy);
        eus.push_back(em.eps_u_solid);
        euc.push_back(em.eps_u_cavity);
        if (em.darcy >= 0.25 * h * h) {
            da_p.push_back(em.darcy);
            phi.push_back(em.eps_phi);
            dp.push_back(em.eps_dp);
        }
    }
    if (da_v.size() < 2 || da_p.size() < 2)
        throw ConfigError("slope fit: fewer than 2 usable points in a window");
    SlopeSummary s;
    s.velocity_solid = loglog_slope(da_v, eus);
    s.velocity_cavity = loglog_slope(da_v, euc);
    s.dissipation = loglog_slope(da_p, phi);
    s.pressure_drop = loglog_slope(da_p, dp);
    s.velocity_points = static_cast<int>(da_v.size());
    s.pressure_points = static_cast<int>(da_p.size());
    return s;
}

/// Fraction of elements whose thresholded values differ between two designs.
inline double threshold_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                             double level = 0.5) {
    if (a.size() != b.size())
        throw ConfigError("threshold diff: design sizes differ");
    int diff = 0;
    for (int e = 0; e < a.size(); ++e)
        diff += (a[e] > level) != (b[e] > level);
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

/// One optimization per maximum penalty value, all starting from the same
/// initial penalty alpha_init so the initial flow field is identical across
/// the sweep (the continuation start q is derived from alpha_init each time).
struct SweepPoint {
    double alpha_max = 0.0;
    double objective = 0.0;
    Eigen::VectorXd design;
    bool converged = false;
};

inline std::vector<SweepPoint> alpha_max_sweep(ProblemDefinition prob,
                                               const std::vector<double>& alpha_max_list,
                                               RunControls ctl, double alpha_init,
                                               int continuation_steps = 4) {
    if (alpha_max_list.empty()) throw ConfigError("alpha_max sweep: empty list");
    std::vector<SweepPoint> out;
    out.reserve(alpha_max_list.size());
    for (double amax : alpha_max_list) {
        if (!(alpha_init < amax))
            throw ConfigError("alpha_max sweep: the fixed initial penalty must lie "
                              "below every alpha_max in the list");
        prob.params.alpha_max = amax;
        ctl.schedule = ContinuationSchedule::standard(
            q_init(alpha_init, amax, prob.params.alpha_min, prob.volfrac),
            continuation_steps);
        const OptimizationResult res = run_optimization(prob, ctl);
        out.push_back({amax, res.objective, res.design, res.converged});
    }
    return out;
}

/// Objective values of fixed designs re-analyzed under other flow conditions.
/// Rows follow the condition list, columns the design list; entries from
/// non-converged solves are flagged in ok.
struct CrossCheckTable {
    Eigen::MatrixXd values;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> ok;
};

inline CrossCheckTable cross_check(const ProblemDefinition& prob,
                                   const std::vector<Eigen::VectorXd>& designs,
                                   const std::vector<FlowParams>& conditions,
                                   const NewtonConfig& newton = {}) {
    if (designs.empty() || conditions.empty())
        throw ConfigError("cross check: empty designs or conditions");
    const int nc = static_cast<int>(conditions.size());
    const int nd = static_cast<int>(designs.size());
    CrossCheckTable table;
    table.values.setZero(nc, nd);
    table.ok.setConstant(nc, nd, false);
    Assembler assem(prob.mesh, prob.bc, {});
    LinearSolver solver;
    for (int j = 0; j < nd; ++j) {
        if (designs[j].size() != prob.mesh.num_elements())
            throw ConfigError("cross check: design size does not match the mesh");
        for (int i = 0; i < nc; ++i) {
            Eigen::VectorXd state = Eigen::VectorXd::Zero(prob.mesh.num_dofs());
            const NewtonReport rep =
                newton_solve(assem, solver, state, designs[j], conditions[i], newton);
            if (!rep.converged) continue;
            table.values(i, j) = detail::evaluate_functional(prob, assem, state,
                                                             designs[j], conditions[i],
                                                             prob.objective)
                                     .value;
            table.ok(i, j) = true;
        }
    }
    return table;
}

} // namespace flowtopo
