#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "flowtopo/assembly.hpp"

namespace flowtopo {

struct NewtonConfig {
    double tol = 1e-6;   ///< required drop of the residual norm relative to entry
    int max_iter = 25;
    bool restart_from_zero = true; ///< retry once from a fresh state on stall
    bool verbose = false;
};

struct NewtonReport {
    bool converged = false;
    int iterations = 0; ///< tangent factorizations performed
    bool restarted = false;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    std::vector<double> residual_norms; ///< entry norm followed by per-iteration norms
    std::vector<double> damping;
    std::vector<double> full_step_residuals; ///< trial norm at delta = 1, per iteration
    std::vector<double> step_residuals;      ///< accepted norm, aligned with damping
};

/// Step length from a three-point quadratic fit of the residual norm along the
/// Newton direction, clamped to [0.01, 1].  A vanishing fit numerator lands on
/// the lower clamp; a linear profile (vanishing curvature) takes a full step.
inline double damping_factor(double r0, double r_half, double r_full) {
    const double num = 3.0 * r0 - 4.0 * r_half + r_full;
    const double den = 4.0 * r0 - 8.0 * r_half + 4.0 * r_full;
    if (std::abs(num) < 1e-14 * r0) return 0.01;
    if (std::abs(den) < 1e-14 * r0) return 1.0;
    return std::fmax(0.01, std::fmin(1.0, num / den));
}

inline std::string newton_log_line(int it, double norm, double rel, double delta) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  nl: %d res: %.3e rel: %.3e delta: %.2f", it,
                  norm, rel, delta);
    return buf;
}

namespace detail {

inline bool newton_sweep(Assembler& asm_, LinearSolver& solver, Eigen::VectorXd& state,
                         const Eigen::VectorXd& gamma, const FlowParams& p,
                         const NewtonConfig& cfg, NewtonReport& rep) {
    asm_.bc().impose(state);
    Eigen::VectorXd r = asm_.residual(state, gamma, p);
    double norm0 = r.norm();
    rep.residual_norms.push_back(norm0);
    if (norm0 < 1e-30) return true;

    Eigen::VectorXd r_sys, trial;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        asm_.system(state, gamma, p, r_sys);
        solver.factorize(asm_.matrix());
        const Eigen::VectorXd step = solver.solve((-r_sys).eval());
        ++rep.iterations;

        const double rn0 = r_sys.norm();
        trial = state + 0.5 * step;
        const double rn_half = asm_.residual(trial, gamma, p).norm();
        trial = state + step;
        const double rn_full = asm_.residual(trial, gamma, p).norm();
        const double delta = damping_factor(rn0, rn_half, rn_full);
        state += delta * step;

        double rn;
        if (delta == 1.0) rn = rn_full;
        else if (delta == 0.5) rn = rn_half;
        else rn = asm_.residual(state, gamma, p).norm();

        rep.residual_norms.push_back(rn);
        rep.damping.push_back(delta);
        rep.full_step_residuals.push_back(rn_full);
        rep.step_residuals.push_back(rn);
        if (cfg.verbose)
            std::puts(newton_log_line(it, rn, rn / norm0, delta).c_str());
        if (rn / norm0 < cfg.tol) return true;
    }
    return false;
}

} // namespace detail

/// Damped Newton solve of the discrete flow equations.  The state is used as
/// the initial guess (warm start); prescribed values are imposed before
/// evaluating.  On stagnation the solve restarts once from a zero state with
/// boundary values.  Non-convergence is reported, not thrown; callers decide
/// how to proceed (a common remedy is ramping the inlet velocity).
inline NewtonReport newton_solve(Assembler& asm_, LinearSolver& solver,
                                 Eigen::VectorXd& state, const Eigen::VectorXd& gamma,
                                 const FlowParams& p, const NewtonConfig& cfg = {}) {
    p.validate();
    NewtonReport rep;
    rep.converged = detail::newton_sweep(asm_, solver, state, gamma, p, cfg, rep);
    if (!rep.converged && cfg.restart_from_zero) {
        rep.restarted = true;
        state.setZero();
        rep.converged = detail::newton_sweep(asm_, solver, state, gamma, p, cfg, rep);
    }
    rep.initial_residual = rep.residual_norms.front();
    rep.final_residual = rep.residual_norms.back();
    return rep;
}

} // namespace flowtopo
