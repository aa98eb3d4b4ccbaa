#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "flowtopo/adjoint.hpp"
#include "flowtopo/assembly.hpp"
#include "flowtopo/errors.hpp"
#include "flowtopo/flow_solver.hpp"
#include "flowtopo/functionals.hpp"
#include "flowtopo/mma.hpp"
#include "flowtopo/problems.hpp"

namespace flowtopo {

struct OcConfig {
    double mvlim = 0.2;
    double eta = 1.0 / 3.0;
    double ratio_floor = 1e-10;
    double voltol = 1e-6;
    int max_bisect = 200;
};

/// Optimality-criteria update on the active subset.  The multiplier bracket
/// upper bound follows from dropping the box clamps and solving the volume
/// equation in closed form, which overestimates the clamped multiplier.
inline Eigen::VectorXd oc_update(const Eigen::VectorXd& gamma,
                                 const Eigen::VectorXd& dobj,
                                 const Eigen::VectorXd& dvol,
                                 const std::vector<int>& active, double volfrac,
                                 const OcConfig& cfg = {}) {
    if (active.empty()) throw std::invalid_argument("oc_update: empty active set");
    const double n_act = static_cast<double>(active.size());

    double lbar_sum = 0.0;
    for (int e : active) {
        const double ratio = std::max(cfg.ratio_floor, -dobj[e] / dvol[e]);
        lbar_sum += gamma[e] * std::cbrt(ratio);
    }
    const double lbar = std::pow(lbar_sum / (n_act * volfrac), 3.0);

    auto candidate = [&](double l, Eigen::VectorXd& out) {
        out = gamma;
        double vol = 0.0;
        for (int e : active) {
            const double be = std::max(cfg.ratio_floor, -dobj[e] / (l * dvol[e]));
            double g = gamma[e] * std::pow(be, cfg.eta);
            g = std::min(g, std::min(1.0, gamma[e] + cfg.mvlim));
            g = std::max(g, std::max(0.0, gamma[e] - cfg.mvlim));
            out[e] = g;
            vol += g;
        }
        return vol / n_act;
    };

    double l1 = 0.0, l2 = lbar;
    Eigen::VectorXd gnew;
    double vol = candidate(l2, gnew);
    // Box clamps can push the root past the closed-form bound; widen until the
    // bracket holds or the lower move limits saturate.
    for (int grow = 0; vol > volfrac + cfg.voltol && grow < 60; ++grow) {
        l1 = l2;
        l2 *= 2.0;
        vol = candidate(l2, gnew);
    }
    if (vol > volfrac + cfg.voltol) return gnew; // lower clamps cap the reduction
    for (int it = 0; it < cfg.max_bisect; ++it) {
        const double lmid = 0.5 * (l1 + l2);
        if (!(lmid > 0.0)) break;
        vol = candidate(lmid, gnew);
        if (std::abs(vol - volfrac) <= cfg.voltol) return gnew;
        (vol > volfrac ? l1 : l2) = lmid;
        if (l2 - l1 <= 1e-15 * std::max(1.0, l2)) break;
    }
    candidate(l2, gnew); // feasible side of the final bracket
    return gnew;
}

struct IterationRecord {
    int iter = 0;
    double objective = 0.0; ///< raw functional value (sign as defined, not negated)
    double volume = 0.0;
    double change = 1.0;
    double q_alpha = 0.0;
    double greyscale = 0.0;
    int newton_iterations = 0;
    double seconds = 0.0;
    double mma_kkt = 0.0;
    std::vector<double> constraint_values;
    std::vector<double> newton_damping;
    std::vector<double> newton_full_residuals; ///< trial residuals at full step
    std::vector<double> newton_taken_residuals;
};

struct OptimizationResult {
    Eigen::VectorXd design;
    Eigen::VectorXd state;
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<IterationRecord> history;
};

struct RunControls {
    ContinuationSchedule schedule{{1.0}};
    int maxiter = 150;
    int conit = 50;
    double chlim = 1e-2;
    int chnum = 5;
    double mvlim = 0.2;
    double xinit = -1.0; ///< < 0 means start from the volume fraction
    NewtonConfig newton{};
    DiscretizationOptions discretization{};
    bool reuse_jacobian = false; ///< adjoint reuses the last Newton factorization
    Eigen::VectorXd init_design; ///< optional explicit starting field
    std::function<void(const std::string&)> log = [](const std::string& s) {
        std::fputs(s.c_str(), stdout);
        std::fputc('\n', stdout);
    };
    std::function<void(int, const Eigen::VectorXd&, const Eigen::VectorXd&)>
        on_checkpoint; ///< called with (step, design, state) when a step ends
};

inline std::string iteration_log_line(const IterationRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "It: %d Obj: %.4e Vol: %.3f ch: %.3e qa: %.2f Md: %.1f nl: %d",
                  r.iter, r.objective, r.volume, r.change, r.q_alpha, r.greyscale,
                  r.newton_iterations);
    return buf;
}

namespace detail {

/// Value and partials of one functional at the converged state.
inline FunctionalValue evaluate_functional(const ProblemDefinition& prob,
                                           Assembler& assem,
                                           const Eigen::VectorXd& state,
                                           const Eigen::VectorXd& gamma,
                                           const FlowParams& params,
                                           FunctionalKind kind) {
    switch (kind) {
    case FunctionalKind::dissipation:
        return dissipation_functional(assem, state, gamma, params);
    case FunctionalKind::volume:
        return volume_functional(gamma, prob.active);
    case FunctionalKind::point_velocity:
        return linear_state_functional(prob.mesh.num_dofs(), prob.objective_weights,
                                       state);
    case FunctionalKind::inlet_pressure:
        return linear_state_functional(prob.mesh.num_dofs(), prob.pressure_weights,
                                       state);
    case FunctionalKind::drag:
        return force_functional(assem, state, gamma, params, 0, 1.0);
    case FunctionalKind::lift:
        return force_functional(assem, state, gamma, params, 1, 1.0);
    }
    throw std::logic_error("unknown functional kind");
}

} // namespace detail

/// Solve the flow once on a fixed design (no optimization).
inline NewtonReport solve_flow(const ProblemDefinition& prob,
                               const Eigen::VectorXd& gamma, FlowParams params,
                               Eigen::VectorXd& state,
                               const NewtonConfig& newton = {},
                               const DiscretizationOptions& options = {}) {
    Assembler assem(prob.mesh, prob.bc, options);
    LinearSolver solver;
    return newton_solve(assem, solver, state, gamma, params, newton);
}

/// Density-based optimization with penalty continuation.  Each outer iteration
/// solves the flow, evaluates objective and constraints, logs, checks the step
/// termination rule, then updates the design through the adjoint gradient and
/// the chosen optimizer.  The penalty parameter advances when a step settles.
inline OptimizationResult run_optimization(const ProblemDefinition& prob,
                                           const RunControls& ctl) {
    if (ctl.maxiter < 1 || ctl.conit < 1 || ctl.chnum < 1)
        throw ConfigError("iteration limits must be positive");
    if (prob.constraints.empty())
        throw ConfigError("optimization needs at least one constraint");
    if (prob.optimizer == OptimizerKind::oc &&
        (prob.constraints.size() != 1 ||
         prob.constraints[0].kind != FunctionalKind::volume))
        throw ConfigError("the OC update only handles a single volume constraint");

    const Mesh& mesh = prob.mesh;
    FlowParams params = prob.params;
    const auto& qs = ctl.schedule.q_values;
    if (qs.empty()) throw ConfigError("empty continuation schedule");

    Eigen::VectorXd gamma;
    if (ctl.init_design.size() > 0) {
        if (ctl.init_design.size() != mesh.num_elements())
            throw ConfigError("initial design size does not match the mesh");
        gamma = ctl.init_design.cwiseMax(0.0).cwiseMin(1.0);
        prob.apply_passive(gamma);
    } else {
        gamma = prob.initial_design(ctl.xinit >= 0.0 ? ctl.xinit : prob.volfrac);
    }

    Assembler assem(mesh, prob.bc, ctl.discretization);
    LinearSolver solver;
    Eigen::VectorXd state = Eigen::VectorXd::Zero(mesh.num_dofs());

    const int n_active = static_cast<int>(prob.active.size());
    const int m_con = static_cast<int>(prob.constraints.size());
    Mma mma(n_active, std::max(m_con, 1));
    const Eigen::VectorXd xmin = Eigen::VectorXd::Zero(n_active);
    const Eigen::VectorXd xmax = Eigen::VectorXd::Ones(n_active);

    OptimizationResult result;
    double prev_obj = 0.0;
    double obj_scale = 1.0;
    int step = 0, it_in_step = 0, chcnt = 0;
    params.q_alpha = qs[0];

    for (int loop = 1; loop <= ctl.maxiter; ++loop) {
        const auto t0 = std::chrono::steady_clock::now();
        ++it_in_step;

        NewtonReport rep = newton_solve(assem, solver, state, gamma, params, ctl.newton);
        if (!rep.converged)
            throw SolverError(
                "flow solve did not converge at iteration " + std::to_string(loop) +
                " (residual " + std::to_string(rep.final_residual) +
                "); consider ramping the inlet velocity, loosening nltol, or "
                "increasing nlmax");

        FunctionalValue obj = detail::evaluate_functional(prob, assem, state, gamma,
                                                          params, prob.objective);
        std::vector<FunctionalValue> cons(m_con);
        for (int i = 0; i < m_con; ++i)
            cons[i] = detail::evaluate_functional(prob, assem, state, gamma, params,
                                                  prob.constraints[i].kind);

        const double f = prob.objective_sign * obj.value;
        IterationRecord rec;
        rec.iter = loop;
        rec.objective = obj.value;
        rec.volume = volume_functional(gamma, prob.active).value;
        rec.change = loop == 1 ? 1.0
                               : std::abs(f - prev_obj) /
                                     std::max(std::abs(f), 1e-300);
        rec.q_alpha = params.q_alpha;
        rec.greyscale = greyscale_measure(gamma, prob.active);
        rec.newton_iterations = rep.iterations;
        rec.newton_damping = rep.damping;
        rec.newton_full_residuals = rep.full_step_residuals;
        rec.newton_taken_residuals = rep.step_residuals;
        for (const auto& cv : cons) rec.constraint_values.push_back(cv.value);
        prev_obj = f;

        chcnt = rec.change < ctl.chlim ? chcnt + 1 : 0;
        const bool step_done = chcnt >= ctl.chnum || it_in_step >= ctl.conit;
        const bool last_step = step == static_cast<int>(qs.size()) - 1;
        const bool stop = (last_step && step_done) || loop == ctl.maxiter;

        if (!stop) {
            // Gradients by one transpose solve per state-dependent functional.
            DesignDerivs drdg;
            Eigen::VectorXd r_now;
            if (ctl.reuse_jacobian && solver.factorized()) {
                drdg = assem.design_derivs(state, gamma, params);
            } else {
                assem.system(state, gamma, params, r_now, &drdg);
                solver.factorize(assem.matrix());
            }

            std::vector<Eigen::VectorXd> grads(1 + m_con);
            Eigen::VectorXd lambda;
            auto gradient_of = [&](const FunctionalValue& fv) {
                if (fv.dstate.size() == 0)
                    return total_design_gradient(assem, drdg, fv, Eigen::VectorXd(),
                                                 prob.passive_solid,
                                                 prob.passive_fluid);
                Eigen::VectorXd rhs = fv.dstate;
                lambda = solve_adjoint(solver, assem, rhs);
                return total_design_gradient(assem, drdg, fv, lambda,
                                             prob.passive_solid, prob.passive_fluid);
            };
            grads[0] = prob.objective_sign * gradient_of(obj);
            for (int i = 0; i < m_con; ++i) grads[1 + i] = gradient_of(cons[i]);

            if (prob.optimizer == OptimizerKind::oc) {
                gamma = oc_update(gamma, grads[0], grads[1], prob.active,
                                  prob.constraints[0].bound,
                                  OcConfig{.mvlim = ctl.mvlim});
            } else {
                if (loop == 1) {
                    const bool magnitude_scaled =
                        prob.objective == FunctionalKind::point_velocity ||
                        prob.objective == FunctionalKind::lift;
                    obj_scale = magnitude_scaled ? std::abs(f) : f / 10.0;
                    if (!(std::abs(obj_scale) > 1e-12)) obj_scale = 1.0;
                }
                Eigen::VectorXd x(n_active), df0(n_active);
                Eigen::MatrixXd dfi(m_con, n_active);
                Eigen::VectorXd fi(m_con);
                for (int k = 0; k < n_active; ++k) {
                    const int e = prob.active[k];
                    x[k] = gamma[e];
                    df0[k] = grads[0][e] / obj_scale;
                }
                for (int i = 0; i < m_con; ++i) {
                    const double bound = prob.constraints[i].bound;
                    fi[i] = cons[i].value / bound - 1.0;
                    for (int k = 0; k < n_active; ++k)
                        dfi(i, k) = grads[1 + i][prob.active[k]] / bound;
                }
                const Eigen::VectorXd xlo =
                    (x.array() - ctl.mvlim).max(xmin.array()).matrix();
                const Eigen::VectorXd xhi =
                    (x.array() + ctl.mvlim).min(xmax.array()).matrix();
                MmaResult mr = mma.update(x, xlo, xhi, f / obj_scale, df0, fi, dfi);
                rec.mma_kkt = mr.kkt_residual;
                for (int k = 0; k < n_active; ++k) gamma[prob.active[k]] = mr.x[k];
                prob.apply_passive(gamma);
            }
        }

        rec.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        if (ctl.log) ctl.log(iteration_log_line(rec));
        result.history.push_back(rec);
        result.iterations = loop;

        if (stop) {
            result.converged = last_step && chcnt >= ctl.chnum;
            break;
        }
        if (step_done && !last_step) {
            if (ctl.on_checkpoint) ctl.on_checkpoint(step, gamma, state);
            ++step;
            params.q_alpha = qs[step];
            chcnt = 0;
            it_in_step = 0;
        }
    }

    result.design = gamma;
    result.state = state;
    result.objective = result.history.empty() ? 0.0 : result.history.back().objective;
    return result;
}

} // namespace flowtopo
