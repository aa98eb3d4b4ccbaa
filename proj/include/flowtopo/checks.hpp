#pragma once

#include <vector>

#include "flowtopo/optimizers.hpp"

namespace flowtopo {

/// Worst column of the assembled Jacobian against central differences of the
/// residual.  Columns of prescribed DOFs must be exact identity; free columns
/// are compared on free rows with the error scaled by max(1, |column|).
struct JacobianCheckResult {
    double max_rel_error = 0.0;
    int columns_checked = 0;
};

inline JacobianCheckResult check_jacobian(const Mesh& mesh, const DirichletBC& bc,
                                          const Eigen::VectorXd& state,
                                          const Eigen::VectorXd& gamma,
                                          const FlowParams& params,
                                          int max_columns = 0, double step = 1e-7,
                                          const DiscretizationOptions& opts = {}) {
    Assembler assem(mesh, bc, opts);
    Eigen::VectorXd r;
    assem.system(state, gamma, params, r);
    const auto& J = assem.matrix();

    const int n = mesh.num_dofs();
    const int count = (max_columns <= 0 || max_columns > n) ? n : max_columns;
    const double stride = static_cast<double>(n) / count;

    JacobianCheckResult out;
    out.columns_checked = count;
    for (int k = 0; k < count; ++k) {
        const int j = static_cast<int>(k * stride);
        Eigen::VectorXd jc = J.col(j);
        if (assem.is_fixed(j)) {
            jc[j] -= 1.0;
            out.max_rel_error = std::max(out.max_rel_error, jc.cwiseAbs().maxCoeff());
            continue;
        }
        Eigen::VectorXd sp = state, sm = state;
        sp[j] += step;
        sm[j] -= step;
        Eigen::VectorXd col =
            (assem.residual(sp, gamma, params) - assem.residual(sm, gamma, params)) /
            (2.0 * step);
        for (int d : bc.dofs) {
            jc[d] = 0.0; // fixed rows carry identity, not physics
            col[d] = 0.0;
        }
        const double denom = std::max(1.0, col.norm());
        out.max_rel_error = std::max(out.max_rel_error, (jc - col).norm() / denom);
    }
    return out;
}

/// Adjoint design gradient of one functional against central differences of
/// the full solve-then-evaluate map.  Each probe re-solves the flow from the
/// converged base state.  The per-element error is scaled by the difference
/// quotient magnitude with a floor tied to the largest gradient entry, so
/// elements the functional barely sees do not dominate the statistics.
struct GradientCheckResult {
    int elements_checked = 0;
    double worst_rel = 0.0;
    double frac_within = 1.0; ///< share of probes with error <= rel_each
    double value = 0.0;       ///< functional at the base design (zero flow shows here)
    Eigen::VectorXd analytic; ///< adjoint gradient on every element
};

inline GradientCheckResult check_gradient(const ProblemDefinition& prob,
                                          const Eigen::VectorXd& gamma0,
                                          FunctionalKind kind,
                                          const NewtonConfig& newton = {},
                                          double dgamma = 1e-6, double rel_each = 1e-3,
                                          std::vector<int> elements = {},
                                          const DiscretizationOptions& opts = {}) {
    Assembler assem(prob.mesh, prob.bc, opts);
    LinearSolver solver;
    const FlowParams& params = prob.params;
    Eigen::VectorXd state = Eigen::VectorXd::Zero(prob.mesh.num_dofs());
    if (!newton_solve(assem, solver, state, gamma0, params, newton).converged)
        throw SolverError("gradient check: base flow solve did not converge");

    Eigen::VectorXd r;
    DesignDerivs drdg;
    assem.system(state, gamma0, params, r, &drdg);
    solver.factorize(assem.matrix());
    const FunctionalValue fv =
        detail::evaluate_functional(prob, assem, state, gamma0, params, kind);

    GradientCheckResult out;
    out.value = fv.value;
    if (fv.dstate.size() == 0) {
        out.analytic = total_design_gradient(assem, drdg, fv, Eigen::VectorXd(),
                                             prob.passive_solid, prob.passive_fluid);
    } else {
        Eigen::VectorXd rhs = fv.dstate;
        const Eigen::VectorXd lambda = solve_adjoint(solver, assem, rhs);
        out.analytic = total_design_gradient(assem, drdg, fv, lambda,
                                             prob.passive_solid, prob.passive_fluid);
    }

    if (elements.empty()) elements = prob.active;
    out.elements_checked = static_cast<int>(elements.size());
    double gmax = 0.0;
    for (int e : elements) gmax = std::max(gmax, std::abs(out.analytic[e]));
    const double floor = std::max(1e-300, 1e-6 * gmax);

    int within = 0;
    for (int e : elements) {
        Eigen::VectorXd g = gamma0;
        Eigen::VectorXd sp = state, sm = state;
        g[e] = gamma0[e] + dgamma;
        if (!newton_solve(assem, solver, sp, g, params, newton).converged)
            throw SolverError("gradient check: forward probe did not converge");
        const double fp =
            detail::evaluate_functional(prob, assem, sp, g, params, kind).value;
        g[e] = gamma0[e] - dgamma;
        if (!newton_solve(assem, solver, sm, g, params, newton).converged)
            throw SolverError("gradient check: backward probe did not converge");
        const double fm =
            detail::evaluate_functional(prob, assem, sm, g, params, kind).value;
        const double fd = (fp - fm) / (2.0 * dgamma);
        const double rel = std::abs(fd - out.analytic[e]) / std::max(std::abs(fd), floor);
        out.worst_rel = std::max(out.worst_rel, rel);
        if (rel <= rel_each) ++within;
    }
    if (out.elements_checked > 0)
        out.frac_within = static_cast<double>(within) / out.elements_checked;
    return out;
}

/// Evenly strided subset of the active elements, for sampled gradient checks
/// on meshes too large to probe exhaustively.
inline std::vector<int> sample_elements(const std::vector<int>& active, int count) {
    if (count <= 0 || count >= static_cast<int>(active.size())) return active;
    std::vector<int> out;
    out.reserve(count);
    const double stride = static_cast<double>(active.size()) / count;
    for (int k = 0; k < count; ++k)
        out.push_back(active[static_cast<int>(k * stride)]);
    return out;
}

} // namespace flowtopo
