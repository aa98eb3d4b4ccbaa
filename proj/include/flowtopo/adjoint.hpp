#pragma once

#include "flowtopo/assembly.hpp"
#include "flowtopo/functionals.hpp"

namespace flowtopo {

/// Solve the transposed tangent system for one adjoint field per column of
/// rhs.  Entries at prescribed DOFs are zeroed first, so the returned fields
/// vanish there and the reduced adjoint equations are recovered exactly.
inline Eigen::MatrixXd solve_adjoint(LinearSolver& solver, const Assembler& asm_,
                                     Eigen::MatrixXd rhs) {
    for (int d : asm_.bc().dofs) rhs.row(d).setZero();
    return solver.solve_transpose(rhs);
}

/// Total design gradient df/dgamma = explicit partial - lambda^T dr/dgamma,
/// evaluated per element and zeroed on passive elements.  An empty lambda
/// means the functional does not depend on the state.
inline Eigen::VectorXd total_design_gradient(const Assembler& asm_,
                                             const DesignDerivs& drdg,
                                             const FunctionalValue& f,
                                             const Eigen::VectorXd& lambda,
                                             const std::vector<int>& passive_solid = {},
                                             const std::vector<int>& passive_fluid = {}) {
    const Mesh& mesh = asm_.mesh();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(mesh.num_elements());
    if (f.ddesign.size() > 0) g = f.ddesign;
    if (lambda.size() > 0) {
        for (int e : asm_.elements()) {
            const auto dofs = mesh.element_dofs(e);
            double acc = 0.0;
            for (int i = 0; i < 12; ++i) acc += lambda[dofs[i]] * drdg(e, i);
            g[e] -= acc;
        }
    }
    for (int e : passive_solid) g[e] = 0.0;
    for (int e : passive_fluid) g[e] = 0.0;
    return g;
}

} // namespace flowtopo
