#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <numeric>
#include <vector>

#include "flowtopo/element_kernels.hpp"
#include "flowtopo/errors.hpp"
#include "flowtopo/mesh.hpp"

namespace flowtopo {

using SparseMat = Eigen::SparseMatrix<double>;

/// Prescribed values for a set of DOFs.  Duplicate DOFs are allowed only with
/// matching values.
struct DirichletBC {
    std::vector<int> dofs;     ///< sorted, unique
    Eigen::VectorXd values;    ///< aligned with dofs

    static DirichletBC from_pairs(std::vector<std::pair<int, double>> pairs) {
        std::sort(pairs.begin(), pairs.end());
        DirichletBC bc;
        std::vector<double> vals;
        for (const auto& [dof, val] : pairs) {
            if (!bc.dofs.empty() && bc.dofs.back() == dof) {
                if (vals.back() != val)
                    throw std::invalid_argument("bc: conflicting values for one DOF");
                continue;
            }
            bc.dofs.push_back(dof);
            vals.push_back(val);
        }
        bc.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<long>(vals.size()));
        return bc;
    }

    /// Write the prescribed values into a full-length state vector.
    void impose(Eigen::VectorXd& state) const {
        for (size_t k = 0; k < dofs.size(); ++k) state[dofs[k]] = values[k];
    }
};

/// Per-element design derivatives of the residual, row e holds dr_e/dgamma_e.
using DesignDerivs = Eigen::Matrix<double, Eigen::Dynamic, 12, Eigen::RowMajor>;

/// Assembles the global residual and tangent over a fixed element subset with
/// a precomputed sparsity pattern.  Rows and columns of prescribed DOFs are
/// identity with zero residual, so Newton increments and adjoint solutions
/// vanish there.
class Assembler {
public:
    Assembler(const Mesh& mesh, const DirichletBC& bc,
              DiscretizationOptions opt = {},
              std::vector<int> active_elements = {})
        : mesh_(mesh), bc_(bc), opt_(opt) {
        if (active_elements.empty()) {
            active_elements.resize(mesh.num_elements());
            std::iota(active_elements.begin(), active_elements.end(), 0);
        }
        elements_ = std::move(active_elements);
        qc_ = make_quad_cache(mesh.element_coords(elements_.front()), opt.stab_length);

        const int n = mesh.num_dofs();
        fixed_.assign(n, false);
        for (int d : bc_.dofs) fixed_[d] = true;

        edofs_.resize(elements_.size());
        for (size_t k = 0; k < elements_.size(); ++k)
            edofs_[k] = mesh.element_dofs(elements_[k]);

        build_pattern();
    }

    const Mesh& mesh() const { return mesh_; }
    const DirichletBC& bc() const { return bc_; }
    const std::vector<int>& elements() const { return elements_; }
    const QuadCache& quad_cache() const { return qc_; }
    const DiscretizationOptions& options() const { return opt_; }
    const SparseMat& matrix() const { return J_; }

    /// Residual with prescribed rows zeroed.
    Eigen::VectorXd residual(const Eigen::VectorXd& state, const Eigen::VectorXd& gamma,
                             const FlowParams& p) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(mesh_.num_dofs());
        Vector12 se;
        for (size_t k = 0; k < elements_.size(); ++k) {
            const auto& dofs = edofs_[k];
            for (int i = 0; i < 12; ++i) se[i] = state[dofs[i]];
            const Vector12 re = element_residual(qc_, se, gamma[elements_[k]], p, opt_);
            for (int i = 0; i < 12; ++i)
                if (!fixed_[dofs[i]]) r[dofs[i]] += re[i];
        }
        if (!r.allFinite()) throw SolverError("assembly produced non-finite residual");
        return r;
    }

    /// Tangent matrix and residual; optionally also the per-element design
    /// derivatives of the residual.
    void system(const Eigen::VectorXd& state, const Eigen::VectorXd& gamma,
                const FlowParams& p, Eigen::VectorXd& r, DesignDerivs* drdg = nullptr) {
        double* vals = J_.valuePtr();
        std::fill(vals, vals + J_.nonZeros(), 0.0);
        r.setZero(mesh_.num_dofs());
        if (drdg) drdg->setZero(mesh_.num_elements(), 12);

        Vector12 se;
        for (size_t k = 0; k < elements_.size(); ++k) {
            const auto& dofs = edofs_[k];
            for (int i = 0; i < 12; ++i) se[i] = state[dofs[i]];
            const ElementSystem es =
                element_system(qc_, se, gamma[elements_[k]], p, opt_);
            const int* slot = &slots_[k * 144];
            for (int i = 0; i < 12; ++i) {
                if (!fixed_[dofs[i]]) r[dofs[i]] += es.r[i];
                for (int j = 0; j < 12; ++j) {
                    const int sl = slot[12 * i + j];
                    if (sl >= 0) vals[sl] += es.J(i, j);
                }
            }
            if (drdg) drdg->row(elements_[k]) = es.drdg.transpose();
        }
        for (int sl : identity_slots_) vals[sl] = 1.0;
        if (!r.allFinite() ||
            !Eigen::Map<const Eigen::VectorXd>(vals, J_.nonZeros()).allFinite())
            throw SolverError("assembly produced non-finite system");
    }

    /// Design derivatives alone, for runs that reuse a factorized tangent.
    DesignDerivs design_derivs(const Eigen::VectorXd& state, const Eigen::VectorXd& gamma,
                               const FlowParams& p) const {
        DesignDerivs out = DesignDerivs::Zero(mesh_.num_elements(), 12);
        Vector12 se;
        for (size_t k = 0; k < elements_.size(); ++k) {
            const auto& dofs = edofs_[k];
            for (int i = 0; i < 12; ++i) se[i] = state[dofs[i]];
            out.row(elements_[k]) =
                element_residual_dgamma(qc_, se, gamma[elements_[k]], p, opt_).transpose();
        }
        return out;
    }

    bool is_fixed(int dof) const { return fixed_[dof]; }

private:
    void build_pattern() {
        const int n = mesh_.num_dofs();
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(elements_.size() * 144 + n);
        for (const auto& dofs : edofs_)
            for (int i = 0; i < 12; ++i) {
                if (fixed_[dofs[i]]) continue;
                for (int j = 0; j < 12; ++j)
                    if (!fixed_[dofs[j]]) trips.emplace_back(dofs[i], dofs[j], 1.0);
            }
        for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
        J_.resize(n, n);
        J_.setFromTriplets(trips.begin(), trips.end());
        J_.makeCompressed();

        slots_.assign(edofs_.size() * 144, -1);
        for (size_t k = 0; k < edofs_.size(); ++k) {
            const auto& dofs = edofs_[k];
            for (int i = 0; i < 12; ++i) {
                if (fixed_[dofs[i]]) continue;
                for (int j = 0; j < 12; ++j) {
                    if (fixed_[dofs[j]]) continue;
                    slots_[k * 144 + 12 * i + j] = slot_index(dofs[i], dofs[j]);
                }
            }
        }
        identity_slots_.clear();
        for (int i = 0; i < n; ++i) {
            bool touched = false;
            for (SparseMat::InnerIterator it(J_, i); it; ++it)
                if (it.row() != i) { touched = true; break; }
            if (fixed_[i] || !touched) identity_slots_.push_back(slot_index(i, i));
        }
    }

    int slot_index(int row, int col) const {
        const int* outer = J_.outerIndexPtr();
        const int* inner = J_.innerIndexPtr();
        const int* beg = inner + outer[col];
        const int* end = inner + outer[col + 1];
        const int* it = std::lower_bound(beg, end, row);
        if (it == end || *it != row) throw SolverError("pattern lookup failed");
        return static_cast<int>(it - inner);
    }

    const Mesh& mesh_;
    DirichletBC bc_;
    DiscretizationOptions opt_;
    std::vector<int> elements_;
    std::vector<std::array<int, 12>> edofs_;
    QuadCache qc_;
    std::vector<bool> fixed_;
    SparseMat J_;
    std::vector<int> slots_;
    std::vector<int> identity_slots_;
};

/// Direct sparse factorization with forward and transpose solves.  One
/// instance serves one sparsity pattern; the symbolic analysis is reused
/// across repeated factorizations.
class LinearSolver {
public:
    void factorize(const SparseMat& A) {
        if (!analyzed_) {
            lu_.analyzePattern(A);
            analyzed_ = true;
        }
        lu_.factorize(A);
        if (lu_.info() != Eigen::Success)
            throw SolverError("sparse factorization failed (singular system): " +
                              lu_.lastErrorMessage());
        factorized_ = true;
    }

    bool factorized() const { return factorized_; }

    template <typename Rhs>
    auto solve(const Rhs& b) const {
        auto x = lu_.solve(b).eval();
        if (!x.allFinite()) throw SolverError("linear solve produced non-finite values");
        return x;
    }

    template <typename Rhs>
    auto solve_transpose(const Rhs& b) {
        auto x = lu_.transpose().solve(b).eval();
        if (!x.allFinite()) throw SolverError("transpose solve produced non-finite values");
        return x;
    }

private:
    Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
    bool factorized_ = false;
};

} // namespace flowtopo
