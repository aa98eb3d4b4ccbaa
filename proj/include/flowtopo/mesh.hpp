#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowtopo {

/// Structured rectangular grid of bilinear quads with equal-order
/// velocity/pressure nodes.
///
/// Conventions: the origin sits at the top-left corner, x runs right and y
/// runs down.  Nodes and elements are numbered top-to-bottom, then
/// left-to-right (column-major).  All indices are 0-based.  Each node carries
/// two velocity DOFs (2n, 2n+1) followed by one pressure DOF (2*nodtot + n)
/// in the global vector.
class Mesh {
public:
    Mesh(int nelx, int nely, double Lx, double Ly)
        : nelx_(nelx), nely_(nely), Lx_(Lx), Ly_(Ly) {
        if (nelx < 1 || nely < 1)
            throw std::invalid_argument("mesh: element counts must be positive");
        if (!(Lx > 0.0) || !(Ly > 0.0))
            throw std::invalid_argument("mesh: domain lengths must be positive");
        nodx_ = nelx_ + 1;
        nody_ = nely_ + 1;
        dx_ = Lx_ / nelx_;
        dy_ = Ly_ / nely_;
    }

    int nelx() const { return nelx_; }
    int nely() const { return nely_; }
    double Lx() const { return Lx_; }
    double Ly() const { return Ly_; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }
    int nodx() const { return nodx_; }
    int nody() const { return nody_; }
    int num_nodes() const { return nodx_ * nody_; }
    int num_elements() const { return nelx_ * nely_; }
    int num_dofs() const { return 3 * num_nodes(); }
    int num_velocity_dofs() const { return 2 * num_nodes(); }

    /// Element size used by the stabilization parameter.
    double stab_h_geometric() const { return std::sqrt(dx_ * dy_); }
    double stab_h_diagonal() const { return std::sqrt(dx_ * dx_ + dy_ * dy_); }

    int node_index(int col, int row) const {
        check(col >= 0 && col < nodx_ && row >= 0 && row < nody_, "node grid index");
        return col * nody_ + row;
    }
    int node_col(int n) const { check_node(n); return n / nody_; }
    int node_row(int n) const { check_node(n); return n % nody_; }
    double node_x(int n) const { return node_col(n) * dx_; }
    double node_y(int n) const { return node_row(n) * dy_; }

    int element_index(int col, int row) const {
        check(col >= 0 && col < nelx_ && row >= 0 && row < nely_, "element grid index");
        return col * nely_ + row;
    }
    int element_col(int e) const { check_element(e); return e / nely_; }
    int element_row(int e) const { check_element(e); return e % nely_; }
    double element_center_x(int e) const { return (element_col(e) + 0.5) * dx_; }
    double element_center_y(int e) const { return (element_row(e) + 0.5) * dy_; }

    /// Corner nodes in local order: bottom-left, bottom-right, top-right,
    /// top-left.  With y pointing down this traverses the quad
    /// counter-clockwise on paper.
    std::array<int, 4> element_nodes(int e) const {
        const int i = element_col(e);
        const int j = element_row(e);
        return {node_index(i, j + 1), node_index(i + 1, j + 1),
                node_index(i + 1, j), node_index(i, j)};
    }

    /// Corner coordinates (x, y) in the same local order as element_nodes.
    std::array<std::array<double, 2>, 4> element_coords(int e) const {
        std::array<std::array<double, 2>, 4> c{};
        const auto nodes = element_nodes(e);
        for (int a = 0; a < 4; ++a)
            c[a] = {node_x(nodes[a]), node_y(nodes[a])};
        return c;
    }

    int u1_dof(int n) const { check_node(n); return 2 * n; }
    int u2_dof(int n) const { check_node(n); return 2 * n + 1; }
    int p_dof(int n) const { check_node(n); return 2 * num_nodes() + n; }

    /// Global DOFs of an element: 8 velocity DOFs in local-node order, then
    /// 4 pressure DOFs in local-node order.
    std::array<int, 12> element_dofs(int e) const {
        const auto nodes = element_nodes(e);
        std::array<int, 12> dofs{};
        for (int a = 0; a < 4; ++a) {
            dofs[2 * a] = u1_dof(nodes[a]);
            dofs[2 * a + 1] = u2_dof(nodes[a]);
            dofs[8 + a] = p_dof(nodes[a]);
        }
        return dofs;
    }

    /// Node closest to (x, y); ties resolve toward smaller indices.
    int nearest_node(double x, double y) const {
        const int col = clamp_int(static_cast<int>(std::lround(x / dx_)), 0, nodx_ - 1);
        const int row = clamp_int(static_cast<int>(std::lround(y / dy_)), 0, nody_ - 1);
        return node_index(col, row);
    }

    /// Element containing (x, y); points on shared edges go to the lower index.
    int element_at(double x, double y) const {
        const int col = clamp_int(static_cast<int>(std::floor(x / dx_)), 0, nelx_ - 1);
        const int row = clamp_int(static_cast<int>(std::floor(y / dy_)), 0, nely_ - 1);
        return element_index(col, row);
    }

    /// Nodes along the four domain edges, ordered by increasing coordinate.
    std::vector<int> left_edge_nodes() const { return column_nodes(0); }
    std::vector<int> right_edge_nodes() const { return column_nodes(nodx_ - 1); }
    std::vector<int> top_edge_nodes() const { return row_nodes(0); }
    std::vector<int> bottom_edge_nodes() const { return row_nodes(nody_ - 1); }

    std::vector<int> boundary_nodes() const {
        std::vector<int> out;
        out.reserve(2 * nodx_ + 2 * nody_);
        for (int n = 0; n < num_nodes(); ++n) {
            const int i = n / nody_;
            const int j = n % nody_;
            if (i == 0 || i == nodx_ - 1 || j == 0 || j == nody_ - 1) out.push_back(n);
        }
        return out;
    }

private:
    static int clamp_int(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
    void check(bool ok, const char* what) const {
        if (!ok) throw std::out_of_range(std::string("mesh: ") + what + " out of range");
    }
    void check_node(int n) const { check(n >= 0 && n < num_nodes(), "node index"); }
    void check_element(int e) const { check(e >= 0 && e < num_elements(), "element index"); }

    std::vector<int> column_nodes(int col) const {
        std::vector<int> out(nody_);
        for (int j = 0; j < nody_; ++j) out[j] = node_index(col, j);
        return out;
    }
    std::vector<int> row_nodes(int row) const {
        std::vector<int> out(nodx_);
        for (int i = 0; i < nodx_; ++i) out[i] = node_index(i, row);
        return out;
    }

    int nelx_, nely_;
    double Lx_, Ly_;
    int nodx_ = 0, nody_ = 0;
    double dx_ = 0.0, dy_ = 0.0;
};

} // namespace flowtopo
