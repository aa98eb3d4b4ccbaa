#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowtopo/dual.hpp"
#include "flowtopo/interpolation.hpp"

namespace flowtopo {

/// Which operator weights the momentum residual in the streamline
/// stabilization term.  `gradu` contracts the test function with the velocity
/// gradient; `streamline` applies the conventional upwind operator (u . grad)
/// to the test function.
enum class SupgTest { gradu, streamline };

/// Element length entering the stabilization parameter.
enum class StabLength { geometric, diagonal };

struct DiscretizationOptions {
    SupgTest supg_test = SupgTest::gradu;
    StabLength stab_length = StabLength::geometric;
};

/// Stabilization parameter and its three contributions.  Unused limits are
/// reported as infinity.
struct StabilizationTau {
    double tau1; ///< convective limit h / (2 |u|)
    double tau3; ///< diffusive limit rho h^2 / (12 mu)
    double tau4; ///< reactive limit rho / alpha
    double tau;  ///< combined inverse-square blend
};

inline StabilizationTau stabilization_tau(double u1, double u2, double alpha,
                                          const FlowParams& p, double h) {
    if (!(h > 0.0)) throw std::domain_error("tau: element length must be positive");
    const double inf = std::numeric_limits<double>::infinity();
    const double unorm = std::sqrt(u1 * u1 + u2 * u2);
    StabilizationTau t{};
    t.tau1 = unorm > 0.0 ? h / (2.0 * unorm) : inf;
    t.tau3 = p.rho * h * h / (12.0 * p.mu);
    t.tau4 = alpha > 0.0 ? p.rho / alpha : inf;
    const double invsq = 4.0 * (u1 * u1 + u2 * u2) / (h * h) +
                         1.0 / (t.tau3 * t.tau3) +
                         (alpha / p.rho) * (alpha / p.rho);
    t.tau = 1.0 / std::sqrt(invsq);
    return t;
}

/// Shape data of one bilinear quad at the 2x2 Gauss points, precomputed from
/// the corner coordinates.  All elements of a structured mesh share one
/// instance.
struct QuadCache {
    struct Point {
        std::array<double, 4> N;
        std::array<double, 4> dNdx;
        std::array<double, 4> dNdy;
        double wdet; ///< quadrature weight times |det J|
    };
    std::array<Point, 4> pts;
    double h = 0.0;    ///< stabilization length
    double area = 0.0;
};

/// Corner coordinates in local order: bottom-left, bottom-right, top-right,
/// top-left (y pointing down).
using ElementCoords = std::array<std::array<double, 2>, 4>;

inline QuadCache make_quad_cache(const ElementCoords& xy,
                                 StabLength mode = StabLength::geometric) {
    // Reference corners matching the local node order.
    static constexpr double xi_n[4] = {-1.0, 1.0, 1.0, -1.0};
    static constexpr double eta_n[4] = {-1.0, -1.0, 1.0, 1.0};
    static const double g = 1.0 / std::sqrt(3.0);
    static constexpr double gp[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};

    QuadCache qc;
    for (int q = 0; q < 4; ++q) {
        const double xi = g * gp[q][0];
        const double eta = g * gp[q][1];
        std::array<double, 4> N, dNdxi, dNdeta;
        for (int a = 0; a < 4; ++a) {
            N[a] = 0.25 * (1.0 + xi_n[a] * xi) * (1.0 + eta_n[a] * eta);
            dNdxi[a] = 0.25 * xi_n[a] * (1.0 + eta_n[a] * eta);
            dNdeta[a] = 0.25 * eta_n[a] * (1.0 + xi_n[a] * xi);
        }
        double J11 = 0, J12 = 0, J21 = 0, J22 = 0; // d(x,y)/d(xi,eta)
        for (int a = 0; a < 4; ++a) {
            J11 += dNdxi[a] * xy[a][0];
            J12 += dNdxi[a] * xy[a][1];
            J21 += dNdeta[a] * xy[a][0];
            J22 += dNdeta[a] * xy[a][1];
        }
        const double det = J11 * J22 - J12 * J21;
        if (!(std::abs(det) > 1e-14))
            throw std::domain_error("element: degenerate geometry");
        const double inv = 1.0 / det;
        auto& pt = qc.pts[q];
        pt.N = N;
        for (int a = 0; a < 4; ++a) {
            pt.dNdx[a] = (J22 * dNdxi[a] - J12 * dNdeta[a]) * inv;
            pt.dNdy[a] = (-J21 * dNdxi[a] + J11 * dNdeta[a]) * inv;
        }
        pt.wdet = std::abs(det); // unit quadrature weights
        qc.area += pt.wdet;
    }
    const double ex = std::hypot(xy[1][0] - xy[0][0], xy[1][1] - xy[0][1]);
    const double ey = std::hypot(xy[0][0] - xy[3][0], xy[0][1] - xy[3][1]);
    qc.h = mode == StabLength::geometric ? std::sqrt(qc.area)
                                         : std::sqrt(ex * ex + ey * ey);
    return qc;
}

namespace detail {

/// Momentum and continuity residual of one element.  Scalar is double for
/// plain evaluation or a Dual type carrying state/design directions.  The
/// state s holds 8 velocity DOFs then 4 pressure DOFs in local-node order.
template <typename Scalar>
void element_residual_core(const QuadCache& qc, const Scalar* s, const Scalar& alpha,
                           const FlowParams& p, const DiscretizationOptions& opt,
                           Scalar* r) {
    for (int i = 0; i < 12; ++i) r[i] = Scalar(0.0);

    // Centroid velocity drives the convective part of tau.
    Scalar uc1(0.0), uc2(0.0);
    for (int a = 0; a < 4; ++a) {
        uc1 += s[2 * a] * 0.25;
        uc2 += s[2 * a + 1] * 0.25;
    }
    const double h = qc.h;
    const double tau3_inv = 12.0 * p.mu / (p.rho * h * h);
    const Scalar invsq = (uc1 * uc1 + uc2 * uc2) * (4.0 / (h * h)) +
                         tau3_inv * tau3_inv + (alpha / p.rho) * (alpha / p.rho);
    const Scalar tau = 1.0 / sqrt(invsq);
    const Scalar tau_over_rho = tau / p.rho;

    for (const auto& pt : qc.pts) {
        Scalar u1(0.0), u2(0.0), pr(0.0);
        Scalar du1dx(0.0), du1dy(0.0), du2dx(0.0), du2dy(0.0);
        Scalar dpdx(0.0), dpdy(0.0);
        for (int a = 0; a < 4; ++a) {
            u1 += s[2 * a] * pt.N[a];
            u2 += s[2 * a + 1] * pt.N[a];
            pr += s[8 + a] * pt.N[a];
            du1dx += s[2 * a] * pt.dNdx[a];
            du1dy += s[2 * a] * pt.dNdy[a];
            du2dx += s[2 * a + 1] * pt.dNdx[a];
            du2dy += s[2 * a + 1] * pt.dNdy[a];
            dpdx += s[8 + a] * pt.dNdx[a];
            dpdy += s[8 + a] * pt.dNdy[a];
        }

        const Scalar conv1 = u1 * du1dx + u2 * du1dy;
        const Scalar conv2 = u1 * du2dx + u2 * du2dy;
        // Strong momentum residual (viscous part dropped for bilinear shapes).
        const Scalar R1 = p.rho * conv1 + dpdx + alpha * u1;
        const Scalar R2 = p.rho * conv2 + dpdy + alpha * u2;
        // Continuity counterpart without the density factor.
        const Scalar Rt1 = conv1 + dpdx + alpha * u1;
        const Scalar Rt2 = conv2 + dpdy + alpha * u2;
        const Scalar divu = du1dx + du2dy;

        const double w = pt.wdet;
        for (int a = 0; a < 4; ++a) {
            const double Na = pt.N[a];
            const double dNax = pt.dNdx[a];
            const double dNay = pt.dNdy[a];

            Scalar m1 = p.rho * Na * conv1 +
                        p.mu * (dNax * (du1dx + du1dx) + dNay * (du1dy + du2dx)) -
                        dNax * pr + alpha * Na * u1;
            Scalar m2 = p.rho * Na * conv2 +
                        p.mu * (dNax * (du2dx + du1dy) + dNay * (du2dy + du2dy)) -
                        dNay * pr + alpha * Na * u2;
            if (opt.supg_test == SupgTest::gradu) {
                m1 += tau * Na * (du1dx * R1 + du2dx * R2);
                m2 += tau * Na * (du1dy * R1 + du2dy * R2);
            } else {
                const Scalar adv = u1 * dNax + u2 * dNay;
                m1 += tau * adv * R1;
                m2 += tau * adv * R2;
            }
            r[2 * a] += w * m1;
            r[2 * a + 1] += w * m2;
            r[8 + a] += w * (Na * divu + tau_over_rho * (dNax * Rt1 + dNay * Rt2));
        }
    }
}

/// Dissipated-power density integrated over one element.
template <typename Scalar>
Scalar element_phi_core(const QuadCache& qc, const Scalar* s, const Scalar& alpha,
                        const FlowParams& p) {
    Scalar phi(0.0);
    for (const auto& pt : qc.pts) {
        Scalar u1(0.0), u2(0.0);
        Scalar du1dx(0.0), du1dy(0.0), du2dx(0.0), du2dy(0.0);
        for (int a = 0; a < 4; ++a) {
            u1 += s[2 * a] * pt.N[a];
            u2 += s[2 * a + 1] * pt.N[a];
            du1dx += s[2 * a] * pt.dNdx[a];
            du1dy += s[2 * a] * pt.dNdy[a];
            du2dx += s[2 * a + 1] * pt.dNdx[a];
            du2dy += s[2 * a + 1] * pt.dNdy[a];
        }
        const Scalar visc = du1dx * (du1dx + du1dx) + du1dy * (du1dy + du2dx) +
                            du2dx * (du2dx + du1dy) + du2dy * (du2dy + du2dy);
        phi += pt.wdet * 0.5 * (p.mu * visc + alpha * (u1 * u1 + u2 * u2));
    }
    return phi;
}

} // namespace detail

using Vector12 = Eigen::Matrix<double, 12, 1>;
using Matrix12 = Eigen::Matrix<double, 12, 12>;

/// Residual vector at the given element state (plain evaluation).
inline Vector12 element_residual(const QuadCache& qc, const Vector12& s, double gamma,
                                 const FlowParams& p, const DiscretizationOptions& opt = {}) {
    const double alpha = ramp_alpha(gamma, p);
    Vector12 r;
    detail::element_residual_core(qc, s.data(), alpha, p, opt, r.data());
    return r;
}

/// Residual, state tangent and design derivative from one dual evaluation.
struct ElementSystem {
    Vector12 r;
    Matrix12 J;     ///< dr/ds
    Vector12 drdg;  ///< dr/dgamma
};

inline ElementSystem element_system(const QuadCache& qc, const Vector12& s, double gamma,
                                    const FlowParams& p, const DiscretizationOptions& opt = {}) {
    using D = Dual<13>;
    std::array<D, 12> sd;
    for (int i = 0; i < 12; ++i) sd[i] = D::seeded(s[i], i);
    const D gd = D::seeded(gamma, 12);
    const D alpha = ramp_alpha(gd, p);
    std::array<D, 12> rd;
    detail::element_residual_core(qc, sd.data(), alpha, p, opt, rd.data());
    ElementSystem out;
    for (int i = 0; i < 12; ++i) {
        out.r[i] = rd[i].v;
        for (int j = 0; j < 12; ++j) out.J(i, j) = rd[i].d[j];
        out.drdg[i] = rd[i].d[12];
    }
    return out;
}

/// Design derivative of the residual alone (used when the tangent is reused).
inline Vector12 element_residual_dgamma(const QuadCache& qc, const Vector12& s, double gamma,
                                        const FlowParams& p,
                                        const DiscretizationOptions& opt = {}) {
    using D = Dual<1>;
    std::array<D, 12> sd;
    for (int i = 0; i < 12; ++i) sd[i] = D(s[i]);
    const D alpha = ramp_alpha(D::seeded(gamma, 0), p);
    std::array<D, 12> rd;
    detail::element_residual_core(qc, sd.data(), alpha, p, opt, rd.data());
    Vector12 out;
    for (int i = 0; i < 12; ++i) out[i] = rd[i].d[0];
    return out;
}

/// Element share of the dissipated power with state and design derivatives.
struct ElementPhi {
    double value;
    Vector12 dvds;
    double dvdg;
};

inline ElementPhi element_phi(const QuadCache& qc, const Vector12& s, double gamma,
                              const FlowParams& p) {
    using D = Dual<13>;
    std::array<D, 12> sd;
    for (int i = 0; i < 12; ++i) sd[i] = D::seeded(s[i], i);
    const D alpha = ramp_alpha(D::seeded(gamma, 12), p);
    const D phi = detail::element_phi_core(qc, sd.data(), alpha, p);
    ElementPhi out;
    out.value = phi.v;
    for (int i = 0; i < 12; ++i) out.dvds[i] = phi.d[i];
    out.dvdg = phi.d[12];
    return out;
}

/// Body-force reactions of the penalized region: integrals of alpha*u1 and
/// alpha*u2 over the element, with derivatives.
struct ElementForce {
    double drag, lift;
    Vector12 ddrag_ds, dlift_ds;
    double ddrag_dg, dlift_dg;
};

inline ElementForce element_force(const QuadCache& qc, const Vector12& s, double gamma,
                                  const FlowParams& p) {
    using D = Dual<13>;
    std::array<D, 12> sd;
    for (int i = 0; i < 12; ++i) sd[i] = D::seeded(s[i], i);
    const D alpha = ramp_alpha(D::seeded(gamma, 12), p);
    D drag(0.0), lift(0.0);
    for (const auto& pt : qc.pts) {
        D u1(0.0), u2(0.0);
        for (int a = 0; a < 4; ++a) {
            u1 += sd[2 * a] * pt.N[a];
            u2 += sd[2 * a + 1] * pt.N[a];
        }
        drag += pt.wdet * (alpha * u1);
        lift += pt.wdet * (alpha * u2);
    }
    ElementForce out;
    out.drag = drag.v;
    out.lift = lift.v;
    for (int i = 0; i < 12; ++i) {
        out.ddrag_ds[i] = drag.d[i];
        out.dlift_ds[i] = lift.d[i];
    }
    out.ddrag_dg = drag.d[12];
    out.dlift_dg = lift.d[12];
    return out;
}

/// Mean velocity magnitude over the element (quadrature average).
inline double element_mean_speed(const QuadCache& qc, const Vector12& s) {
    double acc = 0.0;
    for (const auto& pt : qc.pts) {
        double u1 = 0.0, u2 = 0.0;
        for (int a = 0; a < 4; ++a) {
            u1 += s[2 * a] * pt.N[a];
            u2 += s[2 * a + 1] * pt.N[a];
        }
        acc += pt.wdet * std::sqrt(u1 * u1 + u2 * u2);
    }
    return acc / qc.area;
}

} // namespace flowtopo
