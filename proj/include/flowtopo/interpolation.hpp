#pragma once

#include <stdexcept>
#include <vector>

namespace flowtopo {

/// Physical and interpolation parameters shared by all element evaluations.
struct FlowParams {
    double rho = 1.0;       ///< fluid density
    double mu = 1.0;        ///< dynamic viscosity
    double alpha_min = 0.0; ///< impermeability of pure fluid
    double alpha_max = 0.0; ///< impermeability of pure solid
    double q_alpha = 1.0;   ///< convexity factor of the interpolation

    void validate() const {
        if (!(rho > 0.0)) throw std::domain_error("params: rho must be positive");
        if (!(mu > 0.0)) throw std::domain_error("params: mu must be positive");
        if (alpha_min < 0.0 || alpha_max < alpha_min)
            throw std::domain_error("params: need 0 <= alpha_min <= alpha_max");
        if (!(q_alpha > 0.0)) throw std::domain_error("params: q_alpha must be positive");
    }
};

/// Convex rational interpolation from design value to impermeability.
/// gamma = 0 gives alpha_max (solid), gamma = 1 gives alpha_min (fluid).
template <typename Scalar>
Scalar ramp_alpha(const Scalar& gamma, const FlowParams& p) {
    return p.alpha_min + (p.alpha_max - p.alpha_min) * (Scalar(1.0) - gamma) /
                             (Scalar(1.0) + Scalar(p.q_alpha) * gamma);
}

/// Analytic derivative of ramp_alpha with respect to gamma.
inline double ramp_alpha_dgamma(double gamma, const FlowParams& p) {
    const double d = 1.0 + p.q_alpha * gamma;
    return -(p.alpha_max - p.alpha_min) * (1.0 + p.q_alpha) / (d * d);
}

/// Solid impermeability from a porous-media permeability kappa.
inline double alpha_max_from_permeability(double mu, double kappa) {
    if (!(mu > 0.0) || !(kappa > 0.0))
        throw std::domain_error("alpha_max: mu and kappa must be positive");
    return mu / kappa;
}

/// Fluid impermeability modeling out-of-plane drag of a shallow channel of
/// height h between parallel plates.
inline double alpha_min_out_of_plane(double mu, double h) {
    if (!(mu > 0.0) || !(h > 0.0))
        throw std::domain_error("alpha_min: mu and h must be positive");
    return 5.0 * mu / (2.0 * h * h);
}

/// Reynolds-aware solid impermeability scaling, dimensionless form.
inline double kondoh_alpha_max(double Re, double Da) {
    if (!(Re > 0.0) || !(Da > 0.0))
        throw std::domain_error("alpha_max: Re and Da must be positive");
    return (1.0 + 1.0 / Re) / Da;
}

/// Initial convexity factor so that a uniform design x0 starts at
/// impermeability alpha0.
inline double q_init(double alpha0, double alpha_max, double alpha_min, double x0) {
    if (!(x0 > 0.0) || x0 > 1.0)
        throw std::domain_error("q_init: x0 must lie in (0, 1]");
    if (!(alpha0 > alpha_min) || !(alpha0 < alpha_max))
        throw std::domain_error("q_init: alpha0 must lie strictly between alpha bounds");
    return ((alpha_max - alpha0) - x0 * (alpha_max - alpha_min)) /
           (x0 * (alpha0 - alpha_min));
}

/// Sequence of convexity factors walked during optimization.  The default
/// four-step schedule divides q0 by {1, 2, 10, 20}.
struct ContinuationSchedule {
    std::vector<double> q_values;

    static ContinuationSchedule standard(double q0, int steps = 4) {
        static constexpr double divisors[4] = {1.0, 2.0, 10.0, 20.0};
        if (!(q0 > 0.0)) throw std::domain_error("continuation: q0 must be positive");
        if (steps < 1 || steps > 4)
            throw std::domain_error("continuation: step count must be in [1, 4]");
        ContinuationSchedule s;
        for (int i = 0; i < steps; ++i) s.q_values.push_back(q0 / divisors[i]);
        return s;
    }

    static ContinuationSchedule single(double q) {
        if (!(q > 0.0)) throw std::domain_error("continuation: q must be positive");
        return ContinuationSchedule{{q}};
    }

    int steps() const { return static_cast<int>(q_values.size()); }
};

} // namespace flowtopo
