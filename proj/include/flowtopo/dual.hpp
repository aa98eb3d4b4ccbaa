#pragma once

#include <array>
#include <cmath>

namespace flowtopo {

/// Forward-mode first derivatives with N independent directions.  Used by the
/// element kernels to obtain exact tangent matrices and design derivatives
/// from a single templated residual evaluation.
template <int N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}

    static Dual seeded(double value, int direction) {
        Dual x(value);
        x.d[direction] = 1.0;
        return x;
    }

    Dual operator-() const {
        Dual r(-v);
        for (int i = 0; i < N; ++i) r.d[i] = -d[i];
        return r;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
    Dual& operator+=(double a) { v += a; return *this; }
    Dual& operator-=(double a) { v -= a; return *this; }
    Dual& operator*=(double a) {
        v *= a;
        for (int i = 0; i < N; ++i) d[i] *= a;
        return *this;
    }

    friend Dual operator+(const Dual& a, const Dual& b) {
        Dual r(a.v + b.v);
        for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
        return r;
    }
    friend Dual operator-(const Dual& a, const Dual& b) {
        Dual r(a.v - b.v);
        for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
        return r;
    }
    friend Dual operator*(const Dual& a, const Dual& b) {
        Dual r(a.v * b.v);
        for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
        return r;
    }
    friend Dual operator/(const Dual& a, const Dual& b) {
        const double inv = 1.0 / b.v;
        Dual r(a.v * inv);
        for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
        return r;
    }

    friend Dual operator+(const Dual& a, double b) { Dual r(a); r.v += b; return r; }
    friend Dual operator+(double a, const Dual& b) { Dual r(b); r.v += a; return r; }
    friend Dual operator-(const Dual& a, double b) { Dual r(a); r.v -= b; return r; }
    friend Dual operator-(double a, const Dual& b) { return -b + a; }
    friend Dual operator*(const Dual& a, double b) {
        Dual r(a.v * b);
        for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b;
        return r;
    }
    friend Dual operator*(double a, const Dual& b) { return b * a; }
    friend Dual operator/(const Dual& a, double b) { return a * (1.0 / b); }
    friend Dual operator/(double a, const Dual& b) { return Dual(a) / b; }

    friend Dual sqrt(const Dual& a) {
        const double s = std::sqrt(a.v);
        Dual r(s);
        const double half_inv = 0.5 / s;
        for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * half_inv;
        return r;
    }
};

/// Uniform access to the plain value for templated kernels.
inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) { return x.v; }

} // namespace flowtopo
