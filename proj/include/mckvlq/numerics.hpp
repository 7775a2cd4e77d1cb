#pragma once

#include "mckvlq/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mckvlq {

/// (e^{a*d} - 1) / a with the a -> 0 limit d. Keeps closed forms usable at the
/// removable singularities the r = 0 / A = 0 cases introduce.
inline double expm1_over(double a, double d) {
    if (a == 0.0) return d;
    return std::expm1(a * d) / a;
}

/// Linear interpolation on a uniform grid [t0, t0 + n*h].
class UniformGrid {
public:
    UniformGrid() = default;
    UniformGrid(double t0, double t1, std::size_t steps)
        : t0_(t0), h_((t1 - t0) / static_cast<double>(steps)), n_(steps) {}

    std::size_t size() const { return n_ + 1; }
    double step() const { return h_; }
    double front() const { return t0_; }
    double back() const { return t0_ + h_ * static_cast<double>(n_); }
    double point(std::size_t k) const { return t0_ + h_ * static_cast<double>(k); }

    bool contains(double t, double slack = 1e-12) const {
        return t >= front() - slack && t <= back() + slack;
    }

    /// Index and weight of the cell containing t: value = (1-w)*y[k] + w*y[k+1].
    std::pair<std::size_t, double> locate(double t) const {
        double s = (t - t0_) / h_;
        if (s <= 0.0) return {0, 0.0};
        auto k = static_cast<std::size_t>(s);
        if (k >= n_) return {n_ - 1, 1.0};
        return {k, s - static_cast<double>(k)};
    }

    double interpolate(const std::vector<double>& y, double t) const {
        auto [k, w] = locate(t);
        return (1.0 - w) * y[k] + w * y[k + 1];
    }

private:
    double t0_ = 0.0;
    double h_ = 1.0;
    std::size_t n_ = 0;
};

/// One classic Runge-Kutta 4 step for a small fixed-size system. Negative h
/// steps backward, which is how the terminal-value solves below use it.
template <std::size_t N, typename Rhs>
std::array<double, N> rk4_step(const Rhs& f, double t, const std::array<double, N>& y, double h) {
    auto axpy = [](const std::array<double, N>& a, double c, const std::array<double, N>& b) {
        std::array<double, N> r;
        for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + c * b[i];
        return r;
    };
    const auto k1 = f(t, y);
    const auto k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
    const auto k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
    const auto k4 = f(t + h, axpy(y, h, k3));
    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

namespace detail {

inline double simpson_panel(const std::function<double(double)>& f, double a, double fa, double b,
                            double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double fa,
                                   double b, double fb, double fm, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson_panel(f, a, fa, m, fm, flm);
    const double right = simpson_panel(f, m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-10) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = detail::simpson_panel(f, a, fa, b, fb, fm);
    return detail::adaptive_simpson_rec(f, a, fa, b, fb, fm, whole, tol, 40);
}

/// Composite trapezoid over samples y on a uniform grid with step h.
inline double trapezoid(const std::vector<double>& y, double h) {
    if (y.size() < 2) return 0.0;
    double acc = 0.5 * (y.front() + y.back());
    for (std::size_t k = 1; k + 1 < y.size(); ++k) acc += y[k];
    return acc * h;
}

// ---------------------------------------------------------------------------
// Counter-based Gaussian stream.
//
// Every draw is a pure function of (seed, particle, step, component), so a
// simulation sliced across any number of worker threads reproduces the exact
// same increments. This is the determinism contract of the simulator.
// ---------------------------------------------------------------------------

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform in (0, 1], using the top 53 bits of the hash.
inline double hash_to_unit(std::uint64_t h) {
    return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal draw indexed by (seed, particle, step, component).
inline double counter_gauss(std::uint64_t seed, std::uint64_t particle, std::uint64_t step,
                            std::uint64_t component) {
    std::uint64_t key = mix64(mix64(mix64(seed) ^ particle) ^ step) ^ component;
    const double u1 = hash_to_unit(mix64(key));
    const double u2 = hash_to_unit(mix64(key ^ 0x6a09e667f3bcc909ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

/// Shortest round-trip decimal text for a double. Locale independent, so CSV
/// output is byte-stable across environments.
inline std::string format_double(double x) {
    std::array<char, 32> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), ptr);
}

}  // namespace mckvlq
