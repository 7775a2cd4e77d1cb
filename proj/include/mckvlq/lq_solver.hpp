#pragma once

// Piecewise value function, feedback law and a numerical verifier for the
// measure-space HJB identity. Everything here is a pure function of the solved
// PSystem and the cone projection; region membership decides which quadruple
// applies and whether the feedback is active.

#include "mckvlq/cone_qp.hpp"
#include "mckvlq/errors.hpp"
#include "mckvlq/ode_engine.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mckvlq {

/// A law on the real line, carried by its first two moments and optionally by
/// an empirical sample whose moments must agree with the stated ones.
struct MeasureState {
    double mean = 0.0;
    double variance = 0.0;
    std::optional<std::vector<double>> sample;

    static MeasureState dirac(double x) { return {x, 0.0, std::nullopt}; }

    static MeasureState from_sample(std::vector<double> xs) {
        if (xs.empty()) throw InvalidInput("measure_state: empty sample");
        double m = 0.0;
        for (double x : xs) m += x;
        m /= static_cast<double>(xs.size());
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        v /= static_cast<double>(xs.size());
        return {m, v, std::move(xs)};
    }

    void validate() const {
        if (!(variance >= 0.0)) throw InvalidInput("measure_state: variance must be >= 0");
        if (!std::isfinite(mean)) throw InvalidInput("measure_state: non-finite mean");
        if (sample) {
            const MeasureState check = from_sample(*sample);
            if (std::abs(check.mean - mean) > 1e-12 || std::abs(check.variance - variance) > 1e-12)
                throw InvalidInput("measure_state: sample moments disagree with (mean, variance)");
        }
    }
};

enum class Region { Pi1, Pi2, Pi3 };

inline const char* region_name(Region r) {
    switch (r) {
        case Region::Pi1: return "Pi1";
        case Region::Pi2: return "Pi2";
        default: return "Pi3";
    }
}

struct RegionTag {
    Region region = Region::Pi3;
    double switch_value = 0.0;  ///< (2 P2 mean + P3) / (2 P1)
};

/// Default half-width of the numerical switching band around zero.
inline constexpr double kDefaultDeadBand = 1e-9;

/// Sign of the feedback coefficient decides the region; a dead band of width
/// tau around zero is tagged as the switching set.
inline RegionTag classify_region(double t, double mean, const PSystem& ps,
                                 double tau = kDefaultDeadBand) {
    if (tau < 0.0) throw InvalidInput("classify_region: tau must be >= 0");
    const auto q = ps.values(t, false);
    RegionTag tag;
    tag.switch_value = (2.0 * q.p2 * mean + q.p3) / (2.0 * q.p1);
    if (tag.switch_value < -tau)
        tag.region = Region::Pi1;
    else if (tag.switch_value > tau)
        tag.region = Region::Pi2;
    else
        tag.region = Region::Pi3;
    return tag;
}

struct ValueResult {
    double v = 0.0;
    RegionTag tag;
    std::optional<double> v_other;  ///< the competing branch value, set on the switching set
    bool conjectural = false;       ///< true when v = min of the two branches was used
};

namespace detail {

inline double quad_value(const PSystem::Quad& q, const MeasureState& state) {
    return state.variance * q.p1 + q.p2 * state.mean * state.mean + q.p3 * state.mean + q.p4;
}

}  // namespace detail

/// Value of the candidate solution at (t, state). Off the switching set the
/// region's own quadruple applies; on it both are reported, the smaller one
/// first, flagged as conjectural.
inline ValueResult value(double t, const MeasureState& state, const PSystem& ps,
                         double tau = kDefaultDeadBand) {
    state.validate();
    ValueResult out;
    out.tag = classify_region(t, state.mean, ps, tau);
    const double v1 = detail::quad_value(ps.values(t, false), state);
    const double v2 = detail::quad_value(ps.values(t, true), state);
    switch (out.tag.region) {
        case Region::Pi1: out.v = v1; break;
        case Region::Pi2: out.v = v2; break;
        case Region::Pi3:
            out.v = std::min(v1, v2);
            out.v_other = std::max(v1, v2);
            out.conjectural = true;
            break;
    }
    return out;
}

/// Average feedback control. Active only where the switch value is negative,
/// where it scales the nonnegative direction nubar = D^{-1} thetabar.
inline Eigen::VectorXd optimal_control(double t, double mean, const PSystem& ps,
                                       const ConeSolution& cone, double tau = kDefaultDeadBand) {
    const RegionTag tag = classify_region(t, mean, ps, tau);
    if (tag.region == Region::Pi1) return (-tag.switch_value) * cone.nubar;
    return Eigen::VectorXd::Zero(cone.nubar.size());
}

struct LionsDerivatives {
    double dmu = 0.0;    ///< first measure derivative at the probe point x
    double dxdmu = 0.0;  ///< its x-derivative, 2 P1
};

/// Closed-form measure derivatives of the quadratic ansatz, using the
/// quadruple selected by the region at (t, mean).
inline LionsDerivatives lions_derivatives(double t, double x, const MeasureState& state,
                                          const PSystem& ps, double tau = kDefaultDeadBand) {
    const RegionTag tag = classify_region(t, state.mean, ps, tau);
    const auto q = ps.values(t, tag.region == Region::Pi2);
    return {2.0 * q.p1 * (x - state.mean) + 2.0 * q.p2 * state.mean + q.p3, 2.0 * q.p1};
}

/// Pointwise Hamiltonian H(x, u, mu, p, Q) = f + b p + 1/2 Tr(sigma' Q) with
/// sigma = D u and Q = q_factor * sigma.
inline double hamiltonian(const LQParams& params, double x, const Eigen::VectorXd& u,
                          const MeasureState& state, double p, double q_factor) {
    const double f = params.Q1 * x * x + params.Q2 * state.mean * state.mean + params.Q3 * x;
    const double drift =
        params.A * x + params.Abar * state.mean + params.B.dot(u) + params.b0;
    const Eigen::VectorXd du = params.D * u;
    return f + drift * p + 0.5 * q_factor * du.squaredNorm();
}

/// Residual of the HJB identity at an interior point:
///
///   d_t V + inf_{u >= 0} E[ H(xi, u, mu, d_mu V(xi), d_x d_mu V(xi) sigma) ].
///
/// The time derivative comes from the stored ODE right-hand sides, the
/// expectation is evaluated in closed form from (mean, variance), and the
/// infimum goes through minimize_h with alpha = -switch_value, scaled by 2 P1.
/// The quadruple is the region's own, so a vanishing residual certifies that
/// the integrated coefficients satisfy the grouped identity.
inline double hjb_residual(double t, const MeasureState& state, const PSystem& ps,
                           const ConeSolution& cone, double tau = kDefaultDeadBand) {
    ps.require_in_range(t);
    if (t >= ps.grid.back())
        throw InvalidInput("hjb_residual: undefined at t = T, check terminal conditions instead");
    state.validate();

    const LQParams& params = ps.params;
    const RegionTag tag = classify_region(t, state.mean, ps, tau);
    const bool tilde = tag.region == Region::Pi2;
    const auto q = ps.values(t, tilde);
    const auto dq = ps.derivatives(t, tilde);

    const double mean = state.mean;
    const double var = state.variance;
    const double switch_value = (2.0 * q.p2 * mean + q.p3) / (2.0 * q.p1);

    const double dt_v = var * dq.p1 + mean * mean * dq.p2 + mean * dq.p3 + dq.p4;
    const double expected_h_u0 =
        params.Q1 * (var + mean * mean) + params.Q2 * mean * mean + params.Q3 * mean +
        2.0 * params.A * q.p1 * var +
        ((params.A + params.Abar) * mean + params.b0) * (2.0 * q.p2 * mean + q.p3);
    const double inf_control = 2.0 * q.p1 * minimize_h(cone, -switch_value).h_min;

    return dt_v + expected_h_u0 + inf_control;
}

}  // namespace mckvlq
