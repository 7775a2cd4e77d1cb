#pragma once

// Terminal-value solver for the two coefficient quadruples of the piecewise
// quadratic value ansatz. The first quadruple (P1..P4) couples through the
// squared norm of the projected direction; the second (Pt1..Pt4) is the same
// system with that coupling removed and is linear throughout. Both are
// integrated backward from T with classic RK4 on a shared uniform grid.

#include "mckvlq/cone_qp.hpp"
#include "mckvlq/errors.hpp"
#include "mckvlq/numerics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mckvlq {

struct LQParams {
    double A = 0.0;     ///< state drift
    double Abar = 0.0;  ///< mean drift
    Eigen::VectorXd B;  ///< control drift loading, entries >= 0
    double b0 = 0.0;    ///< affine drift
    Eigen::MatrixXd D;  ///< m x m diffusion loading, rows multiply dW^j
    double Q1 = 0.0, Q2 = 0.0, Q3 = 0.0;
    double G1 = 1.0, G2 = 0.0, G3 = 0.0;
    double T = 1.0;
    double t0 = 0.0;

    ConeProblem cone_problem() const { return {D, B}; }

    void validate() const {
        if (!(G1 > 0.0)) throw InvalidInput("lq_params: G1 must be > 0");
        if (!(G1 + G2 >= 0.0)) throw InvalidInput("lq_params: G1 + G2 must be >= 0");
        if (!(Q1 >= 0.0)) throw InvalidInput("lq_params: Q1 must be >= 0");
        if (!(Q1 + Q2 >= 0.0)) throw InvalidInput("lq_params: Q1 + Q2 must be >= 0");
        if (!(Q3 <= 0.0)) throw InvalidInput("lq_params: Q3 must be <= 0");
        if (!(A >= 0.0)) throw InvalidInput("lq_params: A must be >= 0");
        if (!(Abar >= 0.0)) throw InvalidInput("lq_params: Abar must be >= 0");
        if (!(t0 >= 0.0) || !(t0 < T)) throw InvalidInput("lq_params: need 0 <= t0 < T");
        if (!std::isfinite(b0) || !std::isfinite(G3))
            throw InvalidInput("lq_params: non-finite coefficient");
        cone_problem().validate();
    }
};

/// Numerical value below which P2 is treated as zero and eta is undefined.
inline constexpr double kEtaZeroBand = 1e-12;

/// Overflow guard for the Riccati component.
inline constexpr double kP2EscapeGuard = 1e12;

struct PSystem {
    LQParams params;
    double theta_norm_sq = 0.0;
    UniformGrid grid;
    std::array<std::vector<double>, 4> p;    ///< P1..P4 at grid nodes
    std::array<std::vector<double>, 4> dp;   ///< forward-time derivatives at nodes
    std::array<std::vector<double>, 4> pt;   ///< Pt1..Pt4
    std::array<std::vector<double>, 4> dpt;  ///< their derivatives
    std::vector<double> eta;                 ///< P3/P2, NaN where |P2| < kEtaZeroBand

    void require_in_range(double t) const {
        if (!grid.contains(t))
            throw InvalidInput("psystem: time " + format_double(t) + " outside [" +
                               format_double(grid.front()) + ", " + format_double(grid.back()) +
                               "]");
    }

    struct Quad {
        double p1, p2, p3, p4;
    };

    Quad values(double t, bool tilde) const {
        require_in_range(t);
        const auto& src = tilde ? pt : p;
        return {grid.interpolate(src[0], t), grid.interpolate(src[1], t),
                grid.interpolate(src[2], t), grid.interpolate(src[3], t)};
    }

    Quad derivatives(double t, bool tilde) const {
        require_in_range(t);
        const auto& src = tilde ? dpt : dp;
        return {grid.interpolate(src[0], t), grid.interpolate(src[1], t),
                grid.interpolate(src[2], t), grid.interpolate(src[3], t)};
    }
};

namespace detail {

using Quad4 = std::array<double, 4>;

inline void check_p1_positive(double p1, double t) {
    if (!(p1 > 0.0))
        throw InvariantViolation("p_system: P1 reached " + format_double(p1) + " at t = " +
                                 format_double(t) + ", positivity lost");
}

}  // namespace detail

/// Integrate both quadruples backward from T. The coupled system divides by P1
/// and multiplies the Riccati square by theta_norm_sq; the tilde system drops
/// those terms. Solve order inside each right-hand side is triangular:
/// each component only reads earlier ones.
inline PSystem solve_p_system(const LQParams& params, double theta_norm_sq,
                              std::size_t steps = 2048) {
    params.validate();
    if (!(theta_norm_sq >= 0.0) || !std::isfinite(theta_norm_sq))
        throw InvalidInput("p_system: theta_norm_sq must be finite and >= 0");
    if (steps < 16) throw InvalidInput("p_system: need at least 16 steps");

    const double c = params.A + params.Abar;

    auto rhs = [&](double t, const detail::Quad4& y) -> detail::Quad4 {
        detail::check_p1_positive(y[0], t);
        const double p1 = y[0], p2 = y[1], p3 = y[2];
        return {-2.0 * params.A * p1 - params.Q1,
                theta_norm_sq * p2 * p2 / p1 - 2.0 * c * p2 - (params.Q1 + params.Q2),
                -(c - p2 / p1 * theta_norm_sq) * p3 - 2.0 * p2 * params.b0 - params.Q3,
                -params.b0 * p3 + 0.25 * p3 * p3 / p1 * theta_norm_sq};
    };
    auto rhs_tilde = [&](double t, const detail::Quad4& y) -> detail::Quad4 {
        detail::check_p1_positive(y[0], t);
        return {-2.0 * params.A * y[0] - params.Q1,
                -2.0 * c * y[1] - (params.Q1 + params.Q2),
                -c * y[2] - 2.0 * y[1] * params.b0 - params.Q3,
                -params.b0 * y[2]};
    };

    PSystem ps;
    ps.params = params;
    ps.theta_norm_sq = theta_norm_sq;
    ps.grid = UniformGrid(params.t0, params.T, steps);
    const std::size_t n = ps.grid.size();
    for (int i = 0; i < 4; ++i) {
        ps.p[i].assign(n, 0.0);
        ps.dp[i].assign(n, 0.0);
        ps.pt[i].assign(n, 0.0);
        ps.dpt[i].assign(n, 0.0);
    }

    const detail::Quad4 terminal = {params.G1, params.G1 + params.G2, params.G3, 0.0};
    auto march = [&](const auto& f, std::array<std::vector<double>, 4>& out,
                     std::array<std::vector<double>, 4>& dout) {
        detail::Quad4 y = terminal;
        for (int i = 0; i < 4; ++i) out[i][n - 1] = y[i];
        for (std::size_t k = n - 1; k > 0; --k) {
            y = rk4_step(f, ps.grid.point(k), y, -ps.grid.step());
            const double t_prev = ps.grid.point(k - 1);
            if (!std::isfinite(y[1]) || std::abs(y[1]) > kP2EscapeGuard)
                throw FiniteEscape("p_system: Riccati component exceeded the overflow guard at t = " +
                                       format_double(t_prev),
                                   t_prev);
            for (int i = 0; i < 4; ++i) out[i][k - 1] = y[i];
        }
        for (std::size_t k = 0; k < n; ++k) {
            detail::Quad4 node = {out[0][k], out[1][k], out[2][k], out[3][k]};
            detail::check_p1_positive(node[0], ps.grid.point(k));
            const auto d = f(ps.grid.point(k), node);
            for (int i = 0; i < 4; ++i) dout[i][k] = d[i];
        }
    };
    march(rhs, ps.p, ps.dp);
    march(rhs_tilde, ps.pt, ps.dpt);

    ps.eta.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < n; ++k)
        if (std::abs(ps.p[1][k]) >= kEtaZeroBand) ps.eta[k] = ps.p[2][k] / ps.p[1][k];

    return ps;
}

/// P1(t) = G1 e^{2A(T-t)} + (Q1/2A)(e^{2A(T-t)} - 1), with the A = 0 limit.
inline double closed_form_P1(const LQParams& params, double t) {
    const double d = params.T - t;
    return params.G1 * std::exp(2.0 * params.A * d) + params.Q1 * expm1_over(2.0 * params.A, d);
}

/// Explicit solution of the linear tilde Riccati slot.
inline double closed_form_Pt2(const LQParams& params, double t) {
    const double c = params.A + params.Abar;
    const double d = params.T - t;
    return (params.G1 + params.G2) * std::exp(2.0 * c * d) +
           (params.Q1 + params.Q2) * expm1_over(2.0 * c, d);
}

/// Variation-of-constants solution of the linear tilde P3 equation, feeding on
/// closed_form_Pt2.
inline double closed_form_Pt3(const LQParams& params, double t) {
    const double c = params.A + params.Abar;
    const double d = params.T - t;
    const double ecd = std::exp(c * d);
    const double e1 = expm1_over(c, d);  // (e^{cd} - 1)/c
    return params.G3 * ecd +
           2.0 * params.b0 *
               ((params.G1 + params.G2) * ecd * e1 + 0.5 * (params.Q1 + params.Q2) * e1 * e1) +
           params.Q3 * e1;
}

/// Ratio P3/P2 under the degenerate running cost Q3 = Q1 + Q2 = 0, where both
/// quadruples share it.
inline double closed_form_eta(const LQParams& params, double t) {
    if (params.Q3 != 0.0 || params.Q1 + params.Q2 != 0.0)
        throw InvalidInput("closed_form_eta: requires Q3 = 0 and Q1 + Q2 = 0");
    if (params.G1 + params.G2 == 0.0)
        throw InvalidInput("closed_form_eta: requires G1 + G2 != 0");
    const double c = params.A + params.Abar;
    const double d = params.T - t;
    const double decay = std::exp(-c * d);
    const double ramp = (c == 0.0) ? d : -std::expm1(-c * d) / c;  // (1 - e^{-cd})/c
    return params.G3 / (params.G1 + params.G2) * decay + 2.0 * params.b0 * ramp;
}

struct BernoulliP2 {
    double p2 = 0.0;            ///< exact reciprocal-form solution, by quadrature
    double pt2 = 0.0;           ///< (G1+G2) e^{2(A+Abar)(T-t)}
    double p2_displayed = 0.0;  ///< variant that freezes P1 at time t inside the integral
    double displayed_gap = 0.0; ///< |p2 - p2_displayed|
};

/// Reciprocal (Bernoulli) reduction of the Riccati slot when Q3 = Q1+Q2 = 0:
///
///   1/P2(t) = e^{-2c(T-t)}/(G1+G2) + theta2 * Int_t^T e^{-2c(s-t)}/P1(s) ds.
///
/// The quadrature is evaluated exactly; a commonly quoted shortcut instead
/// treats P1 as constant over the integration, and the gap between the two is
/// reported rather than silently adopted.
inline BernoulliP2 closed_form_bernoulli_P2(const LQParams& params, double theta_norm_sq,
                                            double t) {
    if (params.Q3 != 0.0 || params.Q1 + params.Q2 != 0.0)
        throw InvalidInput("bernoulli_p2: requires Q3 = 0 and Q1 + Q2 = 0");
    if (!(params.G1 + params.G2 > 0.0)) throw InvalidInput("bernoulli_p2: requires G1 + G2 > 0");
    if (!(params.Q1 >= 0.0) || !(params.b0 >= 0.0) || !(params.G3 <= 0.0) || !(params.A >= 0.0))
        throw InvalidInput("bernoulli_p2: requires Q1 >= 0, b0 >= 0, G3 <= 0, A >= 0");

    const double c = params.A + params.Abar;
    const double d = params.T - t;
    const double sum_g = params.G1 + params.G2;

    BernoulliP2 out;
    out.pt2 = sum_g * std::exp(2.0 * c * d);
    const double integral = adaptive_simpson(
        [&](double s) { return std::exp(-2.0 * c * (s - t)) / closed_form_P1(params, s); }, t,
        params.T, 1e-13);
    out.p2 = 1.0 / (std::exp(-2.0 * c * d) / sum_g + theta_norm_sq * integral);

    const double ramp = (c == 0.0) ? d : -std::expm1(-2.0 * c * d) / (2.0 * c);
    out.p2_displayed =
        1.0 / (std::exp(-2.0 * c * d) / sum_g + theta_norm_sq * ramp / closed_form_P1(params, t));
    out.displayed_gap = std::abs(out.p2 - out.p2_displayed);
    return out;
}

struct ComparisonReport {
    double max_p1_gap = 0.0;     ///< max |P1 - Pt1|
    double min_p1 = 0.0;         ///< min of P1 over the grid
    double max_p2_excess = 0.0;  ///< max (P2 - Pt2), should be <= 0
    double max_p4_excess = 0.0;  ///< max (P4 - Pt4), should be <= 0
    bool hypotheses_hold = false;

    bool pass(double slack) const {
        return max_p1_gap <= slack && min_p1 > 0.0 && max_p2_excess <= slack &&
               max_p4_excess <= slack;
    }
};

/// Grid-wise check of the ordering between the two quadruples. The hypotheses
/// (Q1 >= 0, G3 <= 0, A >= 0) are reported, not enforced.
inline ComparisonReport check_comparison(const PSystem& ps, const LQParams& params) {
    ComparisonReport report;
    report.hypotheses_hold = params.Q1 >= 0.0 && params.G3 <= 0.0 && params.A >= 0.0;
    report.min_p1 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ps.grid.size(); ++k) {
        report.max_p1_gap = std::max(report.max_p1_gap, std::abs(ps.p[0][k] - ps.pt[0][k]));
        report.min_p1 = std::min(report.min_p1, ps.p[0][k]);
        report.max_p2_excess = std::max(report.max_p2_excess, ps.p[1][k] - ps.pt[1][k]);
        report.max_p4_excess = std::max(report.max_p4_excess, ps.p[3][k] - ps.pt[3][k]);
    }
    return report;
}

}  // namespace mckvlq
