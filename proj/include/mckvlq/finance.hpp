#pragma once

// Mean-variance portfolio selection with short-selling prohibited, expressed
// through the constrained LQ machinery. The market maps onto the generic
// problem with A = r, Abar = 0, B = b - r 1, b0 = 0 and D = sigma', after
// which the coefficient ODEs collapse to closed forms (P2 vanishes
// identically) and the attainable band of expected terminal wealth follows
// from the mean dynamics under the optimal and the zero strategy.

#include "mckvlq/cone_qp.hpp"
#include "mckvlq/errors.hpp"
#include "mckvlq/lq_solver.hpp"
#include "mckvlq/numerics.hpp"
#include "mckvlq/ode_engine.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace mckvlq {

struct MarketParams {
    double r = 0.0;         ///< riskless rate
    Eigen::VectorXd b;      ///< appreciation rates, each > r
    Eigen::MatrixXd sigma;  ///< m x m volatility matrix
    double alpha = 1.0;     ///< terminal variance weight, > 0
    double beta = 0.0;      ///< terminal mean weight, >= 0
    double gamma = 0.0;     ///< running variance weight, >= 0
    double kappa = 0.0;     ///< running mean weight, >= 0
    double X0 = 1.0;        ///< initial wealth
    double T = 1.0;         ///< horizon
    double nondegeneracy_delta = 1e-10;

    Eigen::Index assets() const { return b.size(); }

    void validate() const {
        if (b.size() == 0 || sigma.rows() != b.size() || sigma.cols() != b.size())
            throw InvalidInput("market: sigma must be m x m matching b");
        if (!(r >= 0.0)) throw InvalidInput("market: r must be >= 0");
        if ((b.array() <= r).any()) throw InvalidInput("market: every b_i must exceed r");
        if (!(alpha > 0.0)) throw InvalidInput("market: alpha must be > 0");
        if (!(beta >= 0.0) || !(gamma >= 0.0) || !(kappa >= 0.0))
            throw InvalidInput("market: beta, gamma, kappa must be >= 0");
        if (!(T > 0.0)) throw InvalidInput("market: T must be > 0");
        if (!std::isfinite(X0)) throw InvalidInput("market: non-finite X0");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma * sigma.transpose());
        if (es.eigenvalues().minCoeff() < nondegeneracy_delta)
            throw InvalidInput("market: sigma sigma' fails the non-degeneracy bound");
    }
};

/// Market-to-LQ mapping. The induced weights satisfy Q1 + Q2 = 0 and
/// G1 + G2 = 0, which forces the Riccati slot to vanish on the whole horizon.
inline LQParams to_lq(const MarketParams& mp) {
    mp.validate();
    LQParams params;
    params.A = mp.r;
    params.Abar = 0.0;
    params.B = mp.b.array() - mp.r;
    params.b0 = 0.0;
    params.D = mp.sigma.transpose();
    params.Q1 = mp.gamma;
    params.Q2 = -mp.gamma;
    params.Q3 = -mp.kappa;
    params.G1 = mp.alpha;
    params.G2 = -mp.alpha;
    params.G3 = -mp.beta;
    params.T = mp.T;
    params.t0 = 0.0;
    return params;
}

struct RelativeRisk {
    Eigen::VectorXd theta;  ///< sigma^{-1} (b - r 1)
    ConeSolution cone;      ///< projection of theta onto the admissible directions
};

/// Relative risk and its cone projection. Only invertibility of sigma is
/// needed here; full market validation happens in to_lq.
inline RelativeRisk relative_risk(const MarketParams& mp) {
    if (mp.sigma.rows() != mp.sigma.cols() || mp.sigma.rows() != mp.b.size())
        throw InvalidInput("relative_risk: sigma must be m x m matching b");
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(mp.sigma);
    const Eigen::VectorXd excess = mp.b.array() - mp.r;
    const Eigen::VectorXd theta = lu.solve(excess);
    if (!theta.allFinite()) throw NumericFailure("relative_risk: sigma is singular");
    ConeProblem problem{mp.sigma.transpose(), excess};
    return {theta, solve_cone_projection(problem)};
}

struct ExplicitPs {
    double p1 = 0.0, p2 = 0.0, p3 = 0.0, p4 = 0.0;
};

/// Closed forms of the coefficient quadruple for the market problem, with the
/// r = 0 limits substituted where the displayed formulas divide by r.
inline ExplicitPs closed_form_Ps(const MarketParams& mp, double t, double theta_norm_sq) {
    const double d = mp.T - t;
    ExplicitPs out;
    out.p1 = mp.alpha * std::exp(2.0 * mp.r * d) + mp.gamma * expm1_over(2.0 * mp.r, d);
    out.p2 = 0.0;
    out.p3 = -mp.beta * std::exp(mp.r * d) - mp.kappa * expm1_over(mp.r, d);
    auto p3_at = [&](double s) {
        const double ds = mp.T - s;
        return -mp.beta * std::exp(mp.r * ds) - mp.kappa * expm1_over(mp.r, ds);
    };
    auto p1_at = [&](double s) {
        const double ds = mp.T - s;
        return mp.alpha * std::exp(2.0 * mp.r * ds) + mp.gamma * expm1_over(2.0 * mp.r, ds);
    };
    out.p4 = -0.25 * theta_norm_sq *
             adaptive_simpson([&](double s) { return p3_at(s) * p3_at(s) / p1_at(s); }, t, mp.T,
                              1e-12);
    return out;
}

inline ExplicitPs closed_form_Ps(const MarketParams& mp, double t) {
    return closed_form_Ps(mp, t, relative_risk(mp).cone.theta_norm_sq);
}

/// Value of the portfolio problem at (t, state) from the closed forms.
inline double mv_value(double t, const MeasureState& state, const MarketParams& mp) {
    state.validate();
    const ExplicitPs ps = closed_form_Ps(mp, t);
    return ps.p1 * state.variance + ps.p3 * state.mean + ps.p4;
}

/// Time-deterministic optimal allocation: the projected direction scaled by
/// -P3/(2 P1). Independent of the wealth law because P2 vanishes.
inline Eigen::VectorXd mv_strategy(double t, const MarketParams& mp) {
    const RelativeRisk rr = relative_risk(mp);
    const ExplicitPs ps = closed_form_Ps(mp, t, rr.cone.theta_norm_sq);
    return rr.cone.nubar * (-ps.p3 / (2.0 * ps.p1));
}

struct CapitalMarketLine {
    double lower = 0.0;  ///< e^{rT} X0, earned by the zero strategy
    double upper = 0.0;  ///< terminal mean of the optimal strategy
};

/// Attainable band of expected terminal wealth. The drift bonus of the optimal
/// strategy is p(t) = B . u*(t) = ||thetabar||^2 (-P3/(2 P1)).
inline CapitalMarketLine capital_market_line(const MarketParams& mp) {
    const RelativeRisk rr = relative_risk(mp);
    const double tns = rr.cone.theta_norm_sq;
    auto p_drift = [&](double z) {
        const ExplicitPs ps = closed_form_Ps(mp, z, tns);
        return tns * (-ps.p3 / (2.0 * ps.p1));
    };
    const double growth = std::exp(mp.r * mp.T);
    CapitalMarketLine cml;
    cml.lower = growth * mp.X0;
    cml.upper = growth * (mp.X0 + adaptive_simpson([&](double z) { return p_drift(z) *
                                      std::exp(-mp.r * z); }, 0.0, mp.T, 1e-12));
    return cml;
}

struct EfficientSolution {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> strategy;  ///< u*(t) sampled on times
    std::vector<double> p_path;             ///< drift bonus B . u*(t)
    double value0 = 0.0;                    ///< value at (0, dirac(X0))
    CapitalMarketLine cml;
};

/// Sampled report of the optimal strategy, its value at the initial wealth and
/// the capital market line, for serialization.
inline EfficientSolution efficient_solution(const MarketParams& mp, std::size_t samples = 256) {
    mp.validate();
    if (samples < 2) throw InvalidInput("efficient_solution: need at least 2 samples");
    const RelativeRisk rr = relative_risk(mp);
    const double tns = rr.cone.theta_norm_sq;
    EfficientSolution out;
    out.times.reserve(samples + 1);
    for (std::size_t k = 0; k <= samples; ++k) {
        const double t = mp.T * static_cast<double>(k) / static_cast<double>(samples);
        const ExplicitPs ps = closed_form_Ps(mp, t, tns);
        const double scale = -ps.p3 / (2.0 * ps.p1);
        out.times.push_back(t);
        out.strategy.push_back(rr.cone.nubar * scale);
        out.p_path.push_back(tns * scale);
    }
    out.value0 = mv_value(0.0, MeasureState::dirac(mp.X0), mp);
    out.cml = capital_market_line(mp);
    return out;
}

}  // namespace mckvlq
