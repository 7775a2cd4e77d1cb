// Minimal walkthrough: set up a two-asset market with short-selling
// prohibited, inspect the projected market direction, print the optimal
// allocation at a few dates and check the closed-form value against a
// particle simulation.

#include "mckvlq/mckvlq.hpp"

#include <cstdio>

using namespace mckvlq;

int main() {
    MarketParams market;
    market.r = 0.03;
    market.b = Eigen::Vector2d(0.08, 0.06);
    market.sigma = Eigen::MatrixXd(2, 2);
    market.sigma << 0.20, 0.05, -0.04, 0.25;
    market.alpha = 1.0;   // terminal variance weight
    market.beta = 0.8;    // terminal mean reward
    market.X0 = 1.0;
    market.T = 1.0;

    const RelativeRisk rr = relative_risk(market);
    std::printf("relative risk theta      = (%.6f, %.6f)\n", rr.theta(0), rr.theta(1));
    std::printf("projected direction      = (%.6f, %.6f), |theta_bar|^2 = %.6f\n",
                rr.cone.thetabar(0), rr.cone.thetabar(1), rr.cone.theta_norm_sq);

    for (double t : {0.0, 0.5, 0.9}) {
        const Eigen::VectorXd u = mv_strategy(t, market);
        std::printf("t = %.2f  allocation = (%.6f, %.6f)\n", t, u(0), u(1));
    }

    const double v0 = mv_value(0.0, MeasureState::dirac(market.X0), market);
    const CapitalMarketLine cml = capital_market_line(market);
    std::printf("value at (0, X0)         = %.8f\n", v0);
    std::printf("terminal mean band       = [%.8f, %.8f]\n", cml.lower, cml.upper);

    const LQParams lq = to_lq(market);
    const PSystem ps = solve_p_system(lq, rr.cone.theta_norm_sq, 1024);
    SimConfig cfg;
    cfg.n_particles = 20000;
    cfg.dt = market.T / 1024;
    cfg.seed = 2024;
    cfg.x0 = market.X0;
    const SimResult sim = simulate(lq, ps, rr.cone, cfg);
    std::printf("simulated cost           = %.8f +- %.8f (closed form %.8f)\n",
                sim.cost_estimate, sim.cost_stderr, v0);
    std::printf("simulated terminal mean  = %.8f\n", sim.terminal_mean);
    return 0;
}
