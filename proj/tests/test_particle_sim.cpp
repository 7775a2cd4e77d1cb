#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"

#include "mckvlq/finance.hpp"
#include "mckvlq/particle_sim.hpp"

#include <cmath>
#include <limits>

using namespace mckvlq;

namespace {

struct FinanceFixture {
    MarketParams mp;
    LQParams lq;
    ConeSolution cone;
    PSystem ps;

    explicit FinanceFixture(double beta = 1.0, std::size_t steps = 512) {
        mp.r = 0.06;
        mp.b = Eigen::VectorXd::Constant(1, 0.12);
        mp.sigma = Eigen::MatrixXd::Constant(1, 1, 0.15);
        mp.alpha = 1.0;
        mp.beta = beta;
        mp.X0 = 1.0;
        mp.T = 1.0;
        lq = to_lq(mp);
        cone = relative_risk(mp).cone;
        ps = solve_p_system(lq, cone.theta_norm_sq, steps);
    }
};

SimConfig base_config(std::size_t n, double dt, std::uint64_t seed) {
    SimConfig cfg;
    cfg.n_particles = n;
    cfg.dt = dt;
    cfg.seed = seed;
    cfg.x0 = 1.0;
    return cfg;
}

}  // namespace

TEST_CASE("zero policy with deterministic start is noise-free") {
    FinanceFixture fx;
    SimConfig cfg = base_config(64, 1.0 / 512, 7);
    cfg.policy = policies::zero(1);
    const SimResult res = simulate(fx.lq, fx.ps, fx.cone, cfg);

    REQUIRE(res.times.size() == 513);
    for (double v : res.var_path) {
        CHECK(v >= 0.0);
        CHECK(v <= 1e-25);
    }
    CHECK(res.cost_stderr <= 1e-15);

    // The drift propagation replicates the scalar Euler recursion up to the
    // rounding of the ensemble average, and sits within the first-order bound
    // of the exponential flow.
    double y = cfg.x0;
    for (int k = 0; k < 512; ++k) y += fx.lq.A * y * cfg.dt;
    CHECK(std::abs(res.terminal_mean - y) <= 4e-16 * std::abs(y));
    const double euler_gap_bound = cfg.x0 * std::exp(0.06) * 0.06 * 0.06 * 1.0 * cfg.dt;
    CHECK(std::abs(res.terminal_mean - cfg.x0 * std::exp(0.06)) <= euler_gap_bound);
}

TEST_CASE("identical configuration reproduces bit-identical results") {
    FinanceFixture fx;
    SimConfig cfg = base_config(4000, 1.0 / 256, 42);
    const SimResult a = simulate(fx.lq, fx.ps, fx.cone, cfg);
    const SimResult b = simulate(fx.lq, fx.ps, fx.cone, cfg);
    CHECK(a.mean_path == b.mean_path);
    CHECK(a.var_path == b.var_path);
    CHECK(a.cost_estimate == b.cost_estimate);
    CHECK(a.cost_stderr == b.cost_stderr);

    cfg.seed = 43;
    const SimResult c = simulate(fx.lq, fx.ps, fx.cone, cfg);
    CHECK(a.cost_estimate != c.cost_estimate);
}

TEST_CASE("worker-thread count never changes the output") {
    FinanceFixture fx;
    SimConfig cfg = base_config(40000, 1.0 / 128, 9001);
    cfg.threads = 1;
    const SimResult serial = simulate(fx.lq, fx.ps, fx.cone, cfg);
    for (unsigned threads : {2u, 4u, 7u}) {
        cfg.threads = threads;
        const SimResult parallel = simulate(fx.lq, fx.ps, fx.cone, cfg);
        CHECK(serial.mean_path == parallel.mean_path);
        CHECK(serial.var_path == parallel.var_path);
        CHECK(serial.cost_estimate == parallel.cost_estimate);
    }
}

TEST_CASE("degenerate cost weights") {
    FinanceFixture fx;
    LQParams zero_weights = fx.lq;
    zero_weights.G1 = 1e-300;  // validation wants G1 > 0; the limit case in spirit
    zero_weights.G2 = 0.0;
    zero_weights.G3 = 0.0;
    SimConfig cfg = base_config(256, 1.0 / 64, 5);
    cfg.policy = policies::zero(1);
    const SimResult res = simulate(zero_weights, fx.ps, fx.cone, cfg);
    CHECK(std::abs(res.cost_estimate) <= 1e-290);
    CHECK(res.cost_stderr <= 1e-290);

    // Pure terminal second moment under the zero policy: deterministic square.
    LQParams second_moment = fx.lq;
    second_moment.G2 = 0.0;
    second_moment.G3 = 0.0;
    const SimResult sq = simulate(second_moment, fx.ps, fx.cone, cfg);
    CHECK(std::abs(sq.cost_estimate - sq.terminal_mean * sq.terminal_mean) <= 1e-12);
}

TEST_CASE("empirical and deterministic-mean couplings agree within noise") {
    // Coupled instance: the mean feeds both the drift and the feedback.
    LQParams p;
    p.A = 0.4;
    p.Abar = 0.2;
    p.Q1 = 0.3;
    p.Q2 = 0.0;
    p.Q3 = -0.1;
    p.B = Eigen::VectorXd::Constant(1, 0.5);
    p.D = Eigen::MatrixXd::Constant(1, 1, 0.8);
    p.G1 = 1.0;
    p.G2 = -0.5;
    p.G3 = -0.5;
    p.b0 = 0.1;
    p.T = 1.0;
    const ConeSolution cone = solve_cone_projection(p.cone_problem());
    const PSystem ps = solve_p_system(p, cone.theta_norm_sq, 256);

    SimConfig cfg = base_config(10000, 1.0 / 256, 77);
    cfg.x0 = -1.0;  // the feedback is active on the negative side
    cfg.mean_mode = MeanMode::Empirical;
    const SimResult emp = simulate(p, ps, cone, cfg);
    cfg.mean_mode = MeanMode::DeterministicMean;
    const SimResult det = simulate(p, ps, cone, cfg);

    const auto n = static_cast<double>(cfg.n_particles);
    const double se_emp = std::sqrt(emp.terminal_var / n);
    const double se_det = std::sqrt(det.terminal_var / n);
    const double combined = std::sqrt(se_emp * se_emp + se_det * se_det);
    CHECK(std::abs(emp.terminal_mean - det.terminal_mean) <= 3.0 * combined + 1e-12);
}

TEST_CASE("cost estimate converges to the closed-form value like one over sqrt(n)") {
    FinanceFixture fx(1.0, 256);
    const double v0 = mv_value(0.0, MeasureState::dirac(1.0), fx.mp);

    const int reps = 16;
    std::vector<double> log_n, log_err;
    for (std::size_t n : {128u, 256u, 512u, 1024u, 2048u, 4096u}) {
        double acc = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            SimConfig cfg = base_config(n, 1.0 / 256, 1000 + 17 * rep);
            const SimResult res = simulate(fx.lq, fx.ps, fx.cone, cfg);
            acc += std::abs(res.cost_estimate - v0);
        }
        log_n.push_back(std::log2(static_cast<double>(n)));
        log_err.push_back(std::log2(acc / reps));
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto pts = static_cast<double>(log_n.size());
    for (std::size_t i = 0; i < log_n.size(); ++i) {
        sx += log_n[i];
        sy += log_err[i];
        sxx += log_n[i] * log_n[i];
        sxy += log_n[i] * log_err[i];
    }
    const double slope = (sxy - sx * sy / pts) / (sxx - sx * sx / pts);
    CAPTURE(slope);
    CHECK(slope <= -0.3);
    CHECK(slope >= -0.7);
}

TEST_CASE("cost estimate matches the value within monte carlo error") {
    FinanceFixture fx(1.0, 512);
    SimConfig cfg = base_config(20000, 1.0 / 512, 20240813);
    const SimResult res = simulate(fx.lq, fx.ps, fx.cone, cfg);
    const double v0 = mv_value(0.0, MeasureState::dirac(1.0), fx.mp);
    CHECK(res.stderr_reliable);
    CHECK(res.cost_stderr > 0.0);
    CHECK(std::abs(res.cost_estimate - v0) <= 3.0 * res.cost_stderr);
}

TEST_CASE("terminal mean containment for admissible policies") {
    FinanceFixture fx(1.0, 512);
    const auto cml = capital_market_line(fx.mp);
    const Policy optimal = policies::optimal(fx.ps, fx.cone);
    const auto n = 20000u;

    for (double scale : {0.0, 0.5, 0.9, 1.0}) {
        SimConfig cfg = base_config(n, 1.0 / 512, 31 + static_cast<std::uint64_t>(scale * 100));
        cfg.policy = policies::scaled(scale, optimal);
        const SimResult res = simulate(fx.lq, fx.ps, fx.cone, cfg);
        const double se = std::sqrt(std::max(res.terminal_var, 0.0) / n);
        CHECK(res.terminal_mean >= cml.lower - 3.0 * se - 1e-5);
        CHECK(res.terminal_mean <= cml.upper + 3.0 * se + 1e-5);
    }

    // Over-leveraged admissible policies still respect the lower bound.
    SimConfig cfg = base_config(n, 1.0 / 512, 313);
    cfg.policy = policies::scaled(2.0, optimal);
    const SimResult res = simulate(fx.lq, fx.ps, fx.cone, cfg);
    const double se = std::sqrt(std::max(res.terminal_var, 0.0) / n);
    CHECK(res.terminal_mean >= cml.lower - 3.0 * se - 1e-5);
    CHECK(res.terminal_mean >= cml.upper);  // strictly beyond the optimal-drift bonus
}

TEST_CASE("mean dynamics under simple policies") {
    FinanceFixture fx;

    const Trajectory coast = mean_ode(fx.lq, policies::zero(1), 1.0, 512);
    double worst = 0.0;
    for (std::size_t k = 0; k < coast.times.size(); ++k)
        worst = std::max(worst,
                         std::abs(coast.values[k] - std::exp(fx.lq.A * coast.times[k])));
    CHECK(worst <= 1e-10);

    LQParams drift_only = fx.lq;
    drift_only.B = Eigen::VectorXd::Zero(1);
    drift_only.Abar = 0.14;
    const Trajectory pure = mean_ode(drift_only, policies::zero(1), 2.0, 512);
    CHECK(std::abs(pure.values.back() - 2.0 * std::exp(0.2)) <= 1e-9);

    const Trajectory steered = mean_ode(fx.lq, fx.ps, fx.cone, fx.mp.X0, 512);
    const auto cml = capital_market_line(fx.mp);
    CHECK(steered.values.back() >= cml.lower - 1e-9);
    CHECK(steered.values.back() <= cml.upper + 1e-6);
}

TEST_CASE("small ensembles flag the error estimate as unreliable") {
    FinanceFixture fx;
    SimConfig small = base_config(16, 1.0 / 64, 3);
    CHECK_FALSE(simulate(fx.lq, fx.ps, fx.cone, small).stderr_reliable);
    SimConfig larger = base_config(64, 1.0 / 64, 3);
    CHECK(simulate(fx.lq, fx.ps, fx.cone, larger).stderr_reliable);
}

TEST_CASE("invalid configurations and numeric failures") {
    FinanceFixture fx;
    SimConfig cfg = base_config(100, 0.3, 1);  // does not divide the horizon
    CHECK_THROWS_AS(simulate(fx.lq, fx.ps, fx.cone, cfg), InvalidInput);

    cfg = base_config(1, 1.0 / 64, 1);
    cfg.mean_mode = MeanMode::Empirical;
    CHECK_THROWS_AS(simulate(fx.lq, fx.ps, fx.cone, cfg), InvalidInput);

    cfg = base_config(64, 1.0 / 64, 1);
    cfg.policy = [](double, double) {
        return Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
    };
    CHECK_THROWS_AS(simulate(fx.lq, fx.ps, fx.cone, cfg), NumericFailure);
}
