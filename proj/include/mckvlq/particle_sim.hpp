#pragma once

// Interacting-particle Monte Carlo for the controlled mean-field dynamics.
// Each particle follows Euler-Maruyama steps whose drift reads the ensemble
// mean (or a deterministic mean path) and whose diffusion is driven entirely
// by the control. Gaussian increments are a pure function of
// (seed, particle, step, component), and every reduction runs in a fixed
// order, so results are bit-identical for any worker-thread count.

#include "mckvlq/cone_qp.hpp"
#include "mckvlq/errors.hpp"
#include "mckvlq/lq_solver.hpp"
#include "mckvlq/numerics.hpp"
#include "mckvlq/ode_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace mckvlq {

using Policy = std::function<Eigen::VectorXd(double t, double mean)>;

namespace policies {

inline Policy zero(Eigen::Index m) {
    return [m](double, double) { return Eigen::VectorXd::Zero(m); };
}

inline Policy optimal(PSystem ps, ConeSolution cone, double tau = kDefaultDeadBand) {
    return [ps = std::move(ps), cone = std::move(cone), tau](double t, double mean) {
        return optimal_control(t, mean, ps, cone, tau);
    };
}

inline Policy scaled(double factor, Policy inner) {
    return [factor, inner = std::move(inner)](double t, double mean) {
        return (factor * inner(t, mean)).eval();
    };
}

}  // namespace policies

enum class MeanMode { Empirical, DeterministicMean };

struct SimConfig {
    std::size_t n_particles = 10000;
    double dt = 0.0;  ///< must divide T - t0 within 1e-12; 0 selects (T - t0)/2048
    std::uint64_t seed = 12345;
    MeanMode mean_mode = MeanMode::Empirical;
    Policy policy;  ///< empty selects the optimal feedback from (ps, cone)
    double x0 = 0.0;
    double dead_band = kDefaultDeadBand;
    unsigned threads = 1;
};

/// Per-batch first and second moment paths; everything the cost functional
/// needs, without retaining individual trajectories.
struct SimPaths {
    std::vector<double> times;
    std::size_t n_particles = 0;
    std::size_t n_batches = 0;
    std::vector<std::vector<double>> batch_sum_x;   ///< [batch][node]
    std::vector<std::vector<double>> batch_sum_xx;  ///< [batch][node]
    std::vector<double> centered_ss;                ///< sum of (x - mean)^2 per node

    double sum_x(std::size_t node) const {
        double s = 0.0;
        for (const auto& b : batch_sum_x) s += b[node];
        return s;
    }
    double sum_xx(std::size_t node) const {
        double s = 0.0;
        for (const auto& b : batch_sum_xx) s += b[node];
        return s;
    }
    double mean(std::size_t node) const {
        return sum_x(node) / static_cast<double>(n_particles);
    }
    double variance(std::size_t node) const {
        return centered_ss[node] / static_cast<double>(n_particles);
    }
};

struct CostEstimate {
    double cost = 0.0;
    double stderr_ = 0.0;
    bool reliable = true;  ///< false below 32 particles, where batch means degenerate
};

struct SimResult {
    std::vector<double> times;
    std::vector<double> mean_path;
    std::vector<double> var_path;
    double cost_estimate = 0.0;
    double cost_stderr = 0.0;
    bool stderr_reliable = true;
    double terminal_mean = 0.0;
    double terminal_var = 0.0;
    SimPaths paths;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<double> values;
};

/// Forward RK4 integration of the mean dynamics under a feedback policy.
inline Trajectory mean_ode(const LQParams& params, const Policy& policy, double x0,
                           std::size_t steps = 2048) {
    params.validate();
    if (steps < 2) throw InvalidInput("mean_ode: need at least 2 steps");
    UniformGrid grid(params.t0, params.T, steps);
    auto rhs = [&](double t, const std::array<double, 1>& y) -> std::array<double, 1> {
        return {(params.A + params.Abar) * y[0] + params.B.dot(policy(t, y[0])) + params.b0};
    };
    Trajectory out;
    out.times.reserve(grid.size());
    out.values.reserve(grid.size());
    std::array<double, 1> y = {x0};
    out.times.push_back(grid.front());
    out.values.push_back(y[0]);
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        y = rk4_step(rhs, grid.point(k), y, grid.step());
        out.times.push_back(grid.point(k + 1));
        out.values.push_back(y[0]);
    }
    return out;
}

inline Trajectory mean_ode(const LQParams& params, const PSystem& ps, const ConeSolution& cone,
                           double x0, std::size_t steps = 2048) {
    return mean_ode(params, policies::optimal(ps, cone), x0, steps);
}

/// Cost functional estimate from batched moment paths, with a batch-means
/// standard error. The squared-mean terms make per-path errors invalid, so
/// each batch contributes one full cost estimate built from its own moments.
inline CostEstimate empirical_cost(const SimPaths& paths, const LQParams& params) {
    if (paths.times.size() < 2 || paths.n_batches == 0)
        throw InvalidInput("empirical_cost: paths are empty");
    const double dt = paths.times[1] - paths.times[0];
    const std::size_t nodes = paths.times.size();

    auto cost_of = [&](const std::function<double(std::size_t)>& mean,
                       const std::function<double(std::size_t)>& m2) {
        std::vector<double> integrand(nodes);
        for (std::size_t k = 0; k < nodes; ++k)
            integrand[k] =
                params.Q1 * m2(k) + params.Q2 * mean(k) * mean(k) + params.Q3 * mean(k);
        const std::size_t last = nodes - 1;
        return params.G1 * m2(last) + params.G2 * mean(last) * mean(last) +
               params.G3 * mean(last) + trapezoid(integrand, dt);
    };

    CostEstimate out;
    out.cost = cost_of([&](std::size_t k) { return paths.mean(k); },
                       [&](std::size_t k) {
                           return paths.sum_xx(k) / static_cast<double>(paths.n_particles);
                       });

    std::vector<double> batch_costs;
    batch_costs.reserve(paths.n_batches);
    for (std::size_t b = 0; b < paths.n_batches; ++b) {
        const std::size_t lo = b * paths.n_particles / paths.n_batches;
        const std::size_t hi = (b + 1) * paths.n_particles / paths.n_batches;
        const auto count = static_cast<double>(hi - lo);
        batch_costs.push_back(
            cost_of([&](std::size_t k) { return paths.batch_sum_x[b][k] / count; },
                    [&](std::size_t k) { return paths.batch_sum_xx[b][k] / count; }));
    }
    if (batch_costs.size() > 1) {
        double m = 0.0;
        for (double c : batch_costs) m += c;
        m /= static_cast<double>(batch_costs.size());
        double ss = 0.0;
        for (double c : batch_costs) ss += (c - m) * (c - m);
        ss /= static_cast<double>(batch_costs.size() - 1);
        out.stderr_ = std::sqrt(ss / static_cast<double>(batch_costs.size()));
    }
    out.reliable = paths.n_particles >= 32;
    return out;
}

namespace detail {

inline std::size_t batch_of(std::size_t i, std::size_t n, std::size_t batches) {
    return i * batches / n;
}

}  // namespace detail

/// Run the particle system under cfg. The empty-policy default is the optimal
/// feedback derived from (ps, cone).
inline SimResult simulate(const LQParams& params, const PSystem& ps, const ConeSolution& cone,
                          const SimConfig& cfg) {
    params.validate();
    const double span = params.T - params.t0;
    const double dt = cfg.dt > 0.0 ? cfg.dt : span / 2048.0;
    const auto steps = static_cast<std::size_t>(std::llround(span / dt));
    if (steps == 0 || std::abs(static_cast<double>(steps) * dt - span) > 1e-12 * std::max(1.0, span))
        throw InvalidInput("simulate: dt must divide T - t0 within 1e-12");
    if (cfg.n_particles == 0) throw InvalidInput("simulate: need at least one particle");
    if (cfg.mean_mode == MeanMode::Empirical && cfg.n_particles < 2)
        throw InvalidInput("simulate: empirical mode needs at least 2 particles");

    const Policy policy =
        cfg.policy ? cfg.policy : policies::optimal(ps, cone, cfg.dead_band);
    const std::size_t n = cfg.n_particles;
    const std::size_t batches = std::min<std::size_t>(16, n);
    const double sqrt_dt = std::sqrt(dt);
    const auto m = static_cast<std::size_t>(params.B.size());

    std::vector<double> mu_det;
    if (cfg.mean_mode == MeanMode::DeterministicMean)
        mu_det = mean_ode(params, policy, cfg.x0, steps).values;

    SimPaths paths;
    paths.times.resize(steps + 1);
    paths.n_particles = n;
    paths.n_batches = batches;
    paths.batch_sum_x.assign(batches, std::vector<double>(steps + 1, 0.0));
    paths.batch_sum_xx.assign(batches, std::vector<double>(steps + 1, 0.0));
    paths.centered_ss.assign(steps + 1, 0.0);

    std::vector<double> x(n, cfg.x0);

    // Fixed-order reduction; also where non-finite states get caught. The
    // variance uses a centered second pass so a noise-free ensemble reports a
    // clean zero instead of moment-cancellation dust.
    auto record_node = [&](std::size_t node) {
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * n / batches;
            const std::size_t hi = (b + 1) * n / batches;
            double sx = 0.0, sxx = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                if (!std::isfinite(x[i]))
                    throw NumericFailure("simulate: non-finite state at step " +
                                         std::to_string(node));
                sx += x[i];
                sxx += x[i] * x[i];
            }
            paths.batch_sum_x[b][node] = sx;
            paths.batch_sum_xx[b][node] = sxx;
        }
        const double mu = paths.sum_x(node) / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (x[i] - mu) * (x[i] - mu);
        paths.centered_ss[node] = ss;
    };

    const unsigned threads = std::max(1u, cfg.threads);
    constexpr std::size_t kBlock = 8192;  // fixed decomposition, independent of threads

    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = params.t0 + static_cast<double>(k) * dt;
        paths.times[k] = t;
        record_node(k);
        if (k == steps) break;

        const double mu_hat = cfg.mean_mode == MeanMode::Empirical
                                  ? paths.sum_x(k) / static_cast<double>(n)
                                  : mu_det[k];
        const Eigen::VectorXd u = policy(t, mu_hat);
        const Eigen::VectorXd du = params.D * u;
        const double drift_const = params.Abar * mu_hat + params.B.dot(u) + params.b0;

        auto step_range = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                double noise = 0.0;
                for (std::size_t j = 0; j < m; ++j)
                    noise += du(static_cast<Eigen::Index>(j)) *
                             counter_gauss(cfg.seed, i, k, j);
                x[i] += (params.A * x[i] + drift_const) * dt + sqrt_dt * noise;
            }
        };

        const std::size_t blocks = (n + kBlock - 1) / kBlock;
        if (threads <= 1 || blocks <= 1) {
            step_range(0, n);
        } else {
            std::vector<std::thread> pool;
            const unsigned workers = static_cast<unsigned>(
                std::min<std::size_t>(threads, blocks));
            pool.reserve(workers);
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    for (std::size_t blk = w; blk < blocks; blk += workers)
                        step_range(blk * kBlock, std::min(n, (blk + 1) * kBlock));
                });
            }
            for (auto& th : pool) th.join();
        }
    }

    SimResult result;
    result.times = paths.times;
    result.mean_path.resize(steps + 1);
    result.var_path.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        result.mean_path[k] = paths.mean(k);
        result.var_path[k] = paths.variance(k);
    }
    result.terminal_mean = result.mean_path.back();
    result.terminal_var = result.var_path.back();
    const CostEstimate cost = empirical_cost(paths, params);
    result.cost_estimate = cost.cost;
    result.cost_stderr = cost.stderr_;
    result.stderr_reliable = cost.reliable;
    result.paths = std::move(paths);
    return result;
}

}  // namespace mckvlq
