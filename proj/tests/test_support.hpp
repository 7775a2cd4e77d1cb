#pragma once

#include "mckvlq/mckvlq.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace testsupport {

/// Tiny deterministic generator on top of the library's counter hash, so test
/// fixtures reproduce identically on every platform and stdlib.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mckvlq::mix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

    double uniform() {  // in (0, 1]
        state_ = mckvlq::mix64(state_);
        return mckvlq::hash_to_unit(state_);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gauss() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

inline mckvlq::ConeProblem random_cone_problem(Rng& rng, int m) {
    while (true) {
        Eigen::MatrixXd d(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                d(i, j) = (i == j ? 1.0 : 0.0) + 0.45 * rng.gauss();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
        if (svd.singularValues().minCoeff() < 0.2) continue;
        Eigen::VectorXd b(m);
        for (int i = 0; i < m; ++i) b(i) = std::abs(rng.gauss());
        return {d, b};
    }
}

/// Random coefficients satisfying the standing sign conditions plus the
/// ordering-check hypotheses Q1 >= 0, G3 <= 0, A >= 0.
inline mckvlq::LQParams random_lq_params(Rng& rng, int m) {
    mckvlq::LQParams p;
    const mckvlq::ConeProblem cone = random_cone_problem(rng, m);
    p.D = cone.D;
    p.B = cone.B;
    p.A = rng.uniform(0.0, 0.8);
    p.Abar = rng.uniform(0.0, 0.5);
    p.b0 = rng.uniform(-0.3, 0.3);
    p.Q1 = rng.uniform(0.0, 1.0);
    p.Q2 = rng.uniform(-p.Q1, 1.0);
    p.Q3 = -rng.uniform(0.0, 0.5);
    p.G1 = rng.uniform(0.2, 2.0);
    p.G2 = rng.uniform(-p.G1, 1.5);
    p.G3 = -rng.uniform(0.0, 1.0);
    p.T = rng.uniform(0.5, 1.5);
    p.t0 = 0.0;
    return p;
}

}  // namespace testsupport
