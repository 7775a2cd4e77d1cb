#pragma once

// Nonnegative-orthant quadratic minimizations behind the constrained feedback
// direction. Two closely related problems live here:
//
//   s(z) = 1/2 || (D')^{-1} z + (D')^{-1} B ||^2          over z >= 0
//   h(u) = 1/2 u' D'D u - alpha B.u                       over u >= 0
//
// The minimizer zbar of s yields the projected direction
// thetabar = (D')^{-1} (zbar + B), and for alpha > 0 the minimizer of h is
// alpha * D^{-1} thetabar with minimum -1/2 alpha^2 ||thetabar||^2. The KKT
// multiplier of the s-problem, nubar = (D'D)^{-1} (zbar + B), coincides with
// D^{-1} thetabar, so the feedback direction is nonnegative by construction.

#include "mckvlq/errors.hpp"
#include "mckvlq/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mckvlq {

struct ConeProblem {
    Eigen::MatrixXd D;  ///< m x m diffusion loading, row j multiplies dW^j
    Eigen::VectorXd B;  ///< m drift loading, entries >= 0

    Eigen::Index dim() const { return B.size(); }

    void validate() const {
        if (D.rows() != D.cols()) throw InvalidInput("cone_qp: D must be square");
        if (D.rows() != B.size()) throw InvalidInput("cone_qp: D and B dimensions disagree");
        if (B.size() == 0) throw InvalidInput("cone_qp: empty problem");
        if (!D.allFinite() || !B.allFinite()) throw InvalidInput("cone_qp: non-finite entries");
        if ((B.array() < 0.0).any())
            throw InvalidInput("cone_qp: B must be componentwise nonnegative");
        const Eigen::MatrixXd g = gram();
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        const double min_pivot =
            llt.info() == Eigen::Success ? llt.matrixLLT().diagonal().minCoeff() : 0.0;
        if (llt.info() != Eigen::Success ||
            min_pivot * min_pivot <= 1e-12 * g.diagonal().maxCoeff())
            throw InvalidInput("cone_qp: Cholesky of D'D failed, matrix is not positive definite");
    }

    Eigen::MatrixXd gram() const { return D.transpose() * D; }
};

struct ConeSolution {
    Eigen::VectorXd zbar;      ///< minimizer of s, componentwise >= 0
    Eigen::VectorXd nubar;     ///< multiplier (D'D)^{-1}(zbar + B), also D^{-1} thetabar
    Eigen::VectorXd thetabar;  ///< projected direction (D')^{-1}(zbar + B)
    double s_min = 0.0;        ///< minimum of s, equals theta_norm_sq / 2
    double theta_norm_sq = 0.0;
};

struct KktReport {
    double stationarity = 0.0;     ///< || nubar - (D'D)^{-1}(zbar + B) ||_inf
    double primal = 0.0;           ///< violation of zbar >= 0
    double dual = 0.0;             ///< violation of nubar >= 0
    double complementarity = 0.0;  ///< | nubar . zbar |
    double tol = 0.0;
    bool pass = false;

    double max_residual() const {
        return std::max(std::max(stationarity, primal), std::max(dual, complementarity));
    }
};

/// s evaluated at an arbitrary cone point, for oracle-style comparisons.
inline double s_value(const ConeProblem& problem, const Eigen::VectorXd& z) {
    Eigen::VectorXd w = problem.D.transpose().partialPivLu().solve(z + problem.B);
    return 0.5 * w.squaredNorm();
}

/// h evaluated at an arbitrary cone point.
inline double h_value(const ConeProblem& problem, double alpha, const Eigen::VectorXd& u) {
    return 0.5 * u.dot(problem.gram() * u) - alpha * problem.B.dot(u);
}

/// Minimize s over the nonnegative orthant by a primal active-set iteration.
///
/// The quadratic is 1/2 (z+B)' M (z+B) with M = (D'D)^{-1}, so the working-set
/// subproblems are tiny SPD solves. Iteration starts from the unconstrained
/// stationary point -B clipped to the cone and adds at most 3m coordinates to
/// the free set before giving up.
inline ConeSolution solve_cone_projection(const ConeProblem& problem) {
    problem.validate();
    const Eigen::Index m = problem.dim();

    const Eigen::MatrixXd gram = problem.gram();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const Eigen::MatrixXd M = llt.solve(Eigen::MatrixXd::Identity(m, m));
    const Eigen::VectorXd c = M * problem.B;

    Eigen::VectorXd z = (-problem.B).cwiseMax(0.0);
    std::vector<bool> free_set(static_cast<std::size_t>(m), false);

    const double mult_slack = 1e-12 * (1.0 + c.lpNorm<Eigen::Infinity>());
    const Eigen::Index max_activations = 3 * m;

    auto subsolve = [&](Eigen::VectorXd& out) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < m; ++i)
            if (free_set[static_cast<std::size_t>(i)]) idx.push_back(i);
        if (idx.empty()) return;
        const auto n = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd Mff(n, n);
        Eigen::VectorXd cf(n);
        for (Eigen::Index a = 0; a < n; ++a) {
            cf(a) = c(idx[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < n; ++b)
                Mff(a, b) = M(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
        Eigen::VectorXd zf = Eigen::LLT<Eigen::MatrixXd>(Mff).solve(-cf);
        for (Eigen::Index a = 0; a < n; ++a) out(idx[static_cast<std::size_t>(a)]) = zf(a);
    };

    Eigen::Index activations = 0;
    while (true) {
        const Eigen::VectorXd grad = M * z + c;
        Eigen::Index entering = -1;
        double worst = -mult_slack;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!free_set[static_cast<std::size_t>(i)] && grad(i) < worst) {
                worst = grad(i);
                entering = i;
            }
        }
        if (entering < 0) break;  // KKT holds on the current working set

        if (++activations > max_activations)
            throw Nonconvergence("cone_qp: active-set iteration cap exceeded", z);
        free_set[static_cast<std::size_t>(entering)] = true;

        while (true) {
            Eigen::VectorXd zhat = Eigen::VectorXd::Zero(m);
            subsolve(zhat);
            bool feasible = true;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (free_set[static_cast<std::size_t>(i)] && zhat(i) < 0.0) feasible = false;
            }
            if (feasible) {
                z = zhat.cwiseMax(0.0);
                break;
            }
            // Step toward the subproblem solution until a coordinate hits zero.
            double step = 1.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (!free_set[static_cast<std::size_t>(i)] || zhat(i) >= 0.0) continue;
                const double denom = z(i) - zhat(i);
                if (denom > 0.0) step = std::min(step, z(i) / denom);
            }
            for (Eigen::Index i = 0; i < m; ++i)
                if (free_set[static_cast<std::size_t>(i)]) z(i) += step * (zhat(i) - z(i));
            for (Eigen::Index i = 0; i < m; ++i) {
                if (free_set[static_cast<std::size_t>(i)] && z(i) <= 0.0) {
                    z(i) = 0.0;
                    free_set[static_cast<std::size_t>(i)] = false;
                }
            }
        }
    }

    ConeSolution sol;
    sol.zbar = z;
    sol.nubar = llt.solve(z + problem.B);
    sol.thetabar = problem.D.transpose().partialPivLu().solve(z + problem.B);
    sol.theta_norm_sq = sol.thetabar.squaredNorm();
    sol.s_min = 0.5 * sol.theta_norm_sq;
    return sol;
}

struct HMinimum {
    Eigen::VectorXd ustar;
    double h_min = 0.0;
};

/// Minimize h over the cone given a precomputed projection. For alpha <= 0 the
/// origin is the minimizer; alpha = 0 is the degenerate boundary where h >= 0
/// on the cone with h(0) = 0, so the origin is returned there as well.
inline HMinimum minimize_h(const ConeSolution& sol, double alpha) {
    HMinimum out;
    if (alpha > 0.0) {
        out.ustar = alpha * sol.nubar;
        out.h_min = -0.5 * alpha * alpha * sol.theta_norm_sq;
    } else {
        out.ustar = Eigen::VectorXd::Zero(sol.nubar.size());
        out.h_min = 0.0;
    }
    return out;
}

inline HMinimum minimize_h(const ConeProblem& problem, double alpha) {
    return minimize_h(solve_cone_projection(problem), alpha);
}

struct GridSpec {
    double hi = 4.0;     ///< per-coordinate upper bound, lower bound is 0
    double step = 1e-3;  ///< grid spacing
};

/// Exhaustive grid minimization of h, used only to certify minimize_h within
/// grid resolution. Restricted to m <= 4 and a bounded point budget.
inline HMinimum brute_force_cone_min(const ConeProblem& problem, double alpha,
                                     const GridSpec& grid) {
    problem.validate();
    const Eigen::Index m = problem.dim();
    if (m > 4) throw InvalidInput("brute_force_cone_min: only m <= 4 is supported");
    if (!(grid.step > 0.0) || !(grid.hi >= 0.0) || !std::isfinite(grid.hi))
        throw InvalidInput("brute_force_cone_min: grid bounds must be finite and positive");

    const auto points = static_cast<std::uint64_t>(std::floor(grid.hi / grid.step)) + 1;
    std::uint64_t total = 1;
    for (Eigen::Index i = 0; i < m; ++i) {
        total *= points;
        if (total > 200'000'000ULL)
            throw InvalidInput("brute_force_cone_min: grid too large, reduce resolution");
    }

    const Eigen::MatrixXd gram = problem.gram();
    double k[4][4] = {};
    double bvec[4] = {};
    for (Eigen::Index i = 0; i < m; ++i) {
        bvec[i] = problem.B(i);
        for (Eigen::Index j = 0; j < m; ++j) k[i][j] = gram(i, j);
    }

    double u[4] = {};
    double best_u[4] = {};
    double best_h = 0.0;
    std::uint64_t odo[4] = {};
    for (std::uint64_t n = 0; n < total; ++n) {
        double quad = 0.0, lin = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            double row = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) row += k[i][j] * u[j];
            quad += u[i] * row;
            lin += bvec[i] * u[i];
        }
        const double h = 0.5 * quad - alpha * lin;
        if (h < best_h) {
            best_h = h;
            for (Eigen::Index i = 0; i < m; ++i) best_u[i] = u[i];
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            if (++odo[i] < points) {
                u[i] = static_cast<double>(odo[i]) * grid.step;
                break;
            }
            odo[i] = 0;
            u[i] = 0.0;
        }
    }
    Eigen::VectorXd best(m);
    for (Eigen::Index i = 0; i < m; ++i) best(i) = best_u[i];
    return {best, best_h};
}

/// Residuals of the Kuhn-Tucker system at a candidate solution. Report only;
/// never throws.
inline KktReport verify_kkt(const ConeProblem& problem, const ConeSolution& sol, double tol) {
    KktReport report;
    report.tol = tol;
    Eigen::LLT<Eigen::MatrixXd> llt(problem.gram());
    const Eigen::VectorXd grad = llt.solve(sol.zbar + problem.B);
    report.stationarity = (sol.nubar - grad).lpNorm<Eigen::Infinity>();
    report.primal = std::max(0.0, -sol.zbar.minCoeff());
    report.dual = std::max(0.0, -sol.nubar.minCoeff());
    report.complementarity = std::abs(sol.nubar.dot(sol.zbar));
    report.pass = report.max_residual() <= tol;
    return report;
}

}  // namespace mckvlq
