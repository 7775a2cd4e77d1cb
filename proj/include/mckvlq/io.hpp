#pragma once

// Plot-ready CSV serialization. All files use '.' decimals, ',' separators,
// a header row and LF line endings, with shortest round-trip number text.

#include "mckvlq/finance.hpp"
#include "mckvlq/lq_solver.hpp"
#include "mckvlq/numerics.hpp"
#include "mckvlq/ode_engine.hpp"
#include "mckvlq/particle_sim.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace mckvlq {

inline void write_psystem_csv(const PSystem& ps, std::ostream& os) {
    os << "t,P1,P2,P3,P4,Pt1,Pt2,Pt3,Pt4,eta\n";
    for (std::size_t k = 0; k < ps.grid.size(); ++k) {
        os << format_double(ps.grid.point(k));
        for (int i = 0; i < 4; ++i) os << ',' << format_double(ps.p[i][k]);
        for (int i = 0; i < 4; ++i) os << ',' << format_double(ps.pt[i][k]);
        os << ',' << format_double(ps.eta[k]) << '\n';
    }
}

struct ResidualRow {
    double t = 0.0;
    double mean = 0.0;
    double var = 0.0;
    Region region = Region::Pi3;
    double residual = 0.0;
    Eigen::VectorXd u_star;
    double value = 0.0;
};

inline void write_residuals_csv(const std::vector<ResidualRow>& rows, Eigen::Index m,
                                std::ostream& os) {
    os << "t,mean,var,region,residual";
    for (Eigen::Index j = 0; j < m; ++j) os << ",u" << (j + 1);
    os << ",V\n";
    for (const auto& row : rows) {
        os << format_double(row.t) << ',' << format_double(row.mean) << ','
           << format_double(row.var) << ',' << region_name(row.region) << ','
           << format_double(row.residual);
        for (Eigen::Index j = 0; j < m; ++j) os << ',' << format_double(row.u_star(j));
        os << ',' << format_double(row.value) << '\n';
    }
}

inline void write_paths_csv(const SimResult& result, std::ostream& os) {
    os << "t,mean,var\n";
    for (std::size_t k = 0; k < result.times.size(); ++k)
        os << format_double(result.times[k]) << ',' << format_double(result.mean_path[k]) << ','
           << format_double(result.var_path[k]) << '\n';
}

inline void write_strategy_csv(const EfficientSolution& sol, std::ostream& os) {
    const Eigen::Index m = sol.strategy.empty() ? 0 : sol.strategy.front().size();
    os << "t";
    for (Eigen::Index j = 0; j < m; ++j) os << ",u" << (j + 1);
    os << '\n';
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        os << format_double(sol.times[k]);
        for (Eigen::Index j = 0; j < m; ++j) os << ',' << format_double(sol.strategy[k](j));
        os << '\n';
    }
}

}  // namespace mckvlq
