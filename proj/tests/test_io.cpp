#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"

#include "mckvlq/io.hpp"

#include <charconv>
#include <sstream>
#include <string>
#include <vector>

using namespace mckvlq;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string cell;
    while (std::getline(in, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

TEST_CASE("shortest round-trip formatting survives reparsing") {
    testsupport::Rng rng(61);
    for (int rep = 0; rep < 2000; ++rep) {
        const double x = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-12.0, 12.0));
        const std::string text = format_double(x);
        double back = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), back);
        CHECK(ec == std::errc());
        CHECK(back == x);
        CHECK(text.find(',') == std::string::npos);  // '.' decimals only
    }
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("grid csv carries both quadruples and marks undefined eta") {
    LQParams p;
    p.A = 0.3;
    p.Abar = 0.1;
    p.Q1 = 0.4;
    p.Q2 = -0.4;
    p.G1 = 1.0;
    p.G2 = -1.0;  // riccati slot identically zero, so eta is undefined
    p.G3 = -0.2;
    p.B = Eigen::VectorXd::Constant(1, 0.5);
    p.D = Eigen::MatrixXd::Identity(1, 1);
    p.T = 1.0;
    const PSystem ps = solve_p_system(p, 0.25, 32);

    std::ostringstream os;
    write_psystem_csv(ps, os);
    const auto rows = lines_of(os.str());
    REQUIRE(rows.size() == 34);
    CHECK(rows[0] == "t,P1,P2,P3,P4,Pt1,Pt2,Pt3,Pt4,eta");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto cells = split(rows[i]);
        REQUIRE(cells.size() == 10);
        CHECK(cells[2] == "0");  // P2
        CHECK(cells[9] == "nan");
    }
    const auto terminal = split(rows.back());
    CHECK(terminal[0] == "1");
    CHECK(terminal[1] == "1");   // G1
    CHECK(terminal[3] == "-0.2");  // G3
    CHECK(terminal[4] == "0");   // P4(T)
}

TEST_CASE("residual rows serialize one control column per asset") {
    std::vector<ResidualRow> rows(2);
    rows[0] = {0.25, -1.0, 2.0, Region::Pi1, 1e-12, Eigen::Vector2d(0.5, 0.0), -3.5};
    rows[1] = {0.5, 1.0, 0.0, Region::Pi2, 0.0, Eigen::Vector2d(0.0, 0.0), 1.25};
    std::ostringstream os;
    write_residuals_csv(rows, 2, os);
    const auto lines = lines_of(os.str());
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "t,mean,var,region,residual,u1,u2,V");
    CHECK(lines[1] == "0.25,-1,2,Pi1,1e-12,0.5,0,-3.5");
    CHECK(lines[2] == "0.5,1,0,Pi2,0,0,0,1.25");
}

TEST_CASE("simulation paths csv matches the recorded trajectories") {
    SimResult res;
    res.times = {0.0, 0.5, 1.0};
    res.mean_path = {1.0, 1.25, 1.5};
    res.var_path = {0.0, 0.125, 0.5};
    std::ostringstream os;
    write_paths_csv(res, os);
    CHECK(os.str() == "t,mean,var\n0,1,0\n0.5,1.25,0.125\n1,1.5,0.5\n");
}

TEST_CASE("strategy csv has one row per sample time") {
    MarketParams mp;
    mp.r = 0.06;
    mp.b = Eigen::VectorXd::Constant(1, 0.12);
    mp.sigma = Eigen::MatrixXd::Constant(1, 1, 0.15);
    mp.alpha = 1.0;
    mp.beta = 1.0;
    mp.X0 = 1.0;
    mp.T = 1.0;
    const EfficientSolution sol = efficient_solution(mp, 16);
    std::ostringstream os;
    write_strategy_csv(sol, os);
    const auto lines = lines_of(os.str());
    REQUIRE(lines.size() == 18);
    CHECK(lines[0] == "t,u1");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split(lines[i]);
        REQUIRE(cells.size() == 2);
        CHECK(std::stod(cells[1]) >= 0.0);
    }
}
