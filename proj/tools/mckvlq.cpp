// Command-line front end: declarative problem files in, plot-ready CSV and
// JSON artifacts out. Exit codes: 0 ok, 1 check failed, 2 invalid input,
// 3 numeric failure.

#include "mckvlq/mckvlq.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mckvlq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitNumericFailure = 3;

// ---------------------------------------------------------------------------
// Problem file: one human-editable key = value document per run. Vectors are
// whitespace separated, matrix rows are separated by ';'. '#' starts a
// comment. Unknown keys are rejected.
// ---------------------------------------------------------------------------

struct Numerics {
    std::size_t steps = 2048;
    std::size_t particles = 10000;
    double dt = 0.0;  // 0 selects (T - t0) / steps
    std::uint64_t seed = 12345;
    double tolerance = 1e-6;
    double dead_band = 1e-9;
};

struct ProblemFile {
    enum class Kind { Lq, Finance } kind = Kind::Lq;
    LQParams lq;          // populated for both kinds (finance goes through to_lq)
    MarketParams market;  // meaningful only for the finance kind
    double x0 = 1.0;
    Numerics numerics;
    std::string policy = "optimal";
    std::vector<std::array<double, 3>> probes;
    std::vector<std::pair<std::string, std::string>> entries;  // declared order
};

double parse_scalar(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    double v = 0.0;
    if (!(in >> v) || !(in >> std::ws).eof())
        throw InvalidInput("config: key '" + key + "' expects one number, got '" + text + "'");
    return v;
}

Eigen::VectorXd parse_vector(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    std::vector<double> vals;
    double v;
    while (in >> v) vals.push_back(v);
    if (vals.empty() || !(in >> std::ws).eof())
        throw InvalidInput("config: key '" + key + "' expects numbers, got '" + text + "'");
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Eigen::MatrixXd parse_matrix(const std::string& key, const std::string& text) {
    std::vector<Eigen::VectorXd> rows;
    std::string row;
    std::istringstream in(text);
    while (std::getline(in, row, ';')) rows.push_back(parse_vector(key, row));
    if (rows.empty()) throw InvalidInput("config: key '" + key + "' expects a matrix");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols())
            throw InvalidInput("config: key '" + key + "' has ragged matrix rows");
        m.row(static_cast<Eigen::Index>(i)) = rows[i];
    }
    return m;
}

std::uint64_t parse_seed(const std::string& text) {
    std::istringstream in(text);
    std::uint64_t v = 0;
    if (!(in >> v) || !(in >> std::ws).eof())
        throw InvalidInput("config: key 'seed' expects an unsigned integer");
    return v;
}

std::string trim(const std::string& s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return "";
    const auto to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
}

ProblemFile load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("config: cannot open '" + path + "'");

    ProblemFile file;
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput("config: expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InvalidInput("config: empty key or value in '" + line + "'");
        file.entries.emplace_back(key, value);
        if (key == "probe") {
            const Eigen::VectorXd p = parse_vector(key, value);
            if (p.size() != 3)
                throw InvalidInput("config: 'probe' expects 't mean var'");
            file.probes.push_back({p(0), p(1), p(2)});
            continue;
        }
        if (kv.count(key)) throw InvalidInput("config: duplicate key '" + key + "'");
        kv[key] = value;
    }

    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    const auto kind = take("kind");
    if (!kind) throw InvalidInput("config: missing 'kind' (lq | finance)");
    if (*kind == "lq")
        file.kind = ProblemFile::Kind::Lq;
    else if (*kind == "finance")
        file.kind = ProblemFile::Kind::Finance;
    else
        throw InvalidInput("config: unknown kind '" + *kind + "'");

    if (auto v = take("steps")) {
        const double s = parse_scalar("steps", *v);
        if (s < 16 || s != std::floor(s)) throw InvalidInput("config: steps must be an integer >= 16");
        file.numerics.steps = static_cast<std::size_t>(s);
    }
    if (auto v = take("particles")) {
        const double s = parse_scalar("particles", *v);
        if (s < 1 || s != std::floor(s)) throw InvalidInput("config: particles must be a positive integer");
        file.numerics.particles = static_cast<std::size_t>(s);
    }
    if (auto v = take("dt")) file.numerics.dt = parse_scalar("dt", *v);
    if (auto v = take("seed")) file.numerics.seed = parse_seed(*v);
    if (auto v = take("tolerance")) file.numerics.tolerance = parse_scalar("tolerance", *v);
    if (auto v = take("dead_band")) file.numerics.dead_band = parse_scalar("dead_band", *v);
    if (auto v = take("policy")) file.policy = *v;
    if (auto v = take("x0")) file.x0 = parse_scalar("x0", *v);

    if (file.kind == ProblemFile::Kind::Finance) {
        MarketParams mp;
        if (auto v = take("r")) mp.r = parse_scalar("r", *v);
        if (auto v = take("b")) mp.b = parse_vector("b", *v);
        if (auto v = take("sigma")) mp.sigma = parse_matrix("sigma", *v);
        if (auto v = take("alpha")) mp.alpha = parse_scalar("alpha", *v);
        if (auto v = take("beta")) mp.beta = parse_scalar("beta", *v);
        if (auto v = take("gamma")) mp.gamma = parse_scalar("gamma", *v);
        if (auto v = take("kappa")) mp.kappa = parse_scalar("kappa", *v);
        if (auto v = take("T")) mp.T = parse_scalar("T", *v);
        if (auto v = take("X0")) mp.X0 = parse_scalar("X0", *v);
        file.market = mp;
        file.x0 = mp.X0;
        file.lq = to_lq(mp);
    } else {
        LQParams p;
        if (auto v = take("A")) p.A = parse_scalar("A", *v);
        if (auto v = take("Abar")) p.Abar = parse_scalar("Abar", *v);
        if (auto v = take("B")) p.B = parse_vector("B", *v);
        if (auto v = take("b0")) p.b0 = parse_scalar("b0", *v);
        if (auto v = take("D")) p.D = parse_matrix("D", *v);
        if (auto v = take("Q1")) p.Q1 = parse_scalar("Q1", *v);
        if (auto v = take("Q2")) p.Q2 = parse_scalar("Q2", *v);
        if (auto v = take("Q3")) p.Q3 = parse_scalar("Q3", *v);
        if (auto v = take("G1")) p.G1 = parse_scalar("G1", *v);
        if (auto v = take("G2")) p.G2 = parse_scalar("G2", *v);
        if (auto v = take("G3")) p.G3 = parse_scalar("G3", *v);
        if (auto v = take("T")) p.T = parse_scalar("T", *v);
        if (auto v = take("t0")) p.t0 = parse_scalar("t0", *v);
        if (p.B.size() == 0) throw InvalidInput("config: lq kind requires B");
        if (p.D.size() == 0) throw InvalidInput("config: lq kind requires D");
        p.validate();
        file.lq = p;
    }

    if (!kv.empty()) throw InvalidInput("config: unknown key '" + kv.begin()->first + "'");
    return file;
}

// ---------------------------------------------------------------------------
// JSON helpers. All doubles go through nlohmann's shortest-round-trip dump,
// so outputs are byte-stable for identical inputs.
// ---------------------------------------------------------------------------

json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json config_echo(const ProblemFile& file) {
    json echo = json::object();
    json probes = json::array();
    for (const auto& [key, value] : file.entries) {
        if (key == "probe") {
            const Eigen::VectorXd p = parse_vector(key, value);
            probes.push_back(to_json(p));
            continue;
        }
        if (key == "kind" || key == "policy") {
            echo[key] = value;
        } else if (key == "B" || key == "b") {
            echo[key] = to_json(parse_vector(key, value));
        } else if (key == "D" || key == "sigma") {
            echo[key] = to_json(parse_matrix(key, value));
        } else if (key == "seed") {
            echo[key] = parse_seed(value);
        } else if (key == "steps" || key == "particles") {
            echo[key] = static_cast<std::uint64_t>(parse_scalar(key, value));
        } else {
            echo[key] = parse_scalar(key, value);
        }
    }
    if (!probes.empty()) echo["probe"] = probes;
    return echo;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct Solved {
    ConeSolution cone;
    PSystem ps;
};

Solved solve_problem(const ProblemFile& file, std::size_t steps) {
    Solved s;
    s.cone = solve_cone_projection(file.lq.cone_problem());
    s.ps = solve_p_system(file.lq, s.cone.theta_norm_sq, steps);
    return s;
}

Policy make_policy(const std::string& name, const Solved& solved, double dead_band,
                   Eigen::Index m) {
    if (name == "optimal") return {};  // simulate() defaults to the optimal feedback
    if (name == "zero") return policies::zero(m);
    if (name.rfind("scaled:", 0) == 0) {
        const double factor = parse_scalar("policy", name.substr(7));
        return policies::scaled(factor, policies::optimal(solved.ps, solved.cone, dead_band));
    }
    throw InvalidInput("policy must be optimal | zero | scaled:<factor>");
}

unsigned worker_threads() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MCKVLQ_THREADS")) {
        const double parsed = parse_scalar("MCKVLQ_THREADS", env);
        if (parsed < 1 || parsed != std::floor(parsed))
            throw InvalidInput("MCKVLQ_THREADS must be a positive integer");
        hw = std::min<unsigned>(hw, static_cast<unsigned>(parsed));
    }
    return hw;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct CommonFlags {
    std::string config;
    std::string out = ".";
    std::string format;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> particles;
    std::optional<double> dt;
    std::optional<std::uint64_t> seed;
    std::optional<double> tolerance;
    std::optional<double> dead_band;
    std::string policy;
};

void apply_overrides(ProblemFile& file, const CommonFlags& flags) {
    if (flags.steps) file.numerics.steps = *flags.steps;
    if (flags.particles) file.numerics.particles = *flags.particles;
    if (flags.dt) file.numerics.dt = *flags.dt;
    if (flags.seed) file.numerics.seed = *flags.seed;
    if (flags.tolerance) file.numerics.tolerance = *flags.tolerance;
    if (flags.dead_band) file.numerics.dead_band = *flags.dead_band;
    if (!flags.policy.empty()) file.policy = flags.policy;
}

int cmd_solve(const CommonFlags& flags) {
    ProblemFile file = load_problem_file(flags.config);
    apply_overrides(file, flags);
    const fs::path out_dir(flags.out);
    fs::create_directories(out_dir);

    const Solved solved = solve_problem(file, file.numerics.steps);

    std::ostringstream csv;
    write_psystem_csv(solved.ps, csv);
    write_text(out_dir / "psystem.csv", csv.str());

    json sol;
    sol["kind"] = file.kind == ProblemFile::Kind::Finance ? "finance" : "lq";
    sol["theta_bar"] = to_json(solved.cone.thetabar);
    sol["theta_norm_sq"] = solved.cone.theta_norm_sq;
    sol["s_min"] = solved.cone.s_min;
    sol["zbar"] = to_json(solved.cone.zbar);
    sol["nubar"] = to_json(solved.cone.nubar);

    auto probes = file.probes;
    if (probes.empty()) probes.push_back({file.lq.t0, file.x0, 0.0});
    json jprobes = json::array();
    for (const auto& [t, mean, var] : probes) {
        const MeasureState state{mean, var, std::nullopt};
        const ValueResult res = value(t, state, solved.ps, file.numerics.dead_band);
        const Eigen::VectorXd u =
            optimal_control(t, mean, solved.ps, solved.cone, file.numerics.dead_band);
        json p;
        p["t"] = t;
        p["mean"] = mean;
        p["var"] = var;
        p["region"] = region_name(res.tag.region);
        p["switch_value"] = res.tag.switch_value;
        p["value"] = res.v;
        if (res.v_other)
            p["value_other"] = *res.v_other;
        else
            p["value_other"] = nullptr;
        p["conjectural"] = res.conjectural;
        p["u_star"] = to_json(u);
        jprobes.push_back(p);
    }
    sol["probes"] = jprobes;
    sol["config"] = config_echo(file);
    write_json(out_dir / "solution.json", sol);

    if (file.kind == ProblemFile::Kind::Finance) {
        const EfficientSolution eff = efficient_solution(file.market, file.numerics.steps);
        std::ostringstream strat;
        write_strategy_csv(eff, strat);
        write_text(out_dir / "strategy.csv", strat.str());
        json j;
        j["value0"] = eff.value0;
        j["cml"] = json::array({eff.cml.lower, eff.cml.upper});
        j["strategy_csv_path"] = "strategy.csv";
        write_json(out_dir / "efficient.json", j);
    }

    if (flags.format == "json") std::cout << sol.dump(2) << '\n';
    if (flags.format == "csv") std::cout << csv.str();
    return kExitOk;
}

struct HjbGrid {
    std::size_t nt = 50;
    std::size_t nmu = 50;
    double mu_min = -2.0;
    double mu_max = 2.0;
    std::vector<double> vars = {0.0, 1.0, 10.0};
};

int cmd_hjb_check(const CommonFlags& flags, const HjbGrid& grid) {
    ProblemFile file = load_problem_file(flags.config);
    apply_overrides(file, flags);
    const fs::path out_dir(flags.out);
    fs::create_directories(out_dir);

    const Solved solved = solve_problem(file, file.numerics.steps);
    const double t0 = file.lq.t0;
    const double t_hi = file.lq.T - solved.ps.grid.step();

    std::vector<ResidualRow> rows;
    std::size_t dead_band_hits = 0;
    double worst = 0.0, worst_t = t0, worst_mean = 0.0;
    for (std::size_t i = 0; i < grid.nt; ++i) {
        const double t =
            grid.nt == 1 ? t0 : t0 + (t_hi - t0) * static_cast<double>(i) / (grid.nt - 1);
        for (std::size_t j = 0; j < grid.nmu; ++j) {
            const double mean =
                grid.nmu == 1 ? grid.mu_min
                              : grid.mu_min + (grid.mu_max - grid.mu_min) *
                                                  static_cast<double>(j) / (grid.nmu - 1);
            const RegionTag tag = classify_region(t, mean, solved.ps, file.numerics.dead_band);
            if (tag.region == Region::Pi3) {
                ++dead_band_hits;
                continue;
            }
            for (double var : grid.vars) {
                const MeasureState state{mean, var, std::nullopt};
                ResidualRow row;
                row.t = t;
                row.mean = mean;
                row.var = var;
                row.region = tag.region;
                row.residual =
                    hjb_residual(t, state, solved.ps, solved.cone, file.numerics.dead_band);
                row.u_star =
                    optimal_control(t, mean, solved.ps, solved.cone, file.numerics.dead_band);
                row.value = value(t, state, solved.ps, file.numerics.dead_band).v;
                rows.push_back(row);
                if (std::abs(row.residual) > worst) {
                    worst = std::abs(row.residual);
                    worst_t = t;
                    worst_mean = mean;
                }
            }
        }
    }

    std::ostringstream csv;
    write_residuals_csv(rows, file.lq.B.size(), csv);
    write_text(out_dir / "residuals.csv", csv.str());

    std::cout << "max |residual| = " << format_double(worst) << " at (t = " << format_double(worst_t)
              << ", mean = " << format_double(worst_mean) << "); rows = " << rows.size()
              << ", dead-band hits = " << dead_band_hits << "\n";
    if (worst > file.numerics.tolerance) {
        std::cerr << "hjb-check failed: max |residual| " << format_double(worst) << " > tolerance "
                  << format_double(file.numerics.tolerance) << "\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

int cmd_simulate(const CommonFlags& flags) {
    ProblemFile file = load_problem_file(flags.config);
    apply_overrides(file, flags);
    const fs::path out_dir(flags.out);
    fs::create_directories(out_dir);

    const Solved solved = solve_problem(file, file.numerics.steps);

    SimConfig cfg;
    cfg.n_particles = file.numerics.particles;
    cfg.dt = file.numerics.dt > 0.0 ? file.numerics.dt
                                    : (file.lq.T - file.lq.t0) / static_cast<double>(file.numerics.steps);
    cfg.seed = file.numerics.seed;
    cfg.x0 = file.x0;
    cfg.dead_band = file.numerics.dead_band;
    cfg.threads = worker_threads();
    cfg.policy = make_policy(file.policy, solved, file.numerics.dead_band, file.lq.B.size());

    const SimResult result = simulate(file.lq, solved.ps, solved.cone, cfg);

    std::ostringstream csv;
    write_paths_csv(result, csv);
    write_text(out_dir / "paths.csv", csv.str());

    const double v0 =
        value(file.lq.t0, MeasureState::dirac(file.x0), solved.ps, file.numerics.dead_band).v;

    json summary;
    summary["policy"] = file.policy;
    summary["J"] = result.cost_estimate;
    summary["stderr"] = result.cost_stderr;
    summary["stderr_reliable"] = result.stderr_reliable;
    summary["terminal_mean"] = result.terminal_mean;
    summary["terminal_var"] = result.terminal_var;
    summary["value_at_start"] = v0;
    summary["value_gap"] = result.cost_estimate - v0;
    summary["value_within_3_stderr"] =
        std::abs(result.cost_estimate - v0) <= 3.0 * result.cost_stderr;
    if (file.kind == ProblemFile::Kind::Finance) {
        const CapitalMarketLine cml = capital_market_line(file.market);
        const double se = std::sqrt(std::max(result.terminal_var, 0.0) /
                                    static_cast<double>(cfg.n_particles));
        json jcml;
        jcml["lower"] = cml.lower;
        jcml["upper"] = cml.upper;
        jcml["terminal_mean"] = result.terminal_mean;
        jcml["contained_within_3_stderr"] =
            result.terminal_mean >= cml.lower - 3.0 * se - 1e-9 * std::abs(cml.lower) - 1e-5 &&
            result.terminal_mean <= cml.upper + 3.0 * se + 1e-9 * std::abs(cml.upper) + 1e-5;
        summary["capital_market_line"] = jcml;
    } else {
        summary["capital_market_line"] = nullptr;
    }
    summary["config"] = config_echo(file);
    write_json(out_dir / "summary.json", summary);

    if (flags.format == "json") std::cout << summary.dump(2) << '\n';
    if (flags.format == "csv") std::cout << csv.str();
    return kExitOk;
}

int cmd_coneqp(const std::string& d_text, const std::string& b_text, const std::string& config,
               double tolerance, const std::string& format) {
    ConeProblem problem;
    if (!config.empty()) {
        std::ifstream in(config);
        if (!in) throw InvalidInput("config: cannot open '" + config + "'");
        std::string line, d_line, b_line;
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = trim(line.substr(0, eq));
            if (key == "D") d_line = trim(line.substr(eq + 1));
            if (key == "B") b_line = trim(line.substr(eq + 1));
        }
        if (d_line.empty() || b_line.empty())
            throw InvalidInput("coneqp: config must provide D and B");
        problem.D = parse_matrix("D", d_line);
        problem.B = parse_vector("B", b_line);
    } else {
        if (d_text.empty() || b_text.empty())
            throw InvalidInput("coneqp: provide --d and --b, or --config");
        problem.D = parse_matrix("d", d_text);
        problem.B = parse_vector("b", b_text);
    }

    const ConeSolution sol = solve_cone_projection(problem);
    const KktReport report = verify_kkt(problem, sol, tolerance);

    if (format == "csv") {
        std::cout << "zbar,nubar,thetabar\n";
        for (Eigen::Index i = 0; i < sol.zbar.size(); ++i)
            std::cout << format_double(sol.zbar(i)) << ',' << format_double(sol.nubar(i)) << ','
                      << format_double(sol.thetabar(i)) << '\n';
        return kExitOk;
    }

    json j;
    j["zbar"] = to_json(sol.zbar);
    j["nubar"] = to_json(sol.nubar);
    j["thetabar"] = to_json(sol.thetabar);
    j["theta_norm_sq"] = sol.theta_norm_sq;
    j["s_min"] = sol.s_min;
    json kkt;
    kkt["stationarity"] = report.stationarity;
    kkt["primal"] = report.primal;
    kkt["dual"] = report.dual;
    kkt["complementarity"] = report.complementarity;
    kkt["tolerance"] = report.tol;
    kkt["pass"] = report.pass;
    j["kkt"] = kkt;
    std::cout << j.dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained mean-field LQ control: cone projection, coefficient ODEs, "
                 "value/feedback evaluation, HJB residual checks and particle Monte Carlo"};
    app.require_subcommand(1);

    CommonFlags flags;
    HjbGrid grid;
    std::string cone_d, cone_b, cone_config, cone_format = "json";
    double cone_tol = 1e-8;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", flags.config, "problem file")->required();
        cmd->add_option("--out", flags.out, "output directory");
        cmd->add_option("--steps", flags.steps, "ODE grid steps");
        cmd->add_option("--particles", flags.particles, "particle count");
        cmd->add_option("--dt", flags.dt, "simulation time step");
        cmd->add_option("--seed", flags.seed, "random seed");
        cmd->add_option("--tolerance", flags.tolerance, "check tolerance");
        cmd->add_option("--dead-band", flags.dead_band, "switching dead band");
        cmd->add_option("--policy", flags.policy, "optimal | zero | scaled:<factor>");
        cmd->add_option("--format", flags.format, "stdout dump format")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    CLI::App* solve = app.add_subcommand("solve", "solve the coefficient ODEs and value probes");
    add_common(solve, true);

    CLI::App* hjb = app.add_subcommand("hjb-check", "sweep the HJB residual grid");
    add_common(hjb, true);
    hjb->add_option("--nt", grid.nt, "time grid points");
    hjb->add_option("--nmu", grid.nmu, "mean grid points");
    hjb->add_option("--mu-min", grid.mu_min, "mean grid lower bound");
    hjb->add_option("--mu-max", grid.mu_max, "mean grid upper bound");
    hjb->add_option("--vars", grid.vars, "variance levels")->delimiter(',');

    CLI::App* sim = app.add_subcommand("simulate", "run the interacting-particle Monte Carlo");
    add_common(sim, true);

    CLI::App* coneqp = app.add_subcommand("coneqp", "ad-hoc cone projection");
    coneqp->add_option("--d", cone_d, "matrix D, rows separated by ';'");
    coneqp->add_option("--b", cone_b, "vector B");
    coneqp->add_option("--config", cone_config, "file with D = ... and B = ... lines");
    coneqp->add_option("--tolerance", cone_tol, "KKT tolerance");
    coneqp->add_option("--format", cone_format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
        if (solve->parsed()) return cmd_solve(flags);
        if (hjb->parsed()) return cmd_hjb_check(flags, grid);
        if (sim->parsed()) return cmd_simulate(flags);
        if (coneqp->parsed())
            return cmd_coneqp(cone_d, cone_b, cone_config, cone_tol, cone_format);
        return kExitInvalidInput;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitInvalidInput;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumericFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericFailure;
    }
}
