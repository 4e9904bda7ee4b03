// mpfqi: dataset generation, solving, policy evaluation, and benchmarking
// for the max-plus fitted Q-iteration toolkit.
//
// Exit codes: 0 success (including a run that reports diverged=true, which
// is an experimental outcome), 2 usage error, 3 data/validation error,
// 4 solver hard failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <maxplus/maxplus.hpp>

namespace mp = maxplus;
using nlohmann::json;

namespace {

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

bool is_mp_algo(const std::string& algo) { return algo != "fqi"; }

void check_pairing(const std::string& algo, mp::FeatureKind kind) {
    const bool mp_kind = kind == mp::FeatureKind::quadratic || kind == mp::FeatureKind::distance;
    if (is_mp_algo(algo) && !mp_kind)
        throw usage_error("algorithm '" + algo + "' needs max-plus features "
                          "(quadratic or distance), got '" + mp::to_string(kind) + "'");
    if (!is_mp_algo(algo) && mp_kind)
        throw usage_error("algorithm 'fqi' needs conventional features "
                          "(rbf or indicator), got '" + std::string(mp::to_string(kind)) + "'");
}

struct SolveOutcome {
    mp::ThetaArtifact artifact;
    std::vector<mp::TraceEntry> trace;
    std::vector<std::string> diagnostics;
};

// Shared by `solve` and each `bench` cell: build matrices, validate/prune,
// run the requested solver, assemble the artifact.
SolveOutcome run_solver(const std::string& algo, const mp::Dataset& data,
                        const mp::FeatureBank& bank,
                        const std::optional<mp::FeatureBank>& test_bank,
                        const mp::SolverConfig& cfg) {
    SolveOutcome out;
    out.artifact.algo = algo;
    out.artifact.gamma = cfg.gamma;
    out.artifact.bank = bank;

    mp::SolverResult res;
    const auto t0 = std::chrono::steady_clock::now();
    if (algo == "fqi") {
        res = mp::standard_fqi(data, bank, cfg);
        out.artifact.kept_columns = mp::identity_columns(bank.size());
        double iterate = 0.0;
        for (const auto& e : res.trace) iterate += e.ms;
        out.artifact.compile_ms = elapsed_ms(t0) - iterate; // assembly + factorization
    } else {
        const mp::MpMatrix f = mp::build_feature_matrix(data, bank);
        const mp::MpMatrix g = mp::build_backup_matrix(data, bank, cfg.gamma);
        if (algo == "mp-fqi") {
            const auto v = mp::validate_system(f, g);
            out.artifact.kept_columns = v.kept;
            out.artifact.pruned_columns = v.pruned;
            out.diagnostics = v.diagnostics;
            out.artifact.compile_ms = elapsed_ms(t0);
            res = mp::mp_fqi(v.features, v.backups, cfg);
        } else if (algo == "v-mp-fqi") {
            const mp::FeatureBank& tb = test_bank ? *test_bank : bank;
            const mp::MpMatrix h = mp::build_test_matrix(data, tb);
            const auto v = mp::validate_system(f, g, h);
            const auto proj = mp::project_system(v.features, v.backups, *v.tests);
            out.artifact.kept_columns = v.kept;
            out.artifact.pruned_columns = v.pruned;
            out.artifact.test_bank = tb;
            out.artifact.kept_test_columns = v.kept_tests;
            out.artifact.pruned_test_columns = v.pruned_tests;
            out.diagnostics = v.diagnostics;
            out.artifact.compile_ms = elapsed_ms(t0);
            res = mp::v_mp_fqi(proj.features, proj.backups, cfg);
        } else if (algo == "fp-mp-fqi") {
            const auto v = mp::validate_system(f, g);
            const mp::MpMatrix c = mp::build_fixed_point_matrix(v.features, v.backups);
            out.artifact.kept_columns = v.kept;
            out.artifact.pruned_columns = v.pruned;
            out.diagnostics = v.diagnostics;
            out.artifact.compile_ms = elapsed_ms(t0);
            res = mp::fp_mp_fqi(c, cfg);
        } else {
            throw usage_error("unknown algorithm '" + algo + "'");
        }
    }

    out.artifact.theta = res.theta;
    out.artifact.delta = res.delta;
    out.artifact.iterations = res.iterations;
    out.artifact.converged = res.converged;
    out.artifact.diverged = res.diverged;
    for (const auto& e : res.trace) out.artifact.iterate_ms_total += e.ms;
    out.artifact.iterate_ms_mean =
        res.trace.empty() ? 0.0
                          : out.artifact.iterate_ms_total / static_cast<double>(res.trace.size());
    out.trace = std::move(res.trace);
    return out;
}

// ---------------------------------------------------------------------------
struct GenArgs {
    std::string env = "dc-motor";
    std::size_t n = 5000;
    std::uint64_t seed = 1;
    std::string out;
};

int run_gen(const GenArgs& a) {
    const auto params = mp::DcMotorParams::defaults();
    const auto data = mp::sample_uniform(params, a.n, a.seed);
    mp::save_dataset(data, a.out);
    std::cout << "wrote " << data.size() << " samples to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
struct SolveArgs {
    std::string algo, data, features, out, trace;
    std::size_t grid = 0;
    double alpha = 1.0;
    double gamma = 0.95;
    double eps = 1e-6;
    bool rel = false;
    std::size_t max_iter = 1000;
    double lambda = 1e-8;
    std::string test_features;
    std::size_t test_grid = 0; // 0: same as --grid
    double test_alpha = 0.0;   // 0: same as --alpha
};

json solve_config_json(const SolveArgs& a, const std::string& test_features,
                       std::size_t test_grid, double test_alpha) {
    json j{{"command", "solve"}, {"algo", a.algo},       {"data", a.data},
           {"features", a.features}, {"grid", a.grid},   {"alpha", a.alpha},
           {"gamma", a.gamma},   {"eps", a.eps},         {"rel", a.rel},
           {"max_iter", a.max_iter}, {"lambda", a.lambda}, {"out", a.out},
           {"trace", a.trace}};
    if (a.algo == "v-mp-fqi") {
        j["test_features"] = test_features;
        j["test_grid"] = test_grid;
        j["test_alpha"] = test_alpha;
    }
    return j;
}

int run_solve(const SolveArgs& a) {
    const mp::FeatureKind kind = mp::feature_kind_from_string(a.features);
    check_pairing(a.algo, kind);
    if (a.algo != "v-mp-fqi" && (!a.test_features.empty() || a.test_grid || a.test_alpha != 0.0))
        throw usage_error("--test-features/--test-grid/--test-alpha apply to v-mp-fqi only");

    const auto params = mp::DcMotorParams::defaults();
    const mp::Dataset data = mp::load_dataset(a.data);

    const mp::Algebra algebra =
        is_mp_algo(a.algo) ? mp::Algebra::max_plus : mp::Algebra::conventional;
    const auto bank =
        mp::make_grid_bank(kind, algebra, params.state_box, a.grid, a.alpha, params.actions);

    std::optional<mp::FeatureBank> test_bank;
    std::string tf = a.features;
    std::size_t tg = a.grid;
    double ta = a.alpha;
    if (a.algo == "v-mp-fqi") {
        if (!a.test_features.empty()) tf = a.test_features;
        if (a.test_grid) tg = a.test_grid;
        if (a.test_alpha != 0.0) ta = a.test_alpha;
        const mp::FeatureKind tkind = mp::feature_kind_from_string(tf);
        check_pairing(a.algo, tkind); // test functions live in the max-plus algebra too
        test_bank = mp::make_grid_bank(tkind, mp::Algebra::max_plus, params.state_box, tg, ta,
                                       params.actions);
    }

    mp::SolverConfig cfg;
    cfg.gamma = a.gamma;
    cfg.eps = a.eps;
    cfg.rel = a.rel;
    cfg.max_iter = a.max_iter;
    cfg.lambda = a.lambda;

    auto outcome = run_solver(a.algo, data, bank, test_bank, cfg);
    for (const auto& d : outcome.diagnostics) std::cerr << "note: " << d << "\n";

    outcome.artifact.config = solve_config_json(a, tf, tg, ta);
    mp::save_theta(outcome.artifact, a.out);
    mp::save_trace_csv(outcome.trace, a.trace);

    std::cout << a.algo << ": " << (outcome.artifact.converged  ? "converged"
                                    : outcome.artifact.diverged ? "diverged"
                                                                : "max-iterations")
              << " after " << outcome.artifact.iterations << " iterations (p="
              << outcome.artifact.theta.size() << ", compile " << outcome.artifact.compile_ms
              << " ms, iterate " << outcome.artifact.iterate_ms_total << " ms)\n";
    return 0;
}

// ---------------------------------------------------------------------------
struct EvalArgs {
    std::string theta, baseline = "lqr", policy = "greedy", out;
    std::size_t instances = 100, horizon = 100;
    std::uint64_t seed = 1;
};

double parse_policy_number(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw usage_error(std::string("bad ") + what + " '" + s + "' in --policy");
    }
}

std::unique_ptr<mp::Policy> make_policy(const std::string& spec, const mp::ThetaArtifact& art,
                                        const mp::DcMotorParams& params) {
    if (spec == "greedy")
        return std::make_unique<mp::GreedyPolicy>(art.bank, art.theta, art.kept_columns);
    if (spec == "lqr")
        return std::make_unique<mp::LqrPolicy>(mp::lqr_gain(params).k,
                                               *std::min_element(params.actions.begin(),
                                                                 params.actions.end()),
                                               *std::max_element(params.actions.begin(),
                                                                 params.actions.end()));
    if (spec.starts_with("constant:"))
        return std::make_unique<mp::ConstantPolicy>(
            parse_policy_number(spec.substr(9), "constant action"));
    if (spec.starts_with("random:"))
        return std::make_unique<mp::RandomPolicy>(
            params.actions,
            static_cast<std::uint64_t>(parse_policy_number(spec.substr(7), "seed")));
    throw usage_error("unknown policy '" + spec +
                      "' (expected greedy, lqr, constant:<u>, or random:<seed>)");
}

int run_eval(const EvalArgs& a) {
    const mp::ThetaArtifact art = mp::load_theta(a.theta);
    auto params = mp::DcMotorParams::defaults();
    params.gamma = art.gamma;

    auto policy = make_policy(a.policy, art, params);
    const auto lqr = mp::lqr_gain(params);
    mp::LqrPolicy baseline(lqr.k, *std::min_element(params.actions.begin(), params.actions.end()),
                           *std::max_element(params.actions.begin(), params.actions.end()));

    const auto rep =
        mp::evaluate(params, *policy, baseline, a.instances, a.horizon, params.gamma, a.seed);

    const json config{{"command", "eval"},     {"theta", a.theta},     {"instances", a.instances},
                      {"horizon", a.horizon},  {"seed", a.seed},       {"baseline", a.baseline},
                      {"policy", a.policy},    {"out", a.out},         {"gamma", art.gamma},
                      {"algo", art.algo}};
    mp::save_report(rep, config, a.out);
    std::cout << "normalized_score " << rep.normalized_score << " (mean_policy "
              << rep.mean_policy << ", mean_baseline " << rep.mean_baseline << ") over "
              << a.instances << " instances\n";
    return 0;
}

// ---------------------------------------------------------------------------
struct BenchArgs {
    std::vector<std::string> algos;
    std::vector<std::size_t> grids;
    std::vector<std::string> features; // optional, parallel to algos
    std::string data, out;
    double gamma = 0.95;
    double eps = 1e-3;
    bool rel = true;
    std::size_t max_iter = 1000;
    double lambda = 1e-8;
    std::size_t instances = 100, horizon = 100;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
};

std::string default_features(const std::string& algo) {
    return is_mp_algo(algo) ? "quadratic" : "rbf";
}

int run_bench(const BenchArgs& a) {
    if (a.algos.empty() || a.grids.empty())
        throw usage_error("--algos and --grids must be nonempty");
    std::vector<std::string> feats = a.features;
    if (feats.empty())
        for (const auto& algo : a.algos) feats.push_back(default_features(algo));
    if (feats.size() != a.algos.size())
        throw usage_error("--features must list one kind per algorithm");
    for (std::size_t i = 0; i < a.algos.size(); ++i) {
        if (a.algos[i] != "mp-fqi" && a.algos[i] != "v-mp-fqi" && a.algos[i] != "fp-mp-fqi" &&
            a.algos[i] != "fqi")
            throw usage_error("unknown algorithm '" + a.algos[i] + "'");
        check_pairing(a.algos[i], mp::feature_kind_from_string(feats[i]));
    }
    for (std::size_t g : a.grids)
        if (g == 0) throw usage_error("grid sizes must be at least 1");

    const auto params = mp::DcMotorParams::defaults();
    const mp::Dataset data = mp::load_dataset(a.data);
    const auto lqr = mp::lqr_gain([&] {
        auto p = params;
        p.gamma = a.gamma;
        return p;
    }());

    struct Cell {
        std::string algo, features;
        std::size_t grid = 0;
    };
    std::vector<Cell> cells;
    for (std::size_t i = 0; i < a.algos.size(); ++i)
        for (std::size_t g : a.grids) cells.push_back({a.algos[i], feats[i], g});

    auto run_cell = [&](const Cell& cell) -> std::pair<mp::BenchRow, std::string> {
        mp::BenchRow row;
        row.algo = cell.algo;
        row.features = cell.features;
        row.normalized_score = std::numeric_limits<double>::quiet_NaN();
        std::string note;
        try {
            const mp::FeatureKind kind = mp::feature_kind_from_string(cell.features);
            const mp::Algebra algebra =
                is_mp_algo(cell.algo) ? mp::Algebra::max_plus : mp::Algebra::conventional;
            const auto bank = mp::make_grid_bank(kind, algebra, params.state_box, cell.grid, 1.0,
                                                 params.actions);
            mp::SolverConfig cfg;
            cfg.gamma = a.gamma;
            cfg.eps = a.eps;
            cfg.rel = a.rel;
            cfg.max_iter = a.max_iter;
            cfg.lambda = a.lambda;
            auto outcome = run_solver(cell.algo, data, bank, std::nullopt, cfg);
            row.p = outcome.artifact.theta.size();
            row.compile_ms = outcome.artifact.compile_ms;
            row.iter_ms_mean = outcome.artifact.iterate_ms_mean;
            row.iterations = outcome.artifact.iterations;
            row.converged = outcome.artifact.converged;
            row.diverged = outcome.artifact.diverged;
            if (!row.diverged) {
                auto env = params;
                env.gamma = a.gamma;
                mp::GreedyPolicy policy(outcome.artifact.bank, outcome.artifact.theta,
                                        outcome.artifact.kept_columns);
                mp::LqrPolicy baseline(lqr.k,
                                       *std::min_element(params.actions.begin(),
                                                         params.actions.end()),
                                       *std::max_element(params.actions.begin(),
                                                         params.actions.end()));
                const auto rep = mp::evaluate(env, policy, baseline, a.instances, a.horizon,
                                              a.gamma, a.seed);
                row.normalized_score = rep.normalized_score;
            }
        } catch (const std::exception& e) {
            note = std::string(cell.algo) + " (grid " + std::to_string(cell.grid) +
                   "): " + e.what();
        }
        return {row, note};
    };

    std::vector<mp::BenchRow> rows(cells.size());
    std::vector<std::string> notes(cells.size());
    const std::size_t jobs = std::max<std::size_t>(1, a.jobs);
    for (std::size_t start = 0; start < cells.size(); start += jobs) {
        const std::size_t batch = std::min(jobs, cells.size() - start);
        std::vector<std::future<std::pair<mp::BenchRow, std::string>>> fut;
        fut.reserve(batch);
        for (std::size_t b = 0; b < batch; ++b)
            fut.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                     run_cell, cells[start + b]));
        for (std::size_t b = 0; b < batch; ++b) {
            auto [row, note] = fut[b].get();
            rows[start + b] = std::move(row);
            notes[start + b] = std::move(note);
        }
    }
    for (const auto& n : notes)
        if (!n.empty()) std::cerr << "cell failed: " << n << "\n";

    mp::save_bench_csv(rows, a.out);
    std::cout << "wrote " << rows.size() << " rows to " << a.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"max-plus fitted Q-iteration toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cg = app.add_subcommand("gen-data", "generate a uniform offline dataset");
    cg->add_option("--env", gen.env, "environment id")
        ->check(CLI::IsMember({"dc-motor"}))
        ->capture_default_str();
    cg->add_option("--n", gen.n, "number of samples")
        ->required()
        ->check(CLI::PositiveNumber);
    cg->add_option("--seed", gen.seed, "rng seed")->capture_default_str();
    cg->add_option("--out", gen.out, "output CSV path")->required();

    SolveArgs sol;
    auto* cs = app.add_subcommand("solve", "fit Q-function coefficients from a dataset");
    cs->add_option("--algo", sol.algo, "solver")
        ->required()
        ->check(CLI::IsMember({"mp-fqi", "v-mp-fqi", "fp-mp-fqi", "fqi"}));
    cs->add_option("--data", sol.data, "dataset CSV path")->required();
    cs->add_option("--features", sol.features, "feature kind")
        ->required()
        ->check(CLI::IsMember({"quadratic", "distance", "rbf", "indicator"}));
    cs->add_option("--grid", sol.grid, "grid resolution per state dimension")
        ->required()
        ->check(CLI::PositiveNumber);
    cs->add_option("--alpha", sol.alpha, "curvature scale")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cs->add_option("--gamma", sol.gamma, "discount factor")->capture_default_str();
    cs->add_option("--eps", sol.eps, "termination tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cs->add_flag("--rel", sol.rel, "tolerance is relative to ||theta||_inf");
    cs->add_option("--max-iter", sol.max_iter, "iteration budget")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cs->add_option("--lambda", sol.lambda, "ridge coefficient (fqi)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cs->add_option("--test-features", sol.test_features,
                   "test-function kind (v-mp-fqi; defaults to --features)")
        ->check(CLI::IsMember({"quadratic", "distance"}));
    cs->add_option("--test-grid", sol.test_grid,
                   "test-function grid resolution (v-mp-fqi; defaults to --grid)");
    cs->add_option("--test-alpha", sol.test_alpha,
                   "test-function curvature scale (v-mp-fqi; defaults to --alpha)");
    cs->add_option("--out", sol.out, "theta artifact output path (JSON)")->required();
    cs->add_option("--trace", sol.trace, "convergence trace output path (CSV)")->required();

    EvalArgs ev;
    auto* ce = app.add_subcommand("eval", "evaluate a solved policy against the LQR baseline");
    ce->add_option("--theta", ev.theta, "theta artifact path")->required();
    ce->add_option("--instances", ev.instances, "number of random initial states")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ce->add_option("--horizon", ev.horizon, "rollout length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ce->add_option("--seed", ev.seed, "rng seed for initial states")->capture_default_str();
    ce->add_option("--baseline", ev.baseline, "baseline policy")
        ->check(CLI::IsMember({"lqr"}))
        ->capture_default_str();
    ce->add_option("--policy", ev.policy, "policy to evaluate: greedy, lqr, constant:<u>, random:<seed>")
        ->capture_default_str();
    ce->add_option("--out", ev.out, "report output path (JSON)")->required();

    BenchArgs be;
    auto* cb = app.add_subcommand("bench", "sweep algorithms x grid sizes, one CSV row per cell");
    cb->add_option("--algos", be.algos, "comma-separated algorithms")
        ->required()
        ->delimiter(',');
    cb->add_option("--grids", be.grids, "comma-separated grid resolutions")
        ->required()
        ->delimiter(',');
    cb->add_option("--features", be.features,
                   "comma-separated feature kinds, one per algorithm "
                   "(default: quadratic for max-plus, rbf for fqi)")
        ->delimiter(',');
    cb->add_option("--data", be.data, "dataset CSV path")->required();
    cb->add_option("--out", be.out, "benchmark CSV output path")->required();
    cb->add_option("--gamma", be.gamma, "discount factor")->capture_default_str();
    cb->add_option("--eps", be.eps, "termination tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cb->add_flag("--rel,!--no-rel", be.rel, "relative termination rule (default on)")
        ->capture_default_str();
    cb->add_option("--max-iter", be.max_iter, "iteration budget")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cb->add_option("--lambda", be.lambda, "ridge coefficient (fqi)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cb->add_option("--instances", be.instances, "evaluation instances per cell")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cb->add_option("--horizon", be.horizon, "evaluation rollout length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cb->add_option("--seed", be.seed, "evaluation seed")->capture_default_str();
    cb->add_option("--jobs", be.jobs, "max concurrent cells")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (cg->parsed()) return run_gen(gen);
        if (cs->parsed()) return run_solve(sol);
        if (ce->parsed()) return run_eval(ev);
        if (cb->parsed()) return run_bench(be);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const mp::solver_error& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 4;
    } catch (const mp::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
