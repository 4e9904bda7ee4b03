#pragma once

#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxplus/environment.hpp"
#include "maxplus/evaluation.hpp"
#include "maxplus/features.hpp"
#include "maxplus/solvers.hpp"

namespace maxplus {

// ---------------------------------------------------------------------------
// JSON helpers. nlohmann serializes doubles at max_digits10, so numeric
// round trips are exact. Loaders rethrow parse/type failures as
// validation_error with the artifact name attached.

inline nlohmann::json box_to_json(const Box& b) {
    return {{"lo", b.lo}, {"hi", b.hi}};
}

inline Box box_from_json(const nlohmann::json& j) {
    return Box(j.at("lo").get<std::vector<double>>(), j.at("hi").get<std::vector<double>>());
}

inline nlohmann::json bank_to_json(const FeatureBank& b) {
    nlohmann::json j{{"kind", to_string(b.kind)},
                     {"algebra", to_string(b.algebra)},
                     {"domain", box_to_json(b.domain)},
                     {"curvature", b.curvature},
                     {"actions", b.actions},
                     {"grid_m", b.grid_m},
                     {"alpha", b.alpha}};
    if (!b.centers.empty()) j["centers"] = b.centers;
    if (!b.bins.empty()) {
        nlohmann::json bins = nlohmann::json::array();
        for (const Box& bin : b.bins) bins.push_back(box_to_json(bin));
        j["bins"] = bins;
    }
    return j;
}

inline FeatureBank bank_from_json(const nlohmann::json& j) {
    FeatureBank b;
    b.kind = feature_kind_from_string(j.at("kind").get<std::string>());
    const auto alg = j.at("algebra").get<std::string>();
    if (alg == "max-plus") b.algebra = Algebra::max_plus;
    else if (alg == "conventional") b.algebra = Algebra::conventional;
    else throw validation_error("bank: unknown algebra '" + alg + "'");
    b.domain = box_from_json(j.at("domain"));
    b.curvature = j.at("curvature").get<double>();
    b.actions = j.at("actions").get<std::vector<double>>();
    b.grid_m = j.at("grid_m").get<std::size_t>();
    b.alpha = j.at("alpha").get<double>();
    if (j.contains("centers")) b.centers = j.at("centers").get<std::vector<std::vector<double>>>();
    if (j.contains("bins"))
        for (const auto& bin : j.at("bins")) b.bins.push_back(box_from_json(bin));
    b.validate();
    return b;
}

// ---------------------------------------------------------------------------
// Solver output artifact: everything needed to reconstruct the greedy policy
// (bank + kept columns + coefficients) plus run metadata and the exact
// config that produced it.
struct ThetaArtifact {
    std::string algo;
    double gamma = 0.95;
    FeatureBank bank;
    std::optional<FeatureBank> test_bank;
    std::vector<std::size_t> kept_columns, pruned_columns;
    std::vector<std::size_t> kept_test_columns, pruned_test_columns;
    std::vector<double> theta;
    double delta = 0.0;
    std::size_t iterations = 0;
    bool converged = false, diverged = false;
    double compile_ms = 0.0, iterate_ms_total = 0.0, iterate_ms_mean = 0.0;
    nlohmann::json config = nlohmann::json::object();

    void validate() const {
        bank.validate();
        if (theta.size() != kept_columns.size())
            throw validation_error("theta artifact: theta/kept_columns size mismatch");
        if (kept_columns.size() + pruned_columns.size() != bank.size())
            throw validation_error("theta artifact: kept+pruned does not cover the bank");
        for (std::size_t c : kept_columns)
            if (c >= bank.size())
                throw validation_error("theta artifact: kept column out of range");
        if (theta.empty())
            throw validation_error("theta artifact: empty coefficient vector");
    }
};

inline void save_theta(const ThetaArtifact& a, const std::string& path) {
    a.validate();
    nlohmann::json j{{"algo", a.algo},
                     {"gamma", a.gamma},
                     {"bank", bank_to_json(a.bank)},
                     {"kept_columns", a.kept_columns},
                     {"pruned_columns", a.pruned_columns},
                     {"theta", a.theta},
                     {"delta", a.delta},
                     {"iterations", a.iterations},
                     {"converged", a.converged},
                     {"diverged", a.diverged},
                     {"compile_ms", a.compile_ms},
                     {"iterate_ms_total", a.iterate_ms_total},
                     {"iterate_ms_mean", a.iterate_ms_mean},
                     {"config", a.config}};
    if (a.test_bank) {
        j["test_bank"] = bank_to_json(*a.test_bank);
        j["kept_test_columns"] = a.kept_test_columns;
        j["pruned_test_columns"] = a.pruned_test_columns;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw validation_error("save_theta: cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out)
        throw validation_error("save_theta: write failed for '" + path + "'");
}

inline ThetaArtifact load_theta(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("load_theta: cannot open '" + path + "'");
    ThetaArtifact a;
    try {
        const auto j = nlohmann::json::parse(in);
        a.algo = j.at("algo").get<std::string>();
        a.gamma = j.at("gamma").get<double>();
        a.bank = bank_from_json(j.at("bank"));
        a.kept_columns = j.at("kept_columns").get<std::vector<std::size_t>>();
        a.pruned_columns = j.at("pruned_columns").get<std::vector<std::size_t>>();
        a.theta = j.at("theta").get<std::vector<double>>();
        a.delta = j.at("delta").get<double>();
        a.iterations = j.at("iterations").get<std::size_t>();
        a.converged = j.at("converged").get<bool>();
        a.diverged = j.at("diverged").get<bool>();
        a.compile_ms = j.at("compile_ms").get<double>();
        a.iterate_ms_total = j.at("iterate_ms_total").get<double>();
        a.iterate_ms_mean = j.at("iterate_ms_mean").get<double>();
        a.config = j.value("config", nlohmann::json::object());
        if (j.contains("test_bank")) {
            a.test_bank = bank_from_json(j.at("test_bank"));
            a.kept_test_columns = j.at("kept_test_columns").get<std::vector<std::size_t>>();
            a.pruned_test_columns = j.at("pruned_test_columns").get<std::vector<std::size_t>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("load_theta: malformed artifact '" + path + "': " + e.what());
    }
    a.validate();
    return a;
}

// ---------------------------------------------------------------------------
// Convergence trace CSV: iter,diff_inf,delta,ms.
inline constexpr const char* kTraceHeader = "iter,diff_inf,delta,ms";

inline void save_trace_csv(std::span<const TraceEntry> trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw validation_error("save_trace_csv: cannot open '" + path + "' for writing");
    out << kTraceHeader << '\n';
    for (const TraceEntry& e : trace)
        out << e.iter << ',' << detail::fmt17(e.diff_inf) << ',' << detail::fmt17(e.delta) << ','
            << detail::fmt17(e.ms) << '\n';
    if (!out)
        throw validation_error("save_trace_csv: write failed for '" + path + "'");
}

struct TraceRow {
    std::size_t iter = 0;
    double diff_inf = 0.0, delta = 0.0, ms = 0.0;
};

inline std::vector<TraceRow> load_trace_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("load_trace_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || (line != kTraceHeader))
        throw validation_error("load_trace_csv: missing or wrong header in '" + path + "'");
    std::vector<TraceRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        while (true) {
            const auto c = line.find(',', start);
            f.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        if (f.size() != 4)
            throw validation_error("trace line " + std::to_string(line_no) +
                                   ": expected 4 columns");
        TraceRow r;
        r.iter = static_cast<std::size_t>(detail::parse_field(f[0], line_no));
        r.diff_inf = detail::parse_field(f[1], line_no);
        r.delta = detail::parse_field(f[2], line_no);
        r.ms = detail::parse_field(f[3], line_no);
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Evaluation report: every RolloutReport field plus the producing config.
inline void save_report(const RolloutReport& r, const nlohmann::json& config,
                        const std::string& path) {
    const nlohmann::json j{{"instances", r.instances},
                           {"horizon", r.horizon},
                           {"seed", r.seed},
                           {"gamma", r.gamma},
                           {"baseline", "lqr"},
                           {"normalization", "mean_policy / mean_baseline"},
                           {"mean_policy", r.mean_policy},
                           {"mean_baseline", r.mean_baseline},
                           {"normalized_score", r.normalized_score},
                           {"policy_rewards", r.policy_rewards},
                           {"baseline_rewards", r.baseline_rewards},
                           {"config", config}};
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw validation_error("save_report: cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out)
        throw validation_error("save_report: write failed for '" + path + "'");
}

struct ReportFile {
    RolloutReport report;
    nlohmann::json config;
};

inline ReportFile load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("load_report: cannot open '" + path + "'");
    ReportFile f;
    try {
        const auto j = nlohmann::json::parse(in);
        f.report.instances = j.at("instances").get<std::size_t>();
        f.report.horizon = j.at("horizon").get<std::size_t>();
        f.report.seed = j.at("seed").get<std::uint64_t>();
        f.report.gamma = j.at("gamma").get<double>();
        f.report.mean_policy = j.at("mean_policy").get<double>();
        f.report.mean_baseline = j.at("mean_baseline").get<double>();
        f.report.normalized_score = j.at("normalized_score").get<double>();
        f.report.policy_rewards = j.at("policy_rewards").get<std::vector<double>>();
        f.report.baseline_rewards = j.at("baseline_rewards").get<std::vector<double>>();
        f.config = j.value("config", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("load_report: malformed report '" + path + "': " + e.what());
    }
    return f;
}

// ---------------------------------------------------------------------------
// Benchmark CSV, one row per (algorithm, grid) cell.
inline constexpr const char* kBenchHeader =
    "algo,features,p,compile_ms,iter_ms_mean,iterations,converged,diverged,normalized_score";

struct BenchRow {
    std::string algo, features;
    std::size_t p = 0;
    double compile_ms = 0.0, iter_ms_mean = 0.0;
    std::size_t iterations = 0;
    bool converged = false, diverged = false;
    double normalized_score = 0.0;
};

inline void save_bench_csv(std::span<const BenchRow> rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw validation_error("save_bench_csv: cannot open '" + path + "' for writing");
    out << kBenchHeader << '\n';
    for (const BenchRow& r : rows)
        out << r.algo << ',' << r.features << ',' << r.p << ',' << detail::fmt17(r.compile_ms)
            << ',' << detail::fmt17(r.iter_ms_mean) << ',' << r.iterations << ','
            << (r.converged ? "true" : "false") << ',' << (r.diverged ? "true" : "false") << ','
            << detail::fmt17(r.normalized_score) << '\n';
    if (!out)
        throw validation_error("save_bench_csv: write failed for '" + path + "'");
}

inline std::vector<BenchRow> load_bench_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("load_bench_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kBenchHeader)
        throw validation_error("load_bench_csv: missing or wrong header in '" + path + "'");
    std::vector<BenchRow> rows;
    std::size_t line_no = 1;
    auto parse_bool = [&](const std::string& s) {
        if (s == "true") return true;
        if (s == "false") return false;
        throw validation_error("bench line " + std::to_string(line_no) + ": bad boolean '" + s +
                               "'");
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        while (true) {
            const auto c = line.find(',', start);
            f.push_back(line.substr(start, c == std::string::npos ? std::string::npos : c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        if (f.size() != 9)
            throw validation_error("bench line " + std::to_string(line_no) +
                                   ": expected 9 columns");
        BenchRow r;
        r.algo = f[0];
        r.features = f[1];
        r.p = static_cast<std::size_t>(detail::parse_field(f[2], line_no));
        r.compile_ms = detail::parse_field(f[3], line_no);
        r.iter_ms_mean = detail::parse_field(f[4], line_no);
        r.iterations = static_cast<std::size_t>(detail::parse_field(f[5], line_no));
        r.converged = parse_bool(f[6]);
        r.diverged = parse_bool(f[7]);
        r.normalized_score = detail::parse_field(f[8], line_no);
        rows.push_back(r);
    }
    return rows;
}

} // namespace maxplus
