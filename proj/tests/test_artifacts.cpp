// Serialization: coefficient artifacts (JSON), traces and benchmark tables
// (CSV), and evaluation reports (JSON).

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <maxplus/artifacts.hpp>
#include <maxplus/environment.hpp>
#include <maxplus/evaluation.hpp>
#include <maxplus/features.hpp>

using namespace maxplus;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("maxplus_artifact_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

bool banks_equal(const FeatureBank& a, const FeatureBank& b) {
    if (a.kind != b.kind || a.algebra != b.algebra) return false;
    if (!(a.domain == b.domain)) return false;
    if (a.centers != b.centers) return false;
    if (a.bins.size() != b.bins.size()) return false;
    for (std::size_t i = 0; i < a.bins.size(); ++i)
        if (!(a.bins[i] == b.bins[i])) return false;
    return a.curvature == b.curvature && a.actions == b.actions && a.grid_m == b.grid_m &&
           a.alpha == b.alpha;
}

ThetaArtifact sample_artifact() {
    const auto params = DcMotorParams::defaults();
    ThetaArtifact a;
    a.algo = "v-mp-fqi";
    a.gamma = 0.95;
    a.bank = make_grid_bank(FeatureKind::quadratic, Algebra::max_plus, params.state_box, 2,
                            1.25, params.actions);
    a.test_bank = make_grid_bank(FeatureKind::distance, Algebra::max_plus, params.state_box, 3,
                                 0.5, params.actions);
    a.kept_columns.resize(a.bank.size());
    for (std::size_t j = 0; j < a.bank.size(); ++j) a.kept_columns[j] = j;
    a.kept_test_columns = {0, 2, 44};
    a.pruned_test_columns = {1, 3};
    a.theta.resize(a.bank.size());
    for (std::size_t j = 0; j < a.theta.size(); ++j)
        a.theta[j] = -1.0 / 3.0 * static_cast<double>(j + 1); // non-dyadic payload
    a.delta = 0.1239871;
    a.iterations = 137;
    a.converged = true;
    a.compile_ms = 12.75;
    a.iterate_ms_total = 450.125;
    a.iterate_ms_mean = 450.125 / 137.0;
    a.config = {{"eps", 1e-6}, {"rel", false}, {"note", "round trip"}};
    return a;
}

} // namespace

TEST_CASE("feature bank json round trips every kind") {
    const auto params = DcMotorParams::defaults();
    const std::vector<std::pair<FeatureKind, Algebra>> combos = {
        {FeatureKind::quadratic, Algebra::max_plus},
        {FeatureKind::distance, Algebra::max_plus},
        {FeatureKind::indicator, Algebra::max_plus},
        {FeatureKind::rbf, Algebra::conventional},
        {FeatureKind::indicator, Algebra::conventional},
    };
    for (const auto& [kind, algebra] : combos) {
        const auto bank = make_grid_bank(kind, algebra, params.state_box, 3, 0.7, params.actions);
        const auto back = bank_from_json(bank_to_json(bank));
        CHECK(banks_equal(bank, back));
        CHECK_NOTHROW(back.validate());
    }
    SECTION("unknown enum strings are rejected") {
        auto j = bank_to_json(make_grid_bank(FeatureKind::indicator, Algebra::conventional,
                                             params.state_box, 2, 1.0, params.actions));
        j["algebra"] = "tropical-ish";
        CHECK_THROWS_AS(bank_from_json(j), validation_error);
        j["algebra"] = "conventional";
        j["kind"] = "spline";
        CHECK_THROWS_AS(bank_from_json(j), validation_error);
    }
}

TEST_CASE("theta artifact save/load is lossless") {
    TempDir tmp;
    const auto a = sample_artifact();
    const auto path = tmp.file("theta.json");
    save_theta(a, path);
    const auto b = load_theta(path);

    CHECK(b.algo == a.algo);
    CHECK(b.gamma == a.gamma);
    CHECK(banks_equal(b.bank, a.bank));
    REQUIRE(b.test_bank.has_value());
    CHECK(banks_equal(*b.test_bank, *a.test_bank));
    CHECK(b.kept_columns == a.kept_columns);
    CHECK(b.pruned_columns == a.pruned_columns);
    CHECK(b.kept_test_columns == a.kept_test_columns);
    CHECK(b.pruned_test_columns == a.pruned_test_columns);
    CHECK(b.theta == a.theta); // bit-exact doubles through the JSON layer
    CHECK(b.delta == a.delta);
    CHECK(b.iterations == a.iterations);
    CHECK(b.converged == a.converged);
    CHECK(b.diverged == a.diverged);
    CHECK(b.compile_ms == a.compile_ms);
    CHECK(b.iterate_ms_total == a.iterate_ms_total);
    CHECK(b.iterate_ms_mean == a.iterate_ms_mean);
    CHECK(b.config == a.config);

    SECTION("absent test bank stays absent") {
        auto c = a;
        c.algo = "mp-fqi";
        c.test_bank.reset();
        c.kept_test_columns.clear();
        c.pruned_test_columns.clear();
        const auto p2 = tmp.file("theta2.json");
        save_theta(c, p2);
        CHECK_FALSE(load_theta(p2).test_bank.has_value());
    }
}

TEST_CASE("theta artifact validation") {
    auto a = sample_artifact();
    CHECK_NOTHROW(a.validate());
    SECTION("size mismatch") {
        a.theta.pop_back();
        CHECK_THROWS_AS(a.validate(), validation_error);
    }
    SECTION("kept+pruned must cover the bank") {
        a.theta.pop_back();
        a.kept_columns.pop_back();
        CHECK_THROWS_AS(a.validate(), validation_error);
        a.pruned_columns.push_back(a.bank.size() - 1);
        CHECK_NOTHROW(a.validate());
    }
    SECTION("kept column out of range") {
        a.kept_columns.back() = a.bank.size() + 5;
        CHECK_THROWS_AS(a.validate(), validation_error);
    }
    SECTION("save refuses an invalid artifact") {
        TempDir tmp;
        a.theta.clear();
        a.kept_columns.clear();
        a.pruned_columns.assign(a.bank.size(), 0);
        CHECK_THROWS_AS(save_theta(a, tmp.file("bad.json")), validation_error);
    }
}

TEST_CASE("theta artifact error paths") {
    TempDir tmp;
    SECTION("missing file") {
        CHECK_THROWS_WITH(load_theta(tmp.file("nope.json")),
                          Catch::Matchers::ContainsSubstring("cannot open"));
    }
    SECTION("malformed json") {
        const auto path = tmp.file("garbled.json");
        std::ofstream(path) << "{ \"algo\": \"mp-fqi\", ";
        CHECK_THROWS_WITH(load_theta(path), Catch::Matchers::ContainsSubstring("malformed"));
    }
    SECTION("structurally valid json with missing fields") {
        const auto path = tmp.file("empty.json");
        std::ofstream(path) << "{}";
        CHECK_THROWS_WITH(load_theta(path), Catch::Matchers::ContainsSubstring("malformed"));
    }
}

TEST_CASE("trace csv round trip") {
    TempDir tmp;
    std::vector<TraceEntry> trace(4);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        trace[i].iter = i + 1;
        trace[i].diff_inf = 1.0 / static_cast<double>(3 * (i + 1)); // non-dyadic
        trace[i].delta = 0.125 * static_cast<double>(i);
        trace[i].ms = 0.71 + static_cast<double>(i);
        trace[i].residual_half = 9.0; // not persisted; must not corrupt the file
    }
    const auto path = tmp.file("trace.csv");
    save_trace_csv(trace, path);

    SECTION("parses back bit for bit") {
        const auto rows = load_trace_csv(path);
        REQUIRE(rows.size() == trace.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i].iter == trace[i].iter);
            CHECK(rows[i].diff_inf == trace[i].diff_inf);
            CHECK(rows[i].delta == trace[i].delta);
            CHECK(rows[i].ms == trace[i].ms);
        }
    }
    SECTION("header is the documented contract") {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == std::string(kTraceHeader));
    }
    SECTION("wrong header is rejected") {
        const auto bad = tmp.file("bad.csv");
        std::ofstream(bad) << "iteration,diff\n1,2\n";
        CHECK_THROWS_WITH(load_trace_csv(bad), Catch::Matchers::ContainsSubstring("header"));
    }
    SECTION("short and malformed rows are rejected with a line number") {
        const auto bad = tmp.file("bad2.csv");
        std::ofstream(bad) << std::string(kTraceHeader) + "\n1,0.5,0.0\n";
        CHECK_THROWS_WITH(load_trace_csv(bad), Catch::Matchers::ContainsSubstring("line 2"));
        const auto bad3 = tmp.file("bad3.csv");
        std::ofstream(bad3) << std::string(kTraceHeader) + "\n1,0.5,abc,0.1\n";
        CHECK_THROWS_WITH(load_trace_csv(bad3), Catch::Matchers::ContainsSubstring("line 2"));
    }
    SECTION("empty trace gives a header-only file") {
        const auto p2 = tmp.file("empty.csv");
        save_trace_csv(std::vector<TraceEntry>{}, p2);
        CHECK(load_trace_csv(p2).empty());
    }
}

TEST_CASE("evaluation report round trip") {
    TempDir tmp;
    RolloutReport rep;
    rep.policy_rewards = {-1.25, -0.5, -1.0 / 3.0};
    rep.baseline_rewards = {-1.0, -0.75, -0.4};
    rep.mean_policy = -0.6944444444444444;
    rep.mean_baseline = -0.7166666666666667;
    rep.normalized_score = rep.mean_policy / rep.mean_baseline;
    rep.instances = 3;
    rep.horizon = 17;
    rep.seed = 99;
    rep.gamma = 0.95;
    const nlohmann::json config = {{"theta", "runs/theta.json"}, {"policy", "greedy"}};

    const auto path = tmp.file("report.json");
    save_report(rep, config, path);
    const auto back = load_report(path);

    CHECK(back.report.policy_rewards == rep.policy_rewards);
    CHECK(back.report.baseline_rewards == rep.baseline_rewards);
    CHECK(back.report.mean_policy == rep.mean_policy);
    CHECK(back.report.mean_baseline == rep.mean_baseline);
    CHECK(back.report.normalized_score == rep.normalized_score);
    CHECK(back.report.instances == rep.instances);
    CHECK(back.report.horizon == rep.horizon);
    CHECK(back.report.seed == rep.seed);
    CHECK(back.report.gamma == rep.gamma);
    CHECK(back.config == config);

    SECTION("the file records the baseline and normalization conventions") {
        std::ifstream in(path);
        const auto j = nlohmann::json::parse(in);
        CHECK(j.at("baseline") == "lqr");
        CHECK(j.at("normalization") == "mean_policy / mean_baseline");
    }
    SECTION("malformed report") {
        const auto bad = tmp.file("bad.json");
        std::ofstream(bad) << "[1,2,3]";
        CHECK_THROWS_WITH(load_report(bad), Catch::Matchers::ContainsSubstring("malformed"));
    }
}

TEST_CASE("benchmark csv round trip") {
    TempDir tmp;
    std::vector<BenchRow> rows(3);
    rows[0] = {"mp-fqi", "quadratic", 80, 12.5, 0.75, 210, true, false, 1.0312};
    rows[1] = {"fqi", "rbf", 320, 3.25, 1.5, 1000, false, false, 2.5};
    rows[2] = {"v-mp-fqi", "distance", 45, 7.0, 0.125, 64, false, true,
               std::nan("")}; // diverged cell: score unavailable
    const auto path = tmp.file("bench.csv");
    save_bench_csv(rows, path);
    const auto back = load_bench_csv(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].algo == rows[i].algo);
        CHECK(back[i].features == rows[i].features);
        CHECK(back[i].p == rows[i].p);
        CHECK(back[i].compile_ms == rows[i].compile_ms);
        CHECK(back[i].iter_ms_mean == rows[i].iter_ms_mean);
        CHECK(back[i].iterations == rows[i].iterations);
        CHECK(back[i].converged == rows[i].converged);
        CHECK(back[i].diverged == rows[i].diverged);
    }
    CHECK(back[0].normalized_score == rows[0].normalized_score);
    CHECK(back[1].normalized_score == rows[1].normalized_score);
    CHECK(std::isnan(back[2].normalized_score));

    SECTION("header contract") {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == std::string(kBenchHeader));
    }
    SECTION("bad boolean cell is rejected with a line number") {
        const auto bad = tmp.file("bad.csv");
        std::ofstream(bad) << std::string(kBenchHeader) +
                                  "\nmp-fqi,quadratic,8,1.0,1.0,5,yes,false,1.0\n";
        CHECK_THROWS_WITH(load_bench_csv(bad), Catch::Matchers::ContainsSubstring("line 2"));
    }
    SECTION("wrong header is rejected") {
        const auto bad = tmp.file("bad2.csv");
        std::ofstream(bad) << "algo,p\nmp-fqi,8\n";
        CHECK_THROWS_WITH(load_bench_csv(bad), Catch::Matchers::ContainsSubstring("header"));
    }
}
