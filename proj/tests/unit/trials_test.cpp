#include <cmath>
#include <filesystem>
#include <fstream>

#include "cmtr/error.hpp"
#include "cmtr/trials.hpp"
#include "doctest.h"

using namespace cmtr;
using namespace cmtr::eval;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("cmtr_trials_" + name);
    fs::remove_all(p);
    return p;
}
}  // namespace

TEST_CASE("results table round trip keeps full precision") {
    const auto path = scratch("rt.tsv");
    std::vector<TrialResult> rows{{0, "CMTR-BERT", {0.1, 1.0 / 3.0, 0.7, 0.123456789012345678}},
                                  {1, "CMTR-BERT O", {0.2, 0.4, 0.6, 0.8}}};
    write_trials(path, rows);
    const auto back = read_trials(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].system == "CMTR-BERT");
    CHECK(back[0].values.precision == rows[0].values.precision);
    CHECK(back[0].values.f1 == rows[0].values.f1);
    CHECK(back[1].trial_index == 1);

    std::ofstream(path, std::ios::app) << "2\tbroken\n";
    CHECK_THROWS_AS(read_trials(path), RuntimeError);
    CHECK_THROWS_AS(read_trials(scratch("missing.tsv")), ConfigError);
    fs::remove(path);
}

TEST_CASE("repeat_trials seeds, means and keeps finished trials on failure") {
    const auto path = scratch("persist.tsv");
    std::vector<std::uint64_t> seeds;
    auto run = [&](std::uint64_t seed, std::size_t i) -> std::map<std::string, MetricValues> {
        seeds.push_back(seed);
        if (i == 3) throw RuntimeError("boom");
        const double v = static_cast<double>(i);
        return {{"a", {v, v, v, v}}, {"b", {1.0, 1.0, 1.0, 1.0}}};
    };
    try {
        repeat_trials(5, run, 100, Averaging::binary, path);
        FAIL("expected failure");
    } catch (const RuntimeError& e) {
        CHECK(std::string(e.what()).find("trial 3") != std::string::npos);
    }
    CHECK(seeds == std::vector<std::uint64_t>{100, 101, 102, 103});
    CHECK(read_trials(path).size() == 6);

    seeds.clear();
    auto ok = [&](std::uint64_t seed, std::size_t i) { return i == 3 ? run(seed, 0) : run(seed, i); };
    const auto summary = repeat_trials(3, ok, 7, Averaging::binary, path);
    CHECK(read_trials(path).size() == 6);
    CHECK(summary.means.at("a").accuracy == doctest::Approx(1.0));
    CHECK(summary.means.at("b").f1 == 1.0);
    CHECK_THROWS_AS(repeat_trials(0, ok, 7), ConfigError);
    fs::remove(path);
}

TEST_CASE("metric columns are ordered by trial") {
    std::vector<TrialResult> rows{{1, "x", {0, 0, 0, 0.2}}, {0, "x", {0, 0, 0, 0.1}}, {0, "y", {0.5, 0, 0, 0.3}}};
    const auto cols = metric_columns(rows, Metric::f1);
    REQUIRE(cols.size() == 2);
    CHECK(cols[0].first == "x");
    CHECK(cols[0].second == std::vector<double>{0.1, 0.2});
    CHECK(metric_columns(rows, Metric::accuracy)[1].second == std::vector<double>{0.5});
}

TEST_CASE("analysis of identical columns is inconclusive, not an error") {
    const std::vector<double> v{0.8, 0.7, 0.9, 0.85, 0.6};
    const auto report = analyze({{"a", v}, {"b", v}, {"c", v}});
    REQUIRE(report.tests.size() == 5);  // 3 pairwise, friedman, nemenyi
    for (const auto& t : report.tests) {
        CHECK(t.p_value == doctest::Approx(1.0));
        CHECK_FALSE(t.significant);
    }
    CHECK(report.tests[0].detail.find("undefined") != std::string::npos);
    CHECK(report.tests[3].statistic == 0.0);
    CHECK(report_json(report).find("\"tests\"") != std::string::npos);
    CHECK(format_report(report).find("not significant") != std::string::npos);

    CHECK_THROWS_AS(analyze({{"a", v}}), ConfigError);
    CHECK_THROWS_AS(analyze({{"a", v}, {"b", {1.0}}}), ConfigError);
    CHECK(analyze({{"a", v}, {"b", v}}).tests.size() == 1);
}

TEST_CASE("toggle names and validation") {
    CHECK(AblationToggle{"ensemble", true}.name() == "CMTR-BERT");
    CHECK(AblationToggle{"E", false}.name() == "CMTR-BERT E w/o context");
    const auto t = parse_toggles({"O", "ensemble"}, {true, false});
    CHECK(t.size() == 4);
    CHECK_THROWS_AS(parse_toggles({"X"}, {true}), ConfigError);
    CHECK_THROWS_AS(parse_toggles({"O", "O"}, {true}), ConfigError);
    CHECK_THROWS_AS(parse_toggles({}, {true}), ConfigError);
}

TEST_CASE("ablation battery") {
    // Context helps every system by a trial-dependent margin.
    auto run = [](bool context, const std::vector<std::string>& systems, std::uint64_t, std::size_t i) {
        std::map<std::string, MetricValues> out;
        double base = 0.5;
        for (const auto& s : systems) {
            const double v = base + 0.01 * static_cast<double>(i) + (context ? 0.05 + 0.001 * static_cast<double>(i) : 0.0);
            out[s] = {v, v, v, v};
            base += 0.1;
        }
        return out;
    };
    const auto toggles = parse_toggles({"O", "E", "A", "ensemble"}, {true, false});
    const auto report = ablation_run(toggles, 10, run, 1);
    CHECK(report.results.size() == 80);
    CHECK(report.columns.size() == 8);
    std::size_t one_sided = 0, friedmans = 0;
    for (const auto& t : report.tests) {
        if (t.test.rfind("one-sided", 0) == 0) {
            ++one_sided;
            CHECK(t.p_value == doctest::Approx(std::ldexp(1.0, -10)));
        }
        if (t.test.find("friedman") != std::string::npos) ++friedmans;
    }
    CHECK(one_sided == 4);
    CHECK(friedmans == 2);
    CHECK(report.tests.back().test.rfind("pooled", 0) == 0);
    CHECK(report.tests.back().significant);

    const auto single = ablation_run({{"O", true}}, 3, run, 1);
    CHECK(single.tests.empty());
    CHECK(single.columns.size() == 1);

    auto missing = [](bool, const std::vector<std::string>&, std::uint64_t, std::size_t) {
        return std::map<std::string, MetricValues>{};
    };
    CHECK_THROWS_AS(ablation_run({{"O", true}}, 1, missing, 1), RuntimeError);
    CHECK_THROWS_AS(ablation_run({{"O", true}, {"O", true}}, 1, run, 1), ConfigError);
}
