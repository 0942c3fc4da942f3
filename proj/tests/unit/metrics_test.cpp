#include <vector>

#include "cmtr/error.hpp"
#include "cmtr/metrics.hpp"
#include "doctest.h"

using namespace cmtr::eval;

TEST_CASE("hand fixture") {
    const std::vector<int> gold{1, 1, 0, 0}, pred{1, 0, 0, 0};
    const auto m = metrics(pred, gold);
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.precision == doctest::Approx(1.0));
    CHECK(m.recall == doctest::Approx(0.5));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("macro averaging over classes") {
    const std::vector<int> gold{0, 1, 2, 2}, pred{0, 2, 2, 1};
    const auto m = metrics(pred, gold, {Averaging::macro, 1, 3});
    // class 0: p=1 r=1; class 1: p=0 r=0; class 2: p=1/2 r=1/2
    CHECK(m.precision == doctest::Approx(0.5));
    CHECK(m.recall == doctest::Approx(0.5));
    CHECK(m.f1 == doctest::Approx(0.5));
    CHECK(m.accuracy == doctest::Approx(0.5));
}

TEST_CASE("zero denominators give zero") {
    const std::vector<int> gold{0, 0}, pred{0, 0};
    const auto m = metrics(pred, gold);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    CHECK(m.accuracy == 1.0);
}

TEST_CASE("draw label counts as wrong") {
    const std::vector<int> gold{0, 1, 2, 3}, pred{0, -1, 2, 3};
    const auto m = metrics(pred, gold, {Averaging::macro, 1, 4});
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.recall == doctest::Approx(0.75));
}

TEST_CASE("input validation and metric names") {
    const std::vector<int> a{1}, b{1, 0}, none;
    CHECK_THROWS_AS(metrics(a, b), cmtr::ConfigError);
    CHECK_THROWS_AS(metrics(none, none), cmtr::ConfigError);
    CHECK(parse_metric("f1") == Metric::f1);
    CHECK(to_string(Metric::recall) == "recall");
    CHECK_THROWS_AS(parse_metric("auc"), cmtr::ConfigError);
}
