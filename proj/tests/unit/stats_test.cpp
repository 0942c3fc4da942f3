#include <cmath>
#include <vector>

#include "cmtr/error.hpp"
#include "cmtr/stats.hpp"
#include "doctest.h"

using namespace cmtr::eval;

// Reference values below were produced with scipy 1.15 (wilcoxon,
// friedmanchisquare, studentized_range.sf with df=inf).

namespace {

const std::vector<double> kA{0.91, 0.88, 0.93, 0.90, 0.87, 0.92, 0.89, 0.94, 0.86, 0.95};
const std::vector<double> kB{0.89, 0.87, 0.90, 0.91, 0.83, 0.88, 0.90, 0.89, 0.80, 0.86};

WilcoxonOptions alt(Alternative a, ZeroMethod z = ZeroMethod::wilcox) {
    WilcoxonOptions o;
    o.alternative = a;
    o.zero_method = z;
    return o;
}

const std::vector<double> kNormalCase{2.3, -2.3, 0.0, -0.3, -0.2, 0.1, -1.7, 0.0, -0.6, 3.6, 0.5, -0.1, 0.0,
                                      -0.4, -0.8, -0.1, 0.8, 0.1, 1.3, 0.1, 0.3, 1.8, 0.8, -0.2, 0.1};

}  // namespace

TEST_CASE("wilcoxon exact, no ties") {
    auto r = wilcoxon_signed_rank(kA, kB, alt(Alternative::two_sided));
    CHECK(r.statistic == 51.0);
    CHECK(r.p_value == doctest::Approx(0.015625).epsilon(1e-12));
    CHECK(r.significant);
    r = wilcoxon_signed_rank(kA, kB, alt(Alternative::greater));
    CHECK(r.p_value == doctest::Approx(0.0078125).epsilon(1e-12));
    r = wilcoxon_signed_rank(kA, kB, alt(Alternative::less));
    CHECK(r.p_value == doctest::Approx(0.99609375).epsilon(1e-12));
}

TEST_CASE("wilcoxon small sample with tied magnitudes enumerates sign flips") {
    const std::vector<double> d{1, -2, 2, -3, 3, -3, 4, -5, 6, -7, 8, -9};
    const std::vector<double> zero(d.size(), 0.0);
    auto r = wilcoxon_signed_rank(d, zero, alt(Alternative::two_sided));
    CHECK(r.statistic == 35.5);
    CHECK(r.p_value == doctest::Approx(0.8056640625).epsilon(1e-12));
    r = wilcoxon_signed_rank(d, zero, alt(Alternative::greater));
    CHECK(r.p_value == doctest::Approx(0.61181640625).epsilon(1e-12));
}

TEST_CASE("wilcoxon normal approximation with ties and zeros") {
    const std::vector<double> zero(kNormalCase.size(), 0.0);
    struct Case {
        Alternative a;
        ZeroMethod z;
        double t_plus, p;
    };
    const Case cases[] = {
        {Alternative::two_sided, ZeroMethod::wilcox, 144.0, 0.568862612040292},
        {Alternative::greater, ZeroMethod::wilcox, 144.0, 0.284431306020146},
        {Alternative::less, ZeroMethod::wilcox, 144.0, 0.715568693979854},
        {Alternative::two_sided, ZeroMethod::pratt, 180.0, 0.5800257145594419},
        {Alternative::greater, ZeroMethod::pratt, 180.0, 0.2900128572797209},
        {Alternative::less, ZeroMethod::pratt, 180.0, 0.7099871427202791},
    };
    for (const auto& c : cases) {
        const auto r = wilcoxon_signed_rank(kNormalCase, zero, alt(c.a, c.z));
        CHECK(r.statistic == c.t_plus);
        CHECK(std::abs(r.p_value - c.p) < 1e-12);
    }
}

TEST_CASE("wilcoxon normal approximation above fifty pairs") {
    const std::vector<double> y{
        0.7405251317548021,    2.1350880340988527,   -0.06962032734191348, -0.043558679079104545,
        1.2023136012756912,    -0.6864599431605871,  -0.09172023243986399, 1.0825389674564838,
        0.7803500161908992,    0.2915167032823522,   0.8701043548284795,   -2.6281623068437625,
        1.2213068175000799,    -0.7596447598081417,  -1.4686198426559696,  0.47644575952099966,
        0.90054488534939,      -0.24476745568278407, -0.8764058401008077,  0.22612483353403362,
        0.14725269175712075,   1.6055981660180925,   0.9474079874793504,   0.39381564626462,
        1.311633205223992,     -0.005523049905792471, -0.725899573648368,  0.7840583110252479,
        0.7825384186556901,    -0.014828911126855776, -0.5828085779639662, 0.4291539052132626,
        -2.2938942784579903,   0.8901247701628121,   0.6913682607449911,   -1.4388571438904885,
        0.2613535098381716,    -0.7640996635412405,  0.9572210447581504,   -1.834167273443428,
        -0.7144945379945886,   0.9095799877420676,   1.356401048432157,    -1.958005380126208,
        -0.29803984475130335,  0.528020092542577,    -0.4092161379498706,  1.7906402313231438,
        -0.9912266816177808,   0.554531946286926,    -0.8484055185445112,  1.6059629431348852,
        0.17834877094444165,   -0.1722505640006159,  -1.5181849497326165,  1.8818255450666805,
        0.9527785926973875,    0.953563837509362,    1.3378812589177813,   0.5492265781230293};
    const std::vector<double> zero(y.size(), 0.0);
    auto r = wilcoxon_signed_rank(y, zero, alt(Alternative::two_sided));
    CHECK(r.statistic == 1134.0);
    CHECK(std::abs(r.p_value - 0.10692037065793744) < 1e-12);
    r = wilcoxon_signed_rank(y, zero, alt(Alternative::greater));
    CHECK(std::abs(r.p_value - 0.05346018532896872) < 1e-12);
}

TEST_CASE("wilcoxon rejects degenerate input") {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    CHECK_THROWS_AS(wilcoxon_signed_rank(a, b), cmtr::ConfigError);
    CHECK_THROWS_AS(wilcoxon_signed_rank(a, a), cmtr::RuntimeError);
}

TEST_CASE("signed rank counts are symmetric and sum to 2^n") {
    for (std::size_t n = 1; n <= 20; ++n) {
        const auto c = signed_rank_counts(n);
        CHECK(c.size() == n * (n + 1) / 2 + 1);
        double total = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            total += c[i];
            CHECK(c[i] == c[c.size() - 1 - i]);
        }
        CHECK(total == std::ldexp(1.0, static_cast<int>(n)));
    }
    CHECK(signed_rank_counts(3) == std::vector<double>{1, 1, 1, 2, 1, 1, 1});
}

TEST_CASE("average ranks share ties") {
    const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
    CHECK(average_ranks(v) == std::vector<double>{3.5, 1.0, 3.5, 2.0});
}

TEST_CASE("friedman against reference values") {
    const std::vector<std::vector<double>> cols{{0.81, 0.79, 0.85, 0.80, 0.83, 0.78, 0.84, 0.82},
                                                {0.83, 0.80, 0.86, 0.80, 0.85, 0.81, 0.84, 0.85},
                                                {0.86, 0.84, 0.85, 0.83, 0.88, 0.82, 0.87, 0.86},
                                                {0.80, 0.79, 0.84, 0.81, 0.82, 0.80, 0.83, 0.81}};
    auto r = friedman(cols);
    CHECK(std::abs(r.statistic - 17.092105263157876) < 1e-10);
    CHECK(std::abs(r.p_value - 0.0006765750625852295) < 1e-12);
    CHECK(r.significant);
    r = friedman({cols[0], cols[1], cols[2]});
    CHECK(std::abs(r.statistic - 11.655172413793103) < 1e-10);
    CHECK(std::abs(r.p_value - 0.002945177456268354) < 1e-12);

    const auto p = nemenyi_posthoc(cols);
    const double expected[4][4] = {
        {1.0, 0.4080496978656374, 0.014287667194675002, 0.9055663649555741},
        {0.4080496978656374, 1.0, 0.4666087910800264, 0.11594858607244451},
        {0.014287667194675002, 0.4666087910800264, 1.0, 0.001336443983168567},
        {0.9055663649555741, 0.11594858607244451, 0.001336443983168567, 1.0}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(std::abs(p[i][j] - expected[i][j]) < 1e-9);
}

TEST_CASE("friedman degenerate cases") {
    const std::vector<double> c{0.5, 0.6, 0.7};
    auto r = friedman({c, c, c});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK_THROWS_AS(friedman({c, c}), cmtr::ConfigError);
    CHECK_THROWS_AS(friedman({c, c, {0.1}}), cmtr::ConfigError);
}

TEST_CASE("studentized range upper tail") {
    struct Case {
        double q;
        int k;
        double sf;
    };
    const Case cases[] = {{1.0, 3, 0.7592873587706612},   {2.5, 3, 0.18050893720669348},
                          {3.314, 3, 0.05004414040611005}, {3.633, 4, 0.0500149789953781},
                          {5.0, 5, 0.0037302738051944173}, {0.3, 10, 0.9999999846990479},
                          {4.0, 2, 0.004677734981047288}};
    for (const auto& c : cases) CHECK(std::abs(studentized_range_sf(c.q, c.k) - c.sf) < 1e-9);
    CHECK(studentized_range_sf(0.0, 3) == 1.0);
}

TEST_CASE("tail helpers") {
    CHECK(normal_sf(0.0) == doctest::Approx(0.5));
    CHECK(normal_sf(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-9));
    CHECK(chi_square_sf(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_sf(0.0, 3) == 1.0);
}
