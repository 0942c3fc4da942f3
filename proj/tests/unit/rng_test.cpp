#include <algorithm>
#include <numeric>

#include "cmtr/rng.hpp"
#include "doctest.h"

using cmtr::Rng;

TEST_CASE("rng streams are reproducible") {
    Rng a(17), b(17), c(18);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        (void)c.next();
    }
    CHECK(Rng(1).next() != Rng(2).next());
}

TEST_CASE("below stays in range and covers it") {
    Rng r(3);
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = r.below(7);
        REQUIRE(v < 7);
        ++seen[v];
    }
    for (int s : seen) CHECK(s > 800);
    CHECK(r.below(1) == 0);
}

TEST_CASE("uniform lies in [0, 1) and normal has sane moments") {
    Rng r(5);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("shuffle is a seeded permutation") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto a = v, b = v;
    Rng(9).shuffle(a);
    Rng(9).shuffle(b);
    CHECK(a == b);
    CHECK(a != v);
    std::sort(a.begin(), a.end());
    CHECK(a == v);
}

TEST_CASE("stable hash is FNV-1a") {
    // FNV-1a 64 of "a" and of the empty string.
    CHECK(cmtr::stable_hash("") == 0xcbf29ce484222325ULL);
    CHECK(cmtr::stable_hash("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(cmtr::stable_hash_combine(1, "x") != cmtr::stable_hash_combine(2, "x"));
    CHECK(cmtr::to_hex(255) == "00000000000000ff");
}
