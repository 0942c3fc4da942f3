#include <vector>

#include "cmtr/ensemble.hpp"
#include "doctest.h"

using namespace cmtr::ensemble;

TEST_CASE("strict majority wins") {
    CHECK(vote(std::vector<int>{1, 1, 0}) == 1);
    CHECK(vote(std::vector<int>{2, 3, 2}) == 2);
    CHECK(vote(std::vector<int>{0, 0, 0}) == 0);
}

TEST_CASE("all-distinct triple is a draw") {
    const std::vector<int> labels{0, 1, 2};
    try {
        (void)vote(labels);
        FAIL("expected a draw");
    } catch (const DrawError& e) {
        CHECK(e.tied_labels() == std::vector<int>{0, 1, 2});
    }
}

TEST_CASE("two-way tie in an even vote is a draw") {
    CHECK_THROWS_AS(vote(std::vector<int>{1, 0, 1, 0}), DrawError);
    CHECK(vote(std::vector<int>{1, 0, 1, 1}) == 1);
}

TEST_CASE("empty vote is rejected") {
    CHECK_THROWS(vote(std::vector<int>{}));
}

TEST_CASE("vote result accessors") {
    VoteResult r;
    CHECK(r.draw());
    CHECK_THROWS_AS(r.final_or_throw(), DrawError);
    r.final_label = 3;
    CHECK(r.final_or_throw() == 3);
}
