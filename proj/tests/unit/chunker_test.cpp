#include <numeric>

#include "cmtr/chunker.hpp"
#include "cmtr/error.hpp"
#include "doctest.h"

using namespace cmtr;
using chunker::ChunkPlan;

namespace {

TokenSequence iota_tokens(std::size_t n) {
    TokenSequence t(n);
    std::iota(t.begin(), t.end(), 0);
    return t;
}

}  // namespace

TEST_CASE("short input is one window") {
    const auto t = iota_tokens(10);
    const auto c = chunker::chunk(t, ChunkPlan{500, 50, 4});
    REQUIRE(c.size() == 1);
    CHECK(c.chunks[0] == t);
    CHECK(c.offsets[0] == 0);
}

TEST_CASE("default plan over 1200 tokens") {
    const auto t = iota_tokens(1200);
    const auto c = chunker::chunk(t, chunker::encoder_plan());
    REQUIRE(c.size() == 3);
    CHECK(c.offsets == std::vector<std::size_t>{0, 450, 900});
    CHECK(c.chunks[0].size() == 500);
    CHECK(c.chunks[1].front() == 450);
    CHECK(c.chunks[1].back() == 949);
    CHECK(c.chunks[2].size() == 300);
    // consecutive windows share exactly the overlap
    CHECK(c.chunks[0][450] == c.chunks[1][0]);
}

TEST_CASE("cap keeps the first windows") {
    const auto t = iota_tokens(5000);
    const auto c = chunker::chunk(t, ChunkPlan{500, 50, 4});
    REQUIRE(c.size() == 4);
    CHECK(c.offsets.back() == 1350);
    CHECK(chunker::chunk_count(5000, ChunkPlan{500, 50, 4}) == 11);
}

TEST_CASE("exact fit does not add an empty tail") {
    const auto t = iota_tokens(950);
    const auto c = chunker::chunk(t, ChunkPlan{500, 50, std::nullopt});
    CHECK(c.size() == 2);
    CHECK(c.chunks[1].size() == 500);
}

TEST_CASE("summarizer plan is uncapped") {
    const auto t = iota_tokens(10000);
    const auto c = chunker::chunk_for_summarizer(t);
    CHECK(c.size() == chunker::chunk_count(10000, chunker::summarizer_plan()));
    CHECK(c.chunks.back().back() == 9999);
}

TEST_CASE("invalid plans and empty input") {
    CHECK_THROWS_AS(ChunkPlan({10, 10, 4}).validate(), ConfigError);
    CHECK_THROWS_AS(ChunkPlan({10, 12, 4}).validate(), ConfigError);
    CHECK_THROWS_AS(ChunkPlan({0, 0, 4}).validate(), ConfigError);
    const TokenSequence empty;
    CHECK_THROWS_AS(chunker::chunk(empty, chunker::encoder_plan()), RuntimeError);
}
