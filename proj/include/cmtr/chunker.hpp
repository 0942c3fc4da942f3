#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cmtr/tokenizer.hpp"

namespace cmtr::chunker {

// "Stride" is read as the number of tokens shared by consecutive windows, so
// the step between window starts is window - overlap. Setting this to false
// switches to the literal reading (step == overlap).
inline constexpr bool kStrideIsOverlap = true;

struct ChunkPlan {
    std::size_t window = 500;
    std::size_t overlap = 50;
    std::optional<std::size_t> max_chunks = 4;

    std::size_t step() const { return kStrideIsOverlap ? window - overlap : overlap; }
    void validate() const;
};

inline ChunkPlan encoder_plan() { return ChunkPlan{}; }
inline ChunkPlan summarizer_plan() { return ChunkPlan{1000, 50, std::nullopt}; }

struct ChunkSet {
    std::vector<TokenSequence> chunks;
    std::vector<std::size_t> offsets;

    std::size_t size() const { return chunks.size(); }
};

// Window i starts at i * step; windows continue until one reaches the end of
// the sequence. The last window may be short. With max_chunks set, only the
// first max_chunks windows are returned.
ChunkSet chunk(std::span<const TokenId> tokens, const ChunkPlan& plan);

// Windows of 1000 tokens with 50 overlap and no cap, so the whole body is
// seen by a 1024-position generator.
ChunkSet chunk_for_summarizer(std::span<const TokenId> tokens);

// Uncapped window count for a sequence of n tokens.
std::size_t chunk_count(std::size_t n, const ChunkPlan& plan);

}  // namespace cmtr::chunker
