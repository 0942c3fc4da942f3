#include "cmtr/chunker.hpp"

#include <algorithm>
#include <string>

#include "cmtr/error.hpp"

namespace cmtr::chunker {

void ChunkPlan::validate() const {
    if (window == 0) throw ConfigError("chunk window must be positive");
    if (overlap >= window)
        throw ConfigError("chunk overlap (" + std::to_string(overlap) + ") must be smaller than the window (" +
                          std::to_string(window) + ")");
    if (step() == 0) throw ConfigError("chunk step must be positive");
    if (max_chunks && *max_chunks == 0) throw ConfigError("max_chunks must be at least 1");
}

std::size_t chunk_count(std::size_t n, const ChunkPlan& plan) {
    plan.validate();
    if (n <= plan.window) return 1;
    // First start s with s + window >= n, counted from zero.
    return (n - plan.window + plan.step() - 1) / plan.step() + 1;
}

ChunkSet chunk(std::span<const TokenId> tokens, const ChunkPlan& plan) {
    plan.validate();
    if (tokens.empty()) throw RuntimeError("cannot chunk an empty token sequence");

    const std::size_t n = tokens.size();
    std::size_t count = chunk_count(n, plan);
    if (plan.max_chunks) count = std::min(count, *plan.max_chunks);

    ChunkSet out;
    out.chunks.reserve(count);
    out.offsets.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * plan.step();
        const std::size_t end = std::min(start + plan.window, n);
        out.offsets.push_back(start);
        out.chunks.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                tokens.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

ChunkSet chunk_for_summarizer(std::span<const TokenId> tokens) { return chunk(tokens, summarizer_plan()); }

}  // namespace cmtr::chunker
