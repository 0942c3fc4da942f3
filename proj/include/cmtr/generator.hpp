#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmtr/tokenizer.hpp"

namespace cmtr::summarize {

struct SamplingParams {
    std::size_t top_k = 100;
    double top_p = 0.95;
    std::uint64_t seed = 0;
};

struct LengthBounds {
    std::size_t min_tokens = 1;
    std::size_t max_tokens = 1;
};

// Sequence-to-sequence backend used for abstractive summaries. Implementations
// must be deterministic for a fixed (window, params) pair and safe to call
// from several threads.
class SummaryGenerator {
public:
    virtual ~SummaryGenerator() = default;
    virtual TokenSequence tokenize(std::string_view text) const = 0;
    virtual std::string generate(std::span<const TokenId> window, const SamplingParams& params,
                                 const LengthBounds& bounds) const = 0;
    virtual std::string id() const = 0;
};

// Keeps the top_k most probable entries, then the shortest prefix of those
// whose cumulative probability reaches top_p, and renormalizes. Entries are
// ordered by probability, ties by id. At least one entry always survives.
std::vector<std::pair<TokenId, double>> filter_top_k_top_p(std::vector<std::pair<TokenId, double>> probs,
                                                           std::size_t top_k, double top_p);

// Index into a normalized distribution from a uniform draw u in [0, 1).
std::size_t sample_index(const std::vector<std::pair<TokenId, double>>& dist, double u);

// Desk-scale stand-in for a pretrained summarizer: a bigram model estimated on
// the window itself, decoded with top-k / top-p sampling. Output is novel
// text built from the window's vocabulary, stopping at a sentence end once
// min_tokens is reached, never exceeding max_tokens.
class BigramSampler final : public SummaryGenerator {
public:
    explicit BigramSampler(WordPieceTokenizer tokenizer) : tokenizer_(std::move(tokenizer)) {}

    TokenSequence tokenize(std::string_view text) const override { return tokenizer_.encode_plain(text); }
    std::string generate(std::span<const TokenId> window, const SamplingParams& params,
                         const LengthBounds& bounds) const override;
    std::string id() const override { return "bigram:" + tokenizer_.fingerprint(); }

    const WordPieceTokenizer& tokenizer() const { return tokenizer_; }

private:
    WordPieceTokenizer tokenizer_;
};

// Talks to a long-running helper process over JSON lines on stdin/stdout.
// Requests: {"op":"tokenize","text":...} -> {"tokens":[...]}
//           {"op":"generate","tokens":[...],"top_k":..,"top_p":..,"seed":..,
//            "min_tokens":..,"max_tokens":..} -> {"text":...}
//           {"op":"id"} -> {"id":...}
// Any reply carrying "error" is raised as RuntimeError.
class ProcessGenerator final : public SummaryGenerator {
public:
    explicit ProcessGenerator(std::string command);
    ~ProcessGenerator() override;
    ProcessGenerator(const ProcessGenerator&) = delete;
    ProcessGenerator& operator=(const ProcessGenerator&) = delete;

    TokenSequence tokenize(std::string_view text) const override;
    std::string generate(std::span<const TokenId> window, const SamplingParams& params,
                         const LengthBounds& bounds) const override;
    std::string id() const override { return id_; }

private:
    std::string request(const std::string& line) const;

    std::string command_;
    std::string id_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    mutable std::mutex mutex_;
    mutable std::string buffer_;
};

}  // namespace cmtr::summarize
