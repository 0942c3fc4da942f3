#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cmtr/corpus.hpp"
#include "cmtr/generator.hpp"
#include "cmtr/representation.hpp"

namespace cmtr::summarize {

using Embedding = std::vector<double>;

// Rule-based splitter: a sentence ends at '.', '!' or '?' (plus trailing
// quotes/brackets) followed by whitespace, unless the word before the period
// is a known abbreviation, a single letter or a number.
class SentenceSplitter {
public:
    SentenceSplitter();
    explicit SentenceSplitter(std::vector<std::string> abbreviations);

    std::vector<std::string> split(std::string_view text) const;

private:
    std::vector<std::string> abbreviations_;
};

// Pre-pass that rewrites pronouns to their antecedents before sentence
// selection. The default leaves text untouched.
class CorefResolver {
public:
    virtual ~CorefResolver() = default;
    virtual std::string resolve(const std::string& text) const = 0;
    virtual std::string id() const = 0;
};

class IdentityCoref final : public CorefResolver {
public:
    std::string resolve(const std::string& text) const override { return text; }
    std::string id() const override { return "identity"; }
};

// Sentence embedding backend. All returned vectors share one dimension.
class SentenceEmbedder {
public:
    virtual ~SentenceEmbedder() = default;
    virtual std::vector<Embedding> embed(const std::vector<std::string>& sentences) const = 0;
    virtual std::string id() const = 0;
};

// L2-normalized hashed bag of lower-cased words. Deterministic, no model
// weights; suitable for desk-scale runs and tests.
class HashingEmbedder final : public SentenceEmbedder {
public:
    explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
    std::vector<Embedding> embed(const std::vector<std::string>& sentences) const override;
    std::string id() const override { return "hashing:" + std::to_string(dim_); }

private:
    std::size_t dim_;
};

struct KMeansOptions {
    std::size_t restarts = 10;
    std::size_t max_iterations = 300;
    std::uint64_t seed = 0;
};

struct KMeansResult {
    std::vector<Embedding> centroids;
    std::vector<std::size_t> assignment;
    double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds, best of several restarts by
// inertia. Empty clusters keep their previous centroid.
KMeansResult kmeans(const std::vector<Embedding>& points, std::size_t k, const KMeansOptions& options);

// For each centroid in order, the closest sentence not yet chosen (ties to
// the lower index). Returned indices are sorted.
std::vector<std::size_t> nearest_to_centroids(const std::vector<Embedding>& points,
                                              const std::vector<Embedding>& centroids);

struct ExtractiveConfig {
    double ratio = 0.40;
    bool coref_enabled = true;
    std::uint64_t seed = 0;

    void validate() const;
};

std::size_t extractive_sentence_count(std::size_t sentences, double ratio);

std::string extractive_summary(const std::string& body, const ExtractiveConfig& cfg, const SentenceEmbedder& embedder,
                               const CorefResolver& coref = IdentityCoref(),
                               const SentenceSplitter& splitter = SentenceSplitter());

struct AbstractiveConfig {
    std::size_t top_k = 100;
    double top_p = 0.95;
    double target_ratio = 0.40;
    std::uint64_t seed = 0;

    void validate() const;

    // Per-window output bounds bracketing target_ratio; [0.25, 0.55] of the
    // window length at the default ratio.
    LengthBounds bounds_for(std::size_t window_tokens) const;
};

std::string abstractive_summary(const std::string& body, const AbstractiveConfig& cfg,
                                const SummaryGenerator& generator);

// Bundles configs and backends so a document's summaries can be produced
// with its derived seed, both in batch and on the fly for unseen documents.
class Summarizer {
public:
    Summarizer(ExtractiveConfig extractive, AbstractiveConfig abstractive, const SentenceEmbedder& embedder,
               const SummaryGenerator& generator, const CorefResolver& coref = default_coref());

    // Original returns the body unchanged.
    std::string summarize(const corpus::Document& doc, Representation rep) const;

    // Hash of everything that determines the output for rep.
    std::string fingerprint(Representation rep) const;

    const ExtractiveConfig& extractive_config() const { return extractive_; }
    const AbstractiveConfig& abstractive_config() const { return abstractive_; }

    // seed derived from (global seed, doc id); independent of corpus order.
    static std::uint64_t document_seed(std::uint64_t global_seed, const std::string& doc_id);

private:
    static const CorefResolver& default_coref();

    ExtractiveConfig extractive_;
    AbstractiveConfig abstractive_;
    const SentenceEmbedder& embedder_;
    const SummaryGenerator& generator_;
    const CorefResolver& coref_;
    SentenceSplitter splitter_;
};

}  // namespace cmtr::summarize
