#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmtr/chunker.hpp"
#include "cmtr/corpus.hpp"
#include "cmtr/encoder.hpp"
#include "cmtr/representation.hpp"
#include "cmtr/summary_store.hpp"
#include "cmtr/tokenizer.hpp"

namespace cmtr::classifier {

using nn::Vector;

struct HeadConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_units = 512;
    std::size_t output_classes = 2;

    void validate() const;
};

// Linear -> ReLU -> Linear, producing class logits.
class FeedForwardHead {
public:
    struct Cache {
        nn::Matrix input;
        nn::Matrix hidden_pre;
        nn::Matrix hidden;
    };

    FeedForwardHead(HeadConfig config, std::uint64_t seed);
    static FeedForwardHead zeros(HeadConfig config);

    Vector logits(const Vector& features, Cache* cache = nullptr) const;
    // Accumulates parameter gradients, returns d(loss)/d(features).
    Vector backward(const Cache& cache, const Vector& d_logits);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    const HeadConfig& config() const { return config_; }

private:
    HeadConfig config_;
    nn::Linear hidden_;
    nn::Linear out_;
};

// Softmax probabilities of the head applied to the features.
Vector forward(const encoder::FeatureVector& features, const FeedForwardHead& head);

double cross_entropy(const Vector& probabilities, int label);

struct TrainConfig {
    std::size_t batch_size = 8;
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    std::size_t epochs = 3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct FeatureOptions {
    chunker::ChunkPlan plan = chunker::encoder_plan();
    encoder::FeatureLayout layout{};
    corpus::ContextOptions context{};
    bool use_context = true;
};

// Shared, frozen part of every model: tokenizer, context encoder, chunking
// and layout. Context embeddings are memoized per document id since the
// context encoder never changes.
class FeatureExtractor {
public:
    FeatureExtractor(const WordPieceTokenizer& tokenizer, const encoder::TransformerEncoder& context_encoder,
                     FeatureOptions options);

    chunker::ChunkSet content_chunks(const std::string& title, const std::string& text) const;

    // Context block followed by the numeric tail. All zeros when context is
    // disabled or the document carries none.
    const Vector& context_part(const corpus::Document& doc) const;

    encoder::FeatureVector assemble(const std::vector<Vector>& content, const Vector& context_part) const;

    const WordPieceTokenizer& tokenizer() const { return tokenizer_; }
    const encoder::TransformerEncoder& context_encoder() const { return context_encoder_; }
    const FeatureOptions& options() const { return options_; }
    std::string fingerprint() const;

private:
    const WordPieceTokenizer& tokenizer_;
    const encoder::TransformerEncoder& context_encoder_;
    FeatureOptions options_;
    mutable std::unordered_map<std::string, Vector> context_cache_;
    mutable std::mutex mutex_;
};

struct ModelRecipe {
    encoder::EncoderConfig content_encoder;
    std::size_t head_hidden = 512;
    std::optional<std::filesystem::path> content_checkpoint;  // warm start instead of random init
};

struct ModelBundle {
    Representation representation = Representation::original;
    encoder::TransformerEncoder content_encoder;
    FeedForwardHead head;
    std::string fingerprint;
    std::vector<double> epoch_losses;

    // <dir>/weights.bin, <dir>/config.json, <dir>/loss_log.tsv
    void save(const std::filesystem::path& dir) const;
    static ModelBundle load(const std::filesystem::path& dir);
};

// Fresh, untrained bundle. Encoder and head initialization depend only on
// the seed, so every representation starts from the same state.
ModelBundle initialize_bundle(Representation rep, const FeatureExtractor& features, const ModelRecipe& recipe,
                              std::size_t classes, std::uint64_t seed);

// One optimization step at a time over a bundle.
class Trainer {
public:
    Trainer(ModelBundle& bundle, const FeatureExtractor& features, const summarize::RepresentationTexts& texts,
            const TrainConfig& config);

    // Zeroes gradients and accumulates the mean cross-entropy gradient of
    // the batch. Returns the mean loss.
    double compute_gradients(const std::vector<const corpus::Document*>& batch);
    // compute_gradients followed by an AdamW update.
    double step(const std::vector<const corpus::Document*>& batch);

private:
    const chunker::ChunkSet& chunks_for(const corpus::Document& doc);

    ModelBundle& bundle_;
    const FeatureExtractor& features_;
    const summarize::RepresentationTexts& texts_;
    nn::AdamW optimizer_;
    std::unordered_map<std::string, chunker::ChunkSet> chunk_cache_;
};

std::string model_fingerprint(Representation rep, const TrainConfig& train, const ModelRecipe& recipe,
                              const FeatureExtractor& features, std::size_t classes,
                              const std::string& text_fingerprint);

// Seeded shuffled batches for cfg.epochs epochs; the last partial batch is
// kept. Returns the bundle with one mean loss per epoch.
ModelBundle train_one(Representation rep, const corpus::LabeledDataset& train, const TrainConfig& cfg,
                      const summarize::RepresentationTexts& texts, const FeatureExtractor& features,
                      const ModelRecipe& recipe, const std::string& text_fingerprint = "");

struct Prediction {
    int label = 0;
    Vector probabilities;
};

Prediction predict(const ModelBundle& bundle, const corpus::Document& doc, const FeatureExtractor& features,
                   const summarize::RepresentationTexts& texts);

// Index of the largest probability; the lowest index wins ties.
int argmax(const Vector& probabilities);

}  // namespace cmtr::classifier
