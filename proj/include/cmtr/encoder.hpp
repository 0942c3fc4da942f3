#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmtr/chunker.hpp"
#include "cmtr/nn.hpp"
#include "cmtr/segmented_text.hpp"
#include "cmtr/tokenizer.hpp"

namespace cmtr::encoder {

using nn::Matrix;
using nn::Vector;

struct EncoderConfig {
    std::size_t layers = 12;
    std::size_t hidden_dim = 768;
    std::size_t heads = 12;
    std::size_t intermediate_dim = 3072;
    std::size_t max_positions = 512;
    std::size_t vocab_size = 30522;
    std::string vocab;  // tokenizer fingerprint or vocab file name
    double layer_norm_eps = 1e-12;
    double init_stddev = 0.02;
    bool trainable = true;

    // Two layers of width 32, for desk-scale runs and tests.
    static EncoderConfig tiny(std::size_t vocab_size);

    void validate() const;
    // Each chunk plus its leading sentinel must fit into max_positions.
    void validate_for(const chunker::ChunkPlan& plan) const;
};

// Post-layer-norm transformer encoder (BERT layout: token + position
// embeddings, self-attention and GELU feed-forward blocks). The sequence
// embedding is the final hidden state at position 0, the <CLS> slot.
// Sequences are processed one at a time, so no padding mask is needed.
class TransformerEncoder {
public:
    struct LayerCache {
        Matrix input, q, k, v, context, attn_ln_out, ff_pre, ff_act;
        std::vector<Matrix> probs;  // per head
        nn::LayerNorm::Cache attn_ln, out_ln;
    };
    struct Cache {
        TokenSequence ids;
        nn::LayerNorm::Cache embed_ln;
        std::vector<LayerCache> layers;
    };

    TransformerEncoder(EncoderConfig config, std::uint64_t seed);

    Vector forward(std::span<const TokenId> ids, Cache* cache = nullptr) const;
    std::vector<Vector> encode(const std::vector<TokenSequence>& batch) const;

    // Accumulates parameter gradients for d(loss)/d(sequence embedding).
    // Frozen encoders refuse.
    void backward(const Cache& cache, const Vector& d_embedding);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    void zero_grad();

    bool trainable() const { return config_.trainable; }
    void set_trainable(bool trainable) { config_.trainable = trainable; }

    const EncoderConfig& config() const { return config_; }
    std::size_t hidden_dim() const { return config_.hidden_dim; }

    void save(const std::filesystem::path& path) const;
    static TransformerEncoder load(const std::filesystem::path& path);

private:
    struct Layer {
        nn::Linear query, key, value, output;
        nn::LayerNorm attn_ln;
        nn::Linear ff_in, ff_out;
        nn::LayerNorm out_ln;
    };

    Matrix layer_forward(const Layer& layer, const Matrix& x, LayerCache* cache) const;
    Matrix layer_backward(Layer& layer, const LayerCache& cache, const Matrix& d_out);

    EncoderConfig config_;
    nn::Parameter token_embedding_;
    nn::Parameter position_embedding_;
    nn::LayerNorm embed_ln_;
    std::vector<Layer> layers_;
};

std::string to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const std::string& json);

// Blocks: content 1..n_blocks, one context block, numeric tail.
struct FeatureLayout {
    std::size_t content_blocks = 4;
    std::size_t hidden_dim = 768;
    std::size_t numeric = 1;

    std::size_t dim() const { return content_blocks * hidden_dim + hidden_dim + numeric; }
    std::size_t context_offset() const { return content_blocks * hidden_dim; }
    std::size_t numeric_offset() const { return context_offset() + hidden_dim; }
};

struct FeatureVector {
    Vector values;
    FeatureLayout layout;
};

// Prepends <CLS> to chunks that do not start with it and checks the result
// against max_positions, naming the offending chunk on failure.
TokenSequence with_sentinel(const TokenSequence& chunk, TokenId cls_id, std::size_t max_positions,
                            std::size_t chunk_index);

// One sequence embedding per chunk, at most max_blocks. When caches is given,
// the forward caches needed for backward are filled in the same order.
std::vector<Vector> encode_content(const chunker::ChunkSet& chunks, const TransformerEncoder& enc, TokenId cls_id,
                                   std::size_t max_blocks = 4,
                                   std::vector<TransformerEncoder::Cache>* caches = nullptr);

// Embedding of <CLS> context segments..., truncated to max_positions.
Vector encode_context(const SegmentedText& context, const WordPieceTokenizer& tokenizer,
                      const TransformerEncoder& enc);

// content (zero-padded to layout.content_blocks) ++ context ++ numeric.
FeatureVector assemble_features(const std::vector<Vector>& content, const Vector& context,
                                const std::vector<double>& numeric, const FeatureLayout& layout);

}  // namespace cmtr::encoder
