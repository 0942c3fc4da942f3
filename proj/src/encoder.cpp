#include "cmtr/encoder.hpp"

#include <cmath>

#include "cmtr/error.hpp"
#include "json.hpp"

using nlohmann::json;

namespace cmtr::encoder {

EncoderConfig EncoderConfig::tiny(std::size_t vocab_size) {
    EncoderConfig c;
    c.layers = 2;
    c.hidden_dim = 32;
    c.heads = 2;
    c.intermediate_dim = 64;
    c.vocab_size = vocab_size;
    return c;
}

void EncoderConfig::validate() const {
    if (layers == 0 || hidden_dim == 0 || heads == 0 || intermediate_dim == 0 || max_positions == 0 ||
        vocab_size == 0)
        throw ConfigError("encoder dimensions must all be positive");
    if (hidden_dim % heads != 0)
        throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by heads " +
                          std::to_string(heads));
}

void EncoderConfig::validate_for(const chunker::ChunkPlan& plan) const {
    validate();
    if (max_positions < plan.window + 1)
        throw ConfigError("encoder max_positions " + std::to_string(max_positions) + " cannot hold a " +
                          std::to_string(plan.window) + "-token chunk plus its sentinel");
}

std::string to_json(const EncoderConfig& c) {
    return json{{"layers", c.layers},
                {"hidden_dim", c.hidden_dim},
                {"heads", c.heads},
                {"intermediate_dim", c.intermediate_dim},
                {"max_positions", c.max_positions},
                {"vocab_size", c.vocab_size},
                {"vocab", c.vocab},
                {"layer_norm_eps", c.layer_norm_eps},
                {"init_stddev", c.init_stddev},
                {"trainable", c.trainable}}
        .dump();
}

EncoderConfig encoder_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    EncoderConfig c;
    c.layers = j.value("layers", c.layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.heads = j.value("heads", c.heads);
    c.intermediate_dim = j.value("intermediate_dim", c.intermediate_dim);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.vocab = j.value("vocab", c.vocab);
    c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
    c.init_stddev = j.value("init_stddev", c.init_stddev);
    c.trainable = j.value("trainable", c.trainable);
    return c;
}

TransformerEncoder::TransformerEncoder(EncoderConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
    const auto inter = static_cast<Eigen::Index>(config_.intermediate_dim);
    const double sd = config_.init_stddev;
    token_embedding_ = nn::Parameter(
        "embeddings.token", nn::normal_matrix(static_cast<Eigen::Index>(config_.vocab_size), h, sd, rng));
    position_embedding_ = nn::Parameter(
        "embeddings.position", nn::normal_matrix(static_cast<Eigen::Index>(config_.max_positions), h, sd, rng));
    embed_ln_ = nn::LayerNorm("embeddings.ln", h, config_.layer_norm_eps);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        Layer layer;
        layer.query = nn::Linear(p + "query", h, h, nn::normal_matrix(h, h, sd, rng));
        layer.key = nn::Linear(p + "key", h, h, nn::normal_matrix(h, h, sd, rng));
        layer.value = nn::Linear(p + "value", h, h, nn::normal_matrix(h, h, sd, rng));
        layer.output = nn::Linear(p + "attn_out", h, h, nn::normal_matrix(h, h, sd, rng));
        layer.attn_ln = nn::LayerNorm(p + "attn_ln", h, config_.layer_norm_eps);
        layer.ff_in = nn::Linear(p + "ff_in", h, inter, nn::normal_matrix(h, inter, sd, rng));
        layer.ff_out = nn::Linear(p + "ff_out", inter, h, nn::normal_matrix(inter, h, sd, rng));
        layer.out_ln = nn::LayerNorm(p + "out_ln", h, config_.layer_norm_eps);
        layers_.push_back(std::move(layer));
    }
}

Matrix TransformerEncoder::layer_forward(const Layer& layer, const Matrix& x, LayerCache* cache) const {
    const auto heads = static_cast<Eigen::Index>(config_.heads);
    const Eigen::Index d = static_cast<Eigen::Index>(config_.hidden_dim) / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    Matrix q = layer.query.forward(x);
    Matrix k = layer.key.forward(x);
    Matrix v = layer.value.forward(x);
    Matrix context(x.rows(), x.cols());
    std::vector<Matrix> probs;
    for (Eigen::Index h = 0; h < heads; ++h) {
        Matrix p = nn::softmax_rows(q.middleCols(h * d, d) * k.middleCols(h * d, d).transpose() * scale);
        context.middleCols(h * d, d) = p * v.middleCols(h * d, d);
        if (cache) probs.push_back(std::move(p));
    }
    const Matrix attn = layer.output.forward(context);

    nn::LayerNorm::Cache attn_ln_cache, out_ln_cache;
    Matrix x1 = layer.attn_ln.forward(x + attn, cache ? &attn_ln_cache : nullptr);
    Matrix ff_pre = layer.ff_in.forward(x1);
    Matrix ff_act = nn::gelu(ff_pre);
    Matrix out = layer.out_ln.forward(x1 + layer.ff_out.forward(ff_act), cache ? &out_ln_cache : nullptr);

    if (cache) {
        cache->input = x;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->context = std::move(context);
        cache->probs = std::move(probs);
        cache->attn_ln = std::move(attn_ln_cache);
        cache->attn_ln_out = std::move(x1);
        cache->ff_pre = std::move(ff_pre);
        cache->ff_act = std::move(ff_act);
        cache->out_ln = std::move(out_ln_cache);
    }
    return out;
}

Matrix TransformerEncoder::layer_backward(Layer& layer, const LayerCache& c, const Matrix& d_out) {
    const auto heads = static_cast<Eigen::Index>(config_.heads);
    const Eigen::Index d = static_cast<Eigen::Index>(config_.hidden_dim) / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    const Matrix d_res2 = layer.out_ln.backward(c.out_ln, d_out);
    const Matrix d_act = layer.ff_out.backward(c.ff_act, d_res2);
    const Matrix d_pre = d_act.cwiseProduct(nn::gelu_grad(c.ff_pre));
    const Matrix d_x1 = layer.ff_in.backward(c.attn_ln_out, d_pre) + d_res2;

    const Matrix d_res1 = layer.attn_ln.backward(c.attn_ln, d_x1);
    const Matrix d_context = layer.output.backward(c.context, d_res1);

    Matrix dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
    for (Eigen::Index h = 0; h < heads; ++h) {
        const Matrix& p = c.probs[static_cast<std::size_t>(h)];
        const auto dc = d_context.middleCols(h * d, d);
        const Matrix dp = dc * c.v.middleCols(h * d, d).transpose();
        dv.middleCols(h * d, d) = p.transpose() * dc;
        const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
        const Matrix ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
        dq.middleCols(h * d, d) = ds * c.k.middleCols(h * d, d);
        dk.middleCols(h * d, d) = ds.transpose() * c.q.middleCols(h * d, d);
    }
    Matrix dx = layer.query.backward(c.input, dq);
    dx += layer.key.backward(c.input, dk);
    dx += layer.value.backward(c.input, dv);
    dx += d_res1;
    return dx;
}

Vector TransformerEncoder::forward(std::span<const TokenId> ids, Cache* cache) const {
    if (ids.empty()) throw RuntimeError("encoder input is empty");
    if (ids.size() > config_.max_positions)
        throw RuntimeError("encoder input has " + std::to_string(ids.size()) + " tokens, limit is " +
                           std::to_string(config_.max_positions));
    const auto n = static_cast<Eigen::Index>(ids.size());
    Matrix x(n, static_cast<Eigen::Index>(config_.hidden_dim));
    for (Eigen::Index t = 0; t < n; ++t) {
        const TokenId id = ids[static_cast<std::size_t>(t)];
        if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size)
            throw RuntimeError("token id " + std::to_string(id) + " outside encoder vocabulary of " +
                               std::to_string(config_.vocab_size));
        x.row(t) = token_embedding_.value.row(id) + position_embedding_.value.row(t);
    }
    if (cache) {
        cache->ids.assign(ids.begin(), ids.end());
        cache->layers.assign(layers_.size(), LayerCache{});
    }
    x = embed_ln_.forward(x, cache ? &cache->embed_ln : nullptr);
    for (std::size_t l = 0; l < layers_.size(); ++l)
        x = layer_forward(layers_[l], x, cache ? &cache->layers[l] : nullptr);
    return x.row(0).transpose();
}

std::vector<Vector> TransformerEncoder::encode(const std::vector<TokenSequence>& batch) const {
    std::vector<Vector> out;
    out.reserve(batch.size());
    for (const auto& seq : batch) out.push_back(forward(seq));
    return out;
}

void TransformerEncoder::backward(const Cache& cache, const Vector& d_embedding) {
    if (!config_.trainable) throw RuntimeError("backward called on a frozen encoder");
    if (cache.layers.size() != layers_.size()) throw RuntimeError("encoder cache does not match this encoder");
    const auto n = static_cast<Eigen::Index>(cache.ids.size());
    Matrix d = Matrix::Zero(n, static_cast<Eigen::Index>(config_.hidden_dim));
    d.row(0) = d_embedding.transpose();
    for (std::size_t l = layers_.size(); l-- > 0;) d = layer_backward(layers_[l], cache.layers[l], d);
    d = embed_ln_.backward(cache.embed_ln, d);
    for (Eigen::Index t = 0; t < n; ++t) {
        token_embedding_.grad.row(cache.ids[static_cast<std::size_t>(t)]) += d.row(t);
        position_embedding_.grad.row(t) += d.row(t);
    }
}

std::vector<nn::Parameter*> TransformerEncoder::parameters() {
    std::vector<nn::Parameter*> out{&token_embedding_, &position_embedding_, &embed_ln_.gamma, &embed_ln_.beta};
    for (auto& l : layers_) {
        for (nn::Linear* lin : {&l.query, &l.key, &l.value, &l.output}) {
            out.push_back(&lin->weight);
            out.push_back(&lin->bias);
        }
        out.push_back(&l.attn_ln.gamma);
        out.push_back(&l.attn_ln.beta);
        for (nn::Linear* lin : {&l.ff_in, &l.ff_out}) {
            out.push_back(&lin->weight);
            out.push_back(&lin->bias);
        }
        out.push_back(&l.out_ln.gamma);
        out.push_back(&l.out_ln.beta);
    }
    return out;
}

std::vector<const nn::Parameter*> TransformerEncoder::parameters() const {
    auto mutable_params = const_cast<TransformerEncoder*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

void TransformerEncoder::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

void TransformerEncoder::save(const std::filesystem::path& path) const {
    nn::save_parameters(path, to_json(config_), parameters());
}

TransformerEncoder TransformerEncoder::load(const std::filesystem::path& path) {
    // Read the header first to size the model, then fill the weights.
    const std::string header = nn::load_parameters(path, {});
    TransformerEncoder enc(encoder_config_from_json(header), 0);
    nn::load_parameters(path, enc.parameters());
    return enc;
}

TokenSequence with_sentinel(const TokenSequence& chunk, TokenId cls_id, std::size_t max_positions,
                            std::size_t chunk_index) {
    TokenSequence out;
    if (chunk.empty() || chunk.front() != cls_id) {
        out.reserve(chunk.size() + 1);
        out.push_back(cls_id);
    }
    out.insert(out.end(), chunk.begin(), chunk.end());
    if (out.size() > max_positions)
        throw RuntimeError("content chunk " + std::to_string(chunk_index) + " has " + std::to_string(out.size()) +
                           " tokens after sentinel insertion; encoder accepts " + std::to_string(max_positions));
    return out;
}

std::vector<Vector> encode_content(const chunker::ChunkSet& chunks, const TransformerEncoder& enc, TokenId cls_id,
                                   std::size_t max_blocks, std::vector<TransformerEncoder::Cache>* caches) {
    const std::size_t n = std::min(chunks.size(), max_blocks);
    std::vector<Vector> out;
    out.reserve(n);
    if (caches) caches->assign(n, TransformerEncoder::Cache{});
    for (std::size_t i = 0; i < n; ++i) {
        const TokenSequence ids = with_sentinel(chunks.chunks[i], cls_id, enc.config().max_positions, i);
        out.push_back(enc.forward(ids, caches ? &(*caches)[i] : nullptr));
    }
    return out;
}

Vector encode_context(const SegmentedText& context, const WordPieceTokenizer& tokenizer,
                      const TransformerEncoder& enc) {
    TokenSequence ids = tokenizer.encode(context);
    if (ids.size() > enc.config().max_positions) ids.resize(enc.config().max_positions);
    return enc.forward(ids);
}

FeatureVector assemble_features(const std::vector<Vector>& content, const Vector& context,
                                const std::vector<double>& numeric, const FeatureLayout& layout) {
    const auto h = static_cast<Eigen::Index>(layout.hidden_dim);
    if (content.size() > layout.content_blocks)
        throw RuntimeError("got " + std::to_string(content.size()) + " content blocks, layout holds " +
                           std::to_string(layout.content_blocks));
    if (context.size() != h)
        throw RuntimeError("context embedding has dimension " + std::to_string(context.size()) + ", expected " +
                           std::to_string(layout.hidden_dim));
    if (numeric.size() != layout.numeric)
        throw RuntimeError("got " + std::to_string(numeric.size()) + " numeric features, layout expects " +
                           std::to_string(layout.numeric));

    FeatureVector f{Vector::Zero(static_cast<Eigen::Index>(layout.dim())), layout};
    for (std::size_t i = 0; i < content.size(); ++i) {
        if (content[i].size() != h)
            throw RuntimeError("content block " + std::to_string(i) + " has dimension " +
                               std::to_string(content[i].size()) + ", expected " + std::to_string(layout.hidden_dim));
        f.values.segment(static_cast<Eigen::Index>(i) * h, h) = content[i];
    }
    f.values.segment(static_cast<Eigen::Index>(layout.context_offset()), h) = context;
    for (std::size_t i = 0; i < numeric.size(); ++i)
        f.values(static_cast<Eigen::Index>(layout.numeric_offset() + i)) = numeric[i];
    return f;
}

}  // namespace cmtr::encoder
