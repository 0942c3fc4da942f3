#include "cmtr/classifier.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "cmtr/error.hpp"
#include "cmtr/rng.hpp"
#include "json.hpp"

using nlohmann::json;

namespace cmtr::classifier {

void HeadConfig::validate() const {
    if (input_dim == 0) throw ConfigError("head input_dim must be positive");
    if (hidden_units == 0) throw ConfigError("head hidden_units must be positive");
    if (output_classes < 2) throw ConfigError("head needs at least two output classes");
}

FeedForwardHead::FeedForwardHead(HeadConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const auto in = static_cast<Eigen::Index>(config_.input_dim);
    const auto hid = static_cast<Eigen::Index>(config_.hidden_units);
    const auto out = static_cast<Eigen::Index>(config_.output_classes);
    hidden_ = nn::Linear("head.hidden", in, hid, nn::uniform_matrix(in, hid, 1.0 / std::sqrt(double(in)), rng));
    out_ = nn::Linear("head.out", hid, out, nn::uniform_matrix(hid, out, 1.0 / std::sqrt(double(hid)), rng));
    hidden_.bias.value = nn::uniform_matrix(1, hid, 1.0 / std::sqrt(double(in)), rng);
    out_.bias.value = nn::uniform_matrix(1, out, 1.0 / std::sqrt(double(hid)), rng);
}

FeedForwardHead FeedForwardHead::zeros(HeadConfig config) {
    FeedForwardHead head(config, 0);
    for (auto* p : head.parameters()) p->value.setZero();
    return head;
}

Vector FeedForwardHead::logits(const Vector& features, Cache* cache) const {
    if (static_cast<std::size_t>(features.size()) != config_.input_dim)
        throw RuntimeError("feature vector has dimension " + std::to_string(features.size()) + ", head expects " +
                           std::to_string(config_.input_dim));
    nn::Matrix x = features.transpose();
    nn::Matrix pre = hidden_.forward(x);
    nn::Matrix act = pre.cwiseMax(0.0);
    Vector out = out_.forward(act).row(0).transpose();
    if (cache) {
        cache->input = std::move(x);
        cache->hidden_pre = std::move(pre);
        cache->hidden = std::move(act);
    }
    return out;
}

Vector FeedForwardHead::backward(const Cache& cache, const Vector& d_logits) {
    const nn::Matrix d_act = out_.backward(cache.hidden, d_logits.transpose());
    const nn::Matrix d_pre = d_act.array() * (cache.hidden_pre.array() > 0.0).cast<double>();
    return hidden_.backward(cache.input, d_pre).row(0).transpose();
}

std::vector<nn::Parameter*> FeedForwardHead::parameters() {
    return {&hidden_.weight, &hidden_.bias, &out_.weight, &out_.bias};
}

std::vector<const nn::Parameter*> FeedForwardHead::parameters() const {
    return {&hidden_.weight, &hidden_.bias, &out_.weight, &out_.bias};
}

Vector forward(const encoder::FeatureVector& features, const FeedForwardHead& head) {
    if (features.layout.dim() != static_cast<std::size_t>(features.values.size()))
        throw RuntimeError("feature vector does not match its layout");
    return nn::softmax(head.logits(features.values));
}

double cross_entropy(const Vector& probabilities, int label) {
    return -std::log(std::max(probabilities(label), 1e-300));
}

int argmax(const Vector& probabilities) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < probabilities.size(); ++i)
        if (probabilities(i) > probabilities(best)) best = i;
    return static_cast<int>(best);
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (epochs == 0) throw ConfigError("epochs must be at least 1");
}

FeatureExtractor::FeatureExtractor(const WordPieceTokenizer& tokenizer,
                                   const encoder::TransformerEncoder& context_encoder, FeatureOptions options)
    : tokenizer_(tokenizer), context_encoder_(context_encoder), options_(std::move(options)) {
    options_.plan.validate();
    if (options_.layout.hidden_dim != context_encoder_.hidden_dim())
        throw ConfigError("feature layout hidden_dim " + std::to_string(options_.layout.hidden_dim) +
                          " differs from context encoder width " + std::to_string(context_encoder_.hidden_dim()));
    if (options_.plan.max_chunks && *options_.plan.max_chunks > options_.layout.content_blocks)
        throw ConfigError("chunk cap exceeds the number of content blocks in the feature layout");
}

chunker::ChunkSet FeatureExtractor::content_chunks(const std::string& title, const std::string& text) const {
    const TokenSequence ids = tokenizer_.encode(corpus::build_content_string(title, text));
    return chunker::chunk(ids, options_.plan);
}

const Vector& FeatureExtractor::context_part(const corpus::Document& doc) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = context_cache_.find(doc.id); it != context_cache_.end()) return it->second;
    }
    const auto h = static_cast<Eigen::Index>(options_.layout.hidden_dim);
    Vector part = Vector::Zero(h + static_cast<Eigen::Index>(options_.layout.numeric));
    if (options_.use_context && doc.context) {
        const auto inputs = corpus::build_context_inputs(*doc.context, options_.context);
        part.head(h) = encoder::encode_context(inputs.text, tokenizer_, context_encoder_);
        const std::size_t n = std::min(inputs.numeric.size(), options_.layout.numeric);
        for (std::size_t i = 0; i < n; ++i) part(h + static_cast<Eigen::Index>(i)) = inputs.numeric[i];
    }
    std::lock_guard lock(mutex_);
    return context_cache_.emplace(doc.id, std::move(part)).first->second;
}

encoder::FeatureVector FeatureExtractor::assemble(const std::vector<Vector>& content, const Vector& context_part) const {
    const auto h = static_cast<Eigen::Index>(options_.layout.hidden_dim);
    const Vector tail = context_part.tail(context_part.size() - h);
    return encoder::assemble_features(content, context_part.head(h), std::vector<double>(tail.begin(), tail.end()),
                                      options_.layout);
}

std::string FeatureExtractor::fingerprint() const {
    const auto& o = options_;
    json j{{"window", o.plan.window},
           {"overlap", o.plan.overlap},
           {"max_chunks", o.plan.max_chunks ? json(*o.plan.max_chunks) : json(nullptr)},
           {"content_blocks", o.layout.content_blocks},
           {"hidden_dim", o.layout.hidden_dim},
           {"numeric", o.layout.numeric},
           {"author_delimiter", o.context.author_delimiter},
           {"log1p_retweets", o.context.log1p_retweets},
           {"use_context", o.use_context},
           {"tokenizer", tokenizer_.fingerprint()},
           {"context_encoder", encoder::to_json(context_encoder_.config())}};
    // Context encoder weights matter too; hash a few of them cheaply.
    std::uint64_t h = stable_hash(j.dump());
    for (const auto* p : context_encoder_.parameters()) {
        const double probe = p->value.size() ? p->value(0, 0) + p->value.sum() : 0.0;
        h = stable_hash_combine(h, std::to_string(probe));
    }
    return to_hex(h);
}

ModelBundle initialize_bundle(Representation rep, const FeatureExtractor& features, const ModelRecipe& recipe,
                              std::size_t classes, std::uint64_t seed) {
    encoder::EncoderConfig enc_cfg = recipe.content_encoder;
    enc_cfg.trainable = true;
    enc_cfg.validate_for(features.options().plan);
    if (enc_cfg.hidden_dim != features.options().layout.hidden_dim)
        throw ConfigError("content encoder width differs from the feature layout hidden_dim");
    if (enc_cfg.vocab_size != features.tokenizer().vocab_size())
        throw ConfigError("content encoder vocab_size " + std::to_string(enc_cfg.vocab_size) +
                          " differs from tokenizer vocabulary " + std::to_string(features.tokenizer().vocab_size()));

    encoder::TransformerEncoder content(enc_cfg, stable_hash_combine(seed, "content-encoder"));
    if (recipe.content_checkpoint) {
        auto warm = encoder::TransformerEncoder::load(*recipe.content_checkpoint);
        const auto src = warm.parameters();
        const auto dst = content.parameters();
        if (src.size() != dst.size()) throw ConfigError("content checkpoint does not match the encoder config");
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (src[i]->value.rows() != dst[i]->value.rows() || src[i]->value.cols() != dst[i]->value.cols())
                throw ConfigError("content checkpoint parameter " + src[i]->name + " has a different shape");
            dst[i]->value = src[i]->value;
        }
    }
    HeadConfig head_cfg{features.options().layout.dim(), recipe.head_hidden, classes};
    return ModelBundle{rep, std::move(content), FeedForwardHead(head_cfg, stable_hash_combine(seed, "head")), "", {}};
}

namespace {

std::vector<nn::Parameter*> trainable_parameters(ModelBundle& bundle) {
    auto params = bundle.content_encoder.parameters();
    for (auto* p : bundle.head.parameters()) params.push_back(p);
    return params;
}

}  // namespace

Trainer::Trainer(ModelBundle& bundle, const FeatureExtractor& features, const summarize::RepresentationTexts& texts,
                 const TrainConfig& config)
    : bundle_(bundle),
      features_(features),
      texts_(texts),
      optimizer_(trainable_parameters(bundle), nn::AdamWOptions{config.learning_rate, config.weight_decay}) {
    config.validate();
}

const chunker::ChunkSet& Trainer::chunks_for(const corpus::Document& doc) {
    auto it = chunk_cache_.find(doc.id);
    if (it == chunk_cache_.end())
        it = chunk_cache_
                 .emplace(doc.id, features_.content_chunks(doc.title, texts_.text(doc, bundle_.representation)))
                 .first;
    return it->second;
}

double Trainer::compute_gradients(const std::vector<const corpus::Document*>& batch) {
    optimizer_.zero_grad();
    if (batch.empty()) return 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    const auto h = static_cast<Eigen::Index>(features_.options().layout.hidden_dim);
    double total = 0.0;
    for (const auto* doc : batch) {
        std::vector<encoder::TransformerEncoder::Cache> caches;
        const auto blocks = encoder::encode_content(chunks_for(*doc), bundle_.content_encoder,
                                                    features_.tokenizer().cls_id(),
                                                    features_.options().layout.content_blocks, &caches);
        const auto feats = features_.assemble(blocks, features_.context_part(*doc));
        FeedForwardHead::Cache head_cache;
        const Vector probs = nn::softmax(bundle_.head.logits(feats.values, &head_cache));
        total += cross_entropy(probs, doc->label);

        Vector d_logits = probs;
        d_logits(doc->label) -= 1.0;
        d_logits *= scale;
        const Vector d_features = bundle_.head.backward(head_cache, d_logits);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            bundle_.content_encoder.backward(caches[i], d_features.segment(static_cast<Eigen::Index>(i) * h, h));
    }
    return total * scale;
}

double Trainer::step(const std::vector<const corpus::Document*>& batch) {
    const double loss = compute_gradients(batch);
    optimizer_.step();
    return loss;
}

std::string model_fingerprint(Representation rep, const TrainConfig& train, const ModelRecipe& recipe,
                              const FeatureExtractor& features, std::size_t classes,
                              const std::string& text_fingerprint) {
    json j{{"representation", to_string(rep)},
           {"batch_size", train.batch_size},
           {"learning_rate", train.learning_rate},
           {"weight_decay", train.weight_decay},
           {"epochs", train.epochs},
           {"seed", train.seed},
           {"content_encoder", encoder::to_json(recipe.content_encoder)},
           {"head_hidden", recipe.head_hidden},
           {"content_checkpoint", recipe.content_checkpoint ? recipe.content_checkpoint->string() : ""},
           {"features", features.fingerprint()},
           {"classes", classes},
           {"texts", text_fingerprint}};
    return to_hex(stable_hash(j.dump()));
}

ModelBundle train_one(Representation rep, const corpus::LabeledDataset& train, const TrainConfig& cfg,
                      const summarize::RepresentationTexts& texts, const FeatureExtractor& features,
                      const ModelRecipe& recipe, const std::string& text_fingerprint) {
    cfg.validate();
    if (train.empty()) throw ConfigError("training set is empty");
    texts.require_all(train.documents, rep);

    const auto classes = static_cast<std::size_t>(train.num_classes());
    ModelBundle bundle = initialize_bundle(rep, features, recipe, classes, cfg.seed);
    bundle.fingerprint = model_fingerprint(rep, cfg, recipe, features, classes, text_fingerprint);
    Trainer trainer(bundle, features, texts, cfg);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(stable_hash_combine(cfg.seed, "batches"));
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<const corpus::Document*> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
                batch.push_back(&train.documents[order[i]]);
            loss_sum += trainer.step(batch) * static_cast<double>(batch.size());
        }
        bundle.epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
    }
    for (auto* p : bundle.content_encoder.parameters()) p->zero_grad();
    for (auto* p : bundle.head.parameters()) p->zero_grad();
    return bundle;
}

Prediction predict(const ModelBundle& bundle, const corpus::Document& doc, const FeatureExtractor& features,
                   const summarize::RepresentationTexts& texts) {
    const auto chunks = features.content_chunks(doc.title, texts.text(doc, bundle.representation));
    const auto blocks = encoder::encode_content(chunks, bundle.content_encoder, features.tokenizer().cls_id(),
                                                features.options().layout.content_blocks);
    Prediction p;
    p.probabilities = forward(features.assemble(blocks, features.context_part(doc)), bundle.head);
    p.label = argmax(p.probabilities);
    return p;
}

void ModelBundle::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    const auto& hc = head.config();
    const json config{{"representation", to_string(representation)},
                      {"fingerprint", fingerprint},
                      {"content_encoder", json::parse(encoder::to_json(content_encoder.config()))},
                      {"head", {{"input_dim", hc.input_dim}, {"hidden_units", hc.hidden_units},
                                {"output_classes", hc.output_classes}}}};
    std::vector<const nn::Parameter*> params = content_encoder.parameters();
    for (const auto* p : head.parameters()) params.push_back(p);
    nn::save_parameters(dir / "weights.bin", config.dump(), params);
    {
        std::ofstream out(dir / "config.json");
        out << config.dump(2) << '\n';
    }
    std::ofstream log(dir / "loss_log.tsv");
    log << "epoch\tmean_loss\n";
    for (std::size_t i = 0; i < epoch_losses.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", epoch_losses[i]);
        log << i + 1 << '\t' << buf << '\n';
    }
    if (!log) throw RuntimeError("cannot write model bundle to " + dir.string());
}

ModelBundle ModelBundle::load(const std::filesystem::path& dir) {
    const std::string header = nn::load_parameters(dir / "weights.bin", {});
    const json config = json::parse(header);
    const auto& hj = config.at("head");
    HeadConfig hc{hj.at("input_dim").get<std::size_t>(), hj.at("hidden_units").get<std::size_t>(),
                  hj.at("output_classes").get<std::size_t>()};
    ModelBundle bundle{parse_representation(config.at("representation").get<std::string>()),
                       encoder::TransformerEncoder(encoder::encoder_config_from_json(config.at("content_encoder").dump()), 0),
                       FeedForwardHead(hc, 0), config.at("fingerprint").get<std::string>(), {}};
    std::vector<nn::Parameter*> params = bundle.content_encoder.parameters();
    for (auto* p : bundle.head.parameters()) params.push_back(p);
    nn::load_parameters(dir / "weights.bin", params);

    std::ifstream log(dir / "loss_log.tsv");
    std::string line;
    std::getline(log, line);
    while (std::getline(log, line)) {
        const auto tab = line.find('\t');
        if (tab != std::string::npos) bundle.epoch_losses.push_back(std::stod(line.substr(tab + 1)));
    }
    return bundle;
}

}  // namespace cmtr::classifier
