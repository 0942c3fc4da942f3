#include "cmtr/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cmtr/error.hpp"
#include "cmtr/rng.hpp"
#include "json.hpp"

using nlohmann::json;

namespace cmtr::pipeline {

namespace fs = std::filesystem;

namespace {

// Reads obj[key] into dst when present, mapping type errors to ConfigError.
template <class T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    try {
        dst = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + key + ": expected " + std::string(json(T{}).type_name()) + ", got " +
                          it->type_name());
    }
}

template <class T>
void read(const json& obj, const char* key, std::optional<T>& dst, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    T v{};
    read(obj, key, v, where);
    dst = v;
}

void read_path(const json& obj, const char* key, fs::path& dst, const std::string& where) {
    std::string s;
    read(obj, key, s, where);
    if (!s.empty()) dst = s;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError("unknown config key '" + where + key + "'");
    }
}

const json& section(const json& root, const char* key) {
    static const json empty = json::object();
    auto it = root.find(key);
    return it == root.end() ? empty : *it;
}

EncoderShape read_shape(const json& j, const std::string& where) {
    check_keys(j, {"preset", "layers", "hidden_dim", "heads", "intermediate_dim", "max_positions"}, where);
    EncoderShape s;
    read(j, "preset", s.preset, where);
    read(j, "layers", s.layers, where);
    read(j, "hidden_dim", s.hidden_dim, where);
    read(j, "heads", s.heads, where);
    read(j, "intermediate_dim", s.intermediate_dim, where);
    read(j, "max_positions", s.max_positions, where);
    return s;
}

json shape_json(const EncoderShape& s) {
    json j{{"preset", s.preset}};
    if (s.layers) j["layers"] = *s.layers;
    if (s.hidden_dim) j["hidden_dim"] = *s.hidden_dim;
    if (s.heads) j["heads"] = *s.heads;
    if (s.intermediate_dim) j["intermediate_dim"] = *s.intermediate_dim;
    if (s.max_positions) j["max_positions"] = *s.max_positions;
    return j;
}

std::string averaging_name(eval::Averaging a) { return a == eval::Averaging::binary ? "binary" : "macro"; }

std::string system_name(Representation rep) { return std::string(to_string(rep)); }

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw RuntimeError(path.string() + ": " + e.what());
    }
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
}

void print_metrics(std::ostream& out, const std::map<std::string, eval::MetricValues>& metrics) {
    for (const auto& [system, m] : metrics)
        out << system << ": accuracy=" << fmt(m.accuracy) << " precision=" << fmt(m.precision)
            << " recall=" << fmt(m.recall) << " f1=" << fmt(m.f1) << '\n';
}

struct Prepared {
    corpus::LabeledDataset dataset;
    std::optional<corpus::LabeledDataset> fixed_test;
    json manifest;
};

Prepared load_prepared(const RunConfig& config) {
    const Paths paths{config.output_dir};
    if (!fs::exists(paths.manifest()))
        throw ConfigError("no prepared dataset under " + config.output_dir.string() + "; run prepare first");
    Prepared p;
    p.manifest = read_json(paths.manifest());
    const auto expected = dataset_fingerprint(config);
    const auto found = p.manifest.value("fingerprint", std::string());
    if (found != expected)
        throw ConfigError("the dataset under " + config.output_dir.string() +
                          " was prepared with a different configuration (fingerprint " + found + ", current " +
                          expected + "); rerun prepare --force");
    const auto classes = p.manifest.at("class_names").get<std::vector<std::string>>();
    p.dataset = corpus::load_jsonl(paths.dataset(), classes);
    if (fs::exists(paths.test_set())) p.fixed_test = corpus::load_jsonl(paths.test_set(), classes);
    return p;
}

// Union of documents that need summaries.
corpus::LabeledDataset summary_corpus(const Prepared& p) {
    auto docs = p.dataset.documents;
    if (p.fixed_test) docs.insert(docs.end(), p.fixed_test->documents.begin(), p.fixed_test->documents.end());
    return p.dataset.with_documents(std::move(docs));
}

std::pair<corpus::LabeledDataset, corpus::LabeledDataset> manifest_split(const Prepared& p) {
    if (p.fixed_test) return {p.dataset, *p.fixed_test};
    const auto train_ids = p.manifest.at("train_ids").get<std::set<std::string>>();
    std::vector<corpus::Document> train, test;
    for (const auto& d : p.dataset.documents) (train_ids.count(d.id) ? train : test).push_back(d);
    return {p.dataset.with_documents(std::move(train)), p.dataset.with_documents(std::move(test))};
}

std::string text_fingerprint(Representation rep, const summarize::Summarizer& summarizer) {
    return rep == Representation::original ? std::string() : summarizer.fingerprint(rep);
}

std::vector<std::string> tokenizer_texts(const corpus::LabeledDataset& train) {
    std::vector<std::string> texts;
    for (const auto& d : train.documents) {
        texts.push_back(d.title);
        texts.push_back(d.body);
        if (d.context) {
            for (const auto& s : corpus::build_context_inputs(*d.context).text.segments) texts.push_back(s);
        }
    }
    return texts;
}

}  // namespace

encoder::EncoderConfig EncoderShape::resolve(std::size_t vocab_size) const {
    encoder::EncoderConfig c;
    if (preset == "tiny") c = encoder::EncoderConfig::tiny(vocab_size);
    else if (preset != "base") throw ConfigError("unknown encoder preset '" + preset + "' (use base or tiny)");
    c.vocab_size = vocab_size;
    if (layers) c.layers = *layers;
    if (hidden_dim) c.hidden_dim = *hidden_dim;
    if (heads) c.heads = *heads;
    if (intermediate_dim) c.intermediate_dim = *intermediate_dim;
    if (max_positions) c.max_positions = *max_positions;
    return c;
}

void RunConfig::validate() const {
    const auto& f = dataset.format;
    if (f != "fakenewsnet" && f != "ctfan" && f != "jsonl" && f != "synthetic")
        throw ConfigError("unknown dataset format '" + f + "' (use fakenewsnet, ctfan, jsonl or synthetic)");
    if (f != "synthetic") {
        if (dataset.path.empty()) throw ConfigError("dataset.path is required for format " + f);
        if (!fs::exists(dataset.path)) throw ConfigError("dataset path does not exist: " + dataset.path.string());
    }
    if (dataset.test_path && !fs::exists(*dataset.test_path))
        throw ConfigError("dataset test_path does not exist: " + dataset.test_path->string());
    if (dataset.test_path && f != "ctfan") throw ConfigError("dataset.test_path is only supported for ctfan");
    if (f == "jsonl" && dataset.classes.size() < 2) throw ConfigError("jsonl datasets need at least two classes");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    if (representations.empty()) throw ConfigError("at least one representation must be enabled");
    for (std::size_t i = 0; i < representations.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (representations[i] == representations[j])
                throw ConfigError("representation " + system_name(representations[i]) + " listed twice");
    corpus::SplitSpec{train_fraction, seed}.validate();
    chunk.validate();
    if (!chunk.max_chunks) throw ConfigError("chunk.max_chunks is required for the classifier");
    extractive_config().validate();
    abstractive_config().validate();
    train_config(seed).validate();
    if (trials == 0) throw ConfigError("trials must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (generator.kind != "bigram" && generator.kind != "process")
        throw ConfigError("unknown generator kind '" + generator.kind + "' (use bigram or process)");
    if (generator.kind == "process" && generator.command.empty())
        throw ConfigError("generator.command is required for the process generator");
    if (vocab_size < 16 || generator.vocab_size < 16) throw ConfigError("vocab_size must be at least 16");
    if (head_hidden == 0) throw ConfigError("head_hidden must be positive");
    if (threads == 0) throw ConfigError("threads must be at least 1");
    const auto content = encoder.resolve(vocab_size);
    const auto context = context_encoder.resolve(vocab_size);
    content.validate();
    context.validate();
    content.validate_for(chunk);
    if (content.hidden_dim != context.hidden_dim)
        throw ConfigError("content and context encoders must share hidden_dim (" + std::to_string(content.hidden_dim) +
                          " vs " + std::to_string(context.hidden_dim) + ")");
}

classifier::TrainConfig RunConfig::train_config(std::uint64_t s) const {
    return {batch_size, learning_rate, weight_decay, epochs, s};
}

summarize::ExtractiveConfig RunConfig::extractive_config() const { return {extractive_ratio, coref, seed}; }

summarize::AbstractiveConfig RunConfig::abstractive_config() const {
    return {top_k, top_p, abstractive_ratio, seed};
}

bool RunConfig::has(Representation rep) const {
    return std::find(representations.begin(), representations.end(), rep) != representations.end();
}

RunConfig config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root,
               {"dataset", "output_dir", "seed", "representations", "use_context", "train_fraction", "oversample",
                "chunk", "extractive", "abstractive", "generator", "encoder", "context_encoder", "vocab_size",
                "head_hidden", "train", "trials", "alpha", "averaging", "probability_fallback", "log1p_retweets",
                "threads"},
               "");
    RunConfig c;

    const auto& ds = section(root, "dataset");
    check_keys(ds, {"format", "path", "domain", "test_path", "classes", "synthetic"}, "dataset.");
    read(ds, "format", c.dataset.format, "dataset.");
    read_path(ds, "path", c.dataset.path, "dataset.");
    read(ds, "domain", c.dataset.domain, "dataset.");
    if (ds.contains("test_path") && !ds.at("test_path").is_null()) {
        fs::path p;
        read_path(ds, "test_path", p, "dataset.");
        if (!p.empty()) c.dataset.test_path = p;
    }
    read(ds, "classes", c.dataset.classes, "dataset.");
    const auto& syn = section(ds, "synthetic");
    check_keys(syn, {"documents", "fake_fraction", "long_fraction", "seed"}, "dataset.synthetic.");
    read(syn, "documents", c.dataset.synthetic.documents, "dataset.synthetic.");
    read(syn, "fake_fraction", c.dataset.synthetic.fake_fraction, "dataset.synthetic.");
    read(syn, "long_fraction", c.dataset.synthetic.long_fraction, "dataset.synthetic.");
    read(syn, "seed", c.dataset.synthetic.seed, "dataset.synthetic.");

    read_path(root, "output_dir", c.output_dir, "");
    read(root, "seed", c.seed, "");
    if (root.contains("representations")) {
        std::vector<std::string> names;
        read(root, "representations", names, "");
        c.representations.clear();
        for (const auto& n : names) c.representations.push_back(parse_representation(n));
    }
    read(root, "use_context", c.use_context, "");
    read(root, "train_fraction", c.train_fraction, "");
    read(root, "oversample", c.oversample, "");

    const auto& ch = section(root, "chunk");
    check_keys(ch, {"window", "overlap", "max_chunks"}, "chunk.");
    read(ch, "window", c.chunk.window, "chunk.");
    read(ch, "overlap", c.chunk.overlap, "chunk.");
    read(ch, "max_chunks", c.chunk.max_chunks, "chunk.");

    const auto& ex = section(root, "extractive");
    check_keys(ex, {"ratio", "coref"}, "extractive.");
    read(ex, "ratio", c.extractive_ratio, "extractive.");
    read(ex, "coref", c.coref, "extractive.");

    const auto& ab = section(root, "abstractive");
    check_keys(ab, {"top_k", "top_p", "target_ratio"}, "abstractive.");
    read(ab, "top_k", c.top_k, "abstractive.");
    read(ab, "top_p", c.top_p, "abstractive.");
    read(ab, "target_ratio", c.abstractive_ratio, "abstractive.");

    const auto& gen = section(root, "generator");
    check_keys(gen, {"kind", "command", "vocab_size"}, "generator.");
    read(gen, "kind", c.generator.kind, "generator.");
    read(gen, "command", c.generator.command, "generator.");
    read(gen, "vocab_size", c.generator.vocab_size, "generator.");

    c.encoder = read_shape(section(root, "encoder"), "encoder.");
    c.context_encoder = root.contains("context_encoder") ? read_shape(section(root, "context_encoder"), "context_encoder.")
                                                         : c.encoder;
    read(root, "vocab_size", c.vocab_size, "");
    read(root, "head_hidden", c.head_hidden, "");

    const auto& tr = section(root, "train");
    check_keys(tr, {"batch_size", "learning_rate", "weight_decay", "epochs"}, "train.");
    read(tr, "batch_size", c.batch_size, "train.");
    read(tr, "learning_rate", c.learning_rate, "train.");
    read(tr, "weight_decay", c.weight_decay, "train.");
    read(tr, "epochs", c.epochs, "train.");

    read(root, "trials", c.trials, "");
    read(root, "alpha", c.alpha, "");
    if (root.contains("averaging")) {
        std::string a;
        read(root, "averaging", a, "");
        if (a == "binary") c.averaging = eval::Averaging::binary;
        else if (a == "macro") c.averaging = eval::Averaging::macro;
        else throw ConfigError("averaging must be binary or macro, got '" + a + "'");
    }
    read(root, "probability_fallback", c.probability_fallback, "");
    read(root, "log1p_retweets", c.log1p_retweets, "");
    read(root, "threads", c.threads, "");
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string config_to_json(const RunConfig& c) {
    json reps = json::array();
    for (auto r : c.representations) reps.push_back(system_name(r));
    json ds{{"format", c.dataset.format},
            {"path", c.dataset.path.string()},
            {"domain", c.dataset.domain},
            {"test_path", c.dataset.test_path ? json(c.dataset.test_path->string()) : json(nullptr)},
            {"classes", c.dataset.classes},
            {"synthetic",
             {{"documents", c.dataset.synthetic.documents},
              {"fake_fraction", c.dataset.synthetic.fake_fraction},
              {"long_fraction", c.dataset.synthetic.long_fraction},
              {"seed", c.dataset.synthetic.seed}}}};
    json j{{"dataset", ds},
           {"output_dir", c.output_dir.string()},
           {"seed", c.seed},
           {"representations", reps},
           {"use_context", c.use_context},
           {"train_fraction", c.train_fraction},
           {"oversample", c.oversample},
           {"chunk",
            {{"window", c.chunk.window},
             {"overlap", c.chunk.overlap},
             {"max_chunks", c.chunk.max_chunks ? json(*c.chunk.max_chunks) : json(nullptr)}}},
           {"extractive", {{"ratio", c.extractive_ratio}, {"coref", c.coref}}},
           {"abstractive", {{"top_k", c.top_k}, {"top_p", c.top_p}, {"target_ratio", c.abstractive_ratio}}},
           {"generator", {{"kind", c.generator.kind}, {"command", c.generator.command}, {"vocab_size", c.generator.vocab_size}}},
           {"encoder", shape_json(c.encoder)},
           {"context_encoder", shape_json(c.context_encoder)},
           {"vocab_size", c.vocab_size},
           {"head_hidden", c.head_hidden},
           {"train",
            {{"batch_size", c.batch_size},
             {"learning_rate", c.learning_rate},
             {"weight_decay", c.weight_decay},
             {"epochs", c.epochs}}},
           {"trials", c.trials},
           {"alpha", c.alpha},
           {"averaging", averaging_name(c.averaging)},
           {"probability_fallback", c.probability_fallback},
           {"log1p_retweets", c.log1p_retweets},
           {"threads", c.threads}};
    return j.dump(2);
}

std::string dataset_fingerprint(const RunConfig& c) {
    const json ds = json::parse(config_to_json(c)).at("dataset");
    const json j{{"dataset", ds}, {"seed", c.seed}, {"train_fraction", c.train_fraction}};
    return to_hex(stable_hash(j.dump()));
}

corpus::LoadResult load_dataset(const RunConfig& c) {
    const auto& f = c.dataset.format;
    if (f == "fakenewsnet") return corpus::load_fakenewsnet(c.dataset.path, c.dataset.domain);
    if (f == "ctfan") return corpus::load_ctfan(c.dataset.path);
    if (f == "jsonl") {
        corpus::LoadResult r;
        r.dataset = corpus::load_jsonl(c.dataset.path, c.dataset.classes);
        r.report.kept = r.dataset.size();
        return r;
    }
    if (f == "synthetic") {
        corpus::LoadResult r;
        r.dataset = corpus::make_synthetic(c.dataset.synthetic);
        r.report.kept = r.dataset.size();
        return r;
    }
    throw ConfigError("unknown dataset format '" + f + "'");
}

std::optional<corpus::LabeledDataset> load_fixed_test(const RunConfig& c) {
    if (!c.dataset.test_path) return std::nullopt;
    return corpus::load_ctfan(*c.dataset.test_path).dataset;
}

SummaryBackends make_backends(const RunConfig& c, const corpus::LabeledDataset& corpus) {
    SummaryBackends b;
    b.embedder = std::make_unique<summarize::HashingEmbedder>();
    if (c.generator.kind == "process") {
        b.generator = std::make_unique<summarize::ProcessGenerator>(c.generator.command);
    } else {
        std::vector<std::string> texts;
        for (const auto& d : corpus.documents) texts.push_back(d.body);
        b.generator = std::make_unique<summarize::BigramSampler>(WordPieceTokenizer::build(texts, c.generator.vocab_size));
    }
    b.summarizer =
        std::make_unique<summarize::Summarizer>(c.extractive_config(), c.abstractive_config(), *b.embedder, *b.generator);
    return b;
}

classifier::FeatureOptions feature_options(const RunConfig& c, std::size_t hidden_dim, bool use_context) {
    classifier::FeatureOptions o;
    o.plan = c.chunk;
    o.layout = encoder::FeatureLayout{*c.chunk.max_chunks, hidden_dim, 1};
    o.context = corpus::ContextOptions{};
    o.context.log1p_retweets = c.log1p_retweets;
    o.use_context = use_context;
    return o;
}

classifier::ModelRecipe model_recipe(const RunConfig& c, std::size_t vocab_size) {
    classifier::ModelRecipe r;
    r.content_encoder = c.encoder.resolve(vocab_size);
    r.head_hidden = c.head_hidden;
    return r;
}

TrainedSystem train_system(const RunConfig& c, const corpus::LabeledDataset& train, std::uint64_t seed,
                           const summarize::RepresentationTexts& texts, const summarize::Summarizer& summarizer,
                           bool use_context) {
    TrainedSystem s;
    s.tokenizer = std::make_unique<WordPieceTokenizer>(WordPieceTokenizer::build(tokenizer_texts(train), c.vocab_size));
    auto ctx_cfg = c.context_encoder.resolve(s.tokenizer->vocab_size());
    ctx_cfg.trainable = false;
    ctx_cfg.vocab = s.tokenizer->fingerprint();
    s.context_encoder =
        std::make_unique<encoder::TransformerEncoder>(ctx_cfg, stable_hash_combine(seed, "context-encoder"));
    s.features = std::make_unique<classifier::FeatureExtractor>(*s.tokenizer, *s.context_encoder,
                                                                feature_options(c, ctx_cfg.hidden_dim, use_context));
    auto recipe = model_recipe(c, s.tokenizer->vocab_size());
    recipe.content_encoder.vocab = s.tokenizer->fingerprint();
    for (auto rep : c.representations) {
        s.bundles.emplace(rep, classifier::train_one(rep, train, c.train_config(seed), texts, *s.features, recipe,
                                                     text_fingerprint(rep, summarizer)));
    }
    return s;
}

Evaluation evaluate_system(const RunConfig& c, const TrainedSystem& s, const corpus::LabeledDataset& test,
                           const summarize::RepresentationTexts& texts) {
    if (test.empty()) throw ConfigError("test set is empty");
    const bool full_ensemble =
        std::all_of(kAllRepresentations.begin(), kAllRepresentations.end(), [&](auto r) { return s.bundles.count(r); });
    std::map<Representation, const classifier::ModelBundle*> bundles;
    for (const auto& [rep, b] : s.bundles) bundles[rep] = &b;

    Evaluation ev;
    std::vector<int> gold;
    std::map<Representation, std::vector<int>> preds;
    std::vector<int> ensemble_preds;
    for (const auto& doc : test.documents) {
        PredictionRow row{doc.id, doc.label, {}, std::nullopt};
        if (full_ensemble) {
            const auto vr = ensemble::run_ensemble(doc, bundles, *s.features, texts,
                                                   ensemble::EnsembleOptions{c.probability_fallback});
            for (const auto& [rep, p] : vr.per_model) row.per_model[rep] = p.label;
            row.ensemble = vr.final_label;
            if (vr.draw()) ++ev.draws;
            ensemble_preds.push_back(vr.final_label.value_or(-1));
        } else {
            for (const auto& [rep, b] : bundles) row.per_model[rep] = classifier::predict(*b, doc, *s.features, texts).label;
        }
        for (const auto& [rep, label] : row.per_model) preds[rep].push_back(label);
        gold.push_back(doc.label);
        ev.rows.push_back(std::move(row));
    }
    const eval::MetricOptions mo{c.averaging, 1, test.num_classes()};
    for (const auto& [rep, p] : preds) ev.metrics[system_name(rep)] = eval::metrics(p, gold, mo);
    if (full_ensemble) ev.metrics["ensemble"] = eval::metrics(ensemble_preds, gold, mo);
    return ev;
}

Evaluation run_trial(const RunConfig& c, const corpus::LabeledDataset& dataset,
                     const std::optional<corpus::LabeledDataset>& fixed_test, std::uint64_t seed,
                     const summarize::RepresentationTexts& texts, const summarize::Summarizer& summarizer,
                     bool use_context) {
    corpus::LabeledDataset train, test;
    if (fixed_test) {
        train = dataset;
        test = *fixed_test;
    } else {
        std::tie(train, test) = corpus::split(dataset, corpus::SplitSpec{c.train_fraction, seed});
    }
    if (c.oversample) train = corpus::oversample(train, stable_hash_combine(seed, "oversample"));
    const auto system = train_system(c, train, seed, texts, summarizer, use_context);
    return evaluate_system(c, system, test, texts);
}

void cmd_prepare(const RunConfig& c, const PrepareOptions& options, std::ostream& out) {
    c.validate();
    const Paths paths{c.output_dir};
    const auto fingerprint = dataset_fingerprint(c);
    if (fs::exists(paths.manifest()) && !options.force) {
        const auto old = read_json(paths.manifest()).value("fingerprint", std::string());
        if (old != fingerprint)
            throw ConfigError("the dataset under " + c.output_dir.string() +
                              " was prepared with a different configuration (fingerprint " + old + ", current " +
                              fingerprint + "); pass --force to overwrite");
    }
    auto loaded = load_dataset(c);
    if (loaded.dataset.size() < 2) throw RuntimeError("dataset has fewer than two usable documents");
    const auto fixed_test = load_fixed_test(c);

    json manifest{{"fingerprint", fingerprint},
                  {"format", c.dataset.format},
                  {"domain", c.dataset.domain},
                  {"seed", c.seed},
                  {"train_fraction", c.train_fraction},
                  {"kept", loaded.report.kept},
                  {"dropped_empty", loaded.report.dropped_empty},
                  {"dropped_missing", loaded.report.dropped_missing},
                  {"unreadable", loaded.report.unreadable},
                  {"warnings", loaded.report.warnings},
                  {"class_names", loaded.dataset.class_names},
                  {"label_map", loaded.dataset.label_map()},
                  {"class_counts", loaded.dataset.class_counts()}};
    if (fixed_test) {
        manifest["test_documents"] = fixed_test->size();
        corpus::save_jsonl(*fixed_test, paths.test_set());
    } else {
        if (fs::exists(paths.test_set())) fs::remove(paths.test_set());
        const auto [train, test] = corpus::split(loaded.dataset, corpus::SplitSpec{c.train_fraction, c.seed});
        json train_ids = json::array(), test_ids = json::array();
        for (const auto& d : train.documents) train_ids.push_back(d.id);
        for (const auto& d : test.documents) test_ids.push_back(d.id);
        manifest["train_ids"] = train_ids;
        manifest["test_ids"] = test_ids;
    }
    corpus::save_jsonl(loaded.dataset, paths.dataset());
    write_json(paths.manifest(), manifest);

    const auto counts = loaded.dataset.class_counts();
    out << "kept " << loaded.report.kept << " documents (" << loaded.report.dropped_empty << " empty, "
        << loaded.report.dropped_missing << " missing, " << loaded.report.unreadable << " unreadable)\n";
    for (std::size_t i = 0; i < counts.size(); ++i)
        out << "  " << loaded.dataset.class_names[i] << ": " << counts[i] << '\n';
    out << "wrote " << paths.manifest().string() << '\n';
}

summarize::CorpusSummaryReport cmd_summarize(const RunConfig& c, const SummarizeOptions& options, std::ostream& out) {
    c.validate();
    if (options.only.empty()) throw ConfigError("nothing to summarize");
    if (options.only.count(Representation::original))
        throw ConfigError("the original representation needs no summary");
    const auto prepared = load_prepared(c);
    const auto all = summary_corpus(prepared);
    const auto backends = make_backends(c, all);
    summarize::SummaryStore store(Paths{c.output_dir}.summaries());
    const auto report = summarize::summarize_corpus(all, store, *backends.summarizer, options.only, c.threads);
    out << report.generated << " generated, " << report.skipped << " skipped\n";
    for (const auto& [id, msg] : report.failures) out << "failed " << id << ": " << msg << '\n';
    if (!report.failures.empty())
        throw RuntimeError(std::to_string(report.failures.size()) + " documents could not be summarized");
    return report;
}

void cmd_train(const RunConfig& c, std::ostream& out) {
    c.validate();
    const Paths paths{c.output_dir};
    const auto prepared = load_prepared(c);
    auto [train, test] = manifest_split(prepared);
    if (c.oversample) train = corpus::oversample(train, stable_hash_combine(c.seed, "oversample"));
    const auto backends = make_backends(c, summary_corpus(prepared));
    summarize::SummaryStore store(paths.summaries());
    const summarize::RepresentationTexts texts(&store, backends.summarizer.get(), false);

    const auto system = train_system(c, train, c.seed, texts, *backends.summarizer, c.use_context);
    const auto dir = paths.models(c.use_context);
    fs::create_directories(dir);
    system.tokenizer->save(dir / "vocab.txt");
    system.context_encoder->save(dir / "context_encoder.bin");
    json reps = json::array();
    for (const auto& [rep, bundle] : system.bundles) {
        bundle.save(dir / system_name(rep));
        reps.push_back(system_name(rep));
        out << system_name(rep) << ": trained on " << train.size() << " documents, epoch losses";
        for (double l : bundle.epoch_losses) out << ' ' << fmt(l);
        out << '\n';
    }
    write_json(dir / "manifest.json", {{"dataset_fingerprint", dataset_fingerprint(c)},
                                       {"use_context", c.use_context},
                                       {"seed", c.seed},
                                       {"representations", reps}});
    out << "wrote " << dir.string() << '\n';
}

namespace {

void write_predictions(const fs::path& path, const Evaluation& ev, const std::vector<std::string>& classes) {
    std::ofstream f(path);
    if (!f) throw RuntimeError("cannot write " + path.string());
    auto name = [&](int label) { return label >= 0 ? classes.at(static_cast<std::size_t>(label)) : "DRAW"; };
    for (const auto& row : ev.rows) {
        json j{{"id", row.doc_id}, {"gold", name(row.gold)}};
        for (const auto& [rep, label] : row.per_model) j[system_name(rep)] = name(label);
        if (!row.per_model.empty() && row.per_model.size() == kAllRepresentations.size())
            j["ensemble"] = row.ensemble ? name(*row.ensemble) : "DRAW";
        f << j.dump() << '\n';
    }
}

}  // namespace

Evaluation cmd_evaluate(const RunConfig& c, const EvaluateOptions& options, std::ostream& out) {
    c.validate();
    const Paths paths{c.output_dir};
    const auto prepared = load_prepared(c);
    const auto backends = make_backends(c, summary_corpus(prepared));
    summarize::SummaryStore store(paths.summaries());

    if (options.repeat) {
        const summarize::RepresentationTexts texts(&store, backends.summarizer.get(), false);
        std::size_t draws = 0;
        auto runner = [&](std::uint64_t seed, std::size_t trial) {
            auto ev = run_trial(c, prepared.dataset, prepared.fixed_test, seed, texts, *backends.summarizer,
                                c.use_context);
            draws += ev.draws;
            out << "trial " << trial << " (seed " << seed << ")";
            if (auto it = ev.metrics.find("ensemble"); it != ev.metrics.end()) out << ": ensemble f1=" << fmt(it->second.f1);
            out << '\n';
            return ev.metrics;
        };
        const auto summary = eval::repeat_trials(*options.repeat, runner, c.seed, c.averaging, paths.results());
        out << "mean over " << *options.repeat << " trials (" << averaging_name(c.averaging) << " averaging):\n";
        print_metrics(out, summary.means);
        if (draws) out << draws << " ensemble draws\n";
        out << "wrote " << paths.results().string() << '\n';
        Evaluation ev;
        ev.metrics = summary.means;
        ev.draws = draws;
        return ev;
    }

    const auto dir = paths.models(c.use_context);
    if (!fs::exists(dir / "manifest.json"))
        throw ConfigError("no trained models under " + dir.string() + "; run train" +
                          (c.use_context ? "" : " --no-context") + " first");
    const auto models_manifest = read_json(dir / "manifest.json");
    if (models_manifest.value("dataset_fingerprint", std::string()) != dataset_fingerprint(c))
        throw ConfigError("models under " + dir.string() + " were trained on a different dataset preparation; rerun train");

    TrainedSystem system;
    system.tokenizer = std::make_unique<WordPieceTokenizer>(WordPieceTokenizer::load(dir / "vocab.txt"));
    system.context_encoder =
        std::make_unique<encoder::TransformerEncoder>(encoder::TransformerEncoder::load(dir / "context_encoder.bin"));
    system.features = std::make_unique<classifier::FeatureExtractor>(
        *system.tokenizer, *system.context_encoder,
        feature_options(c, system.context_encoder->hidden_dim(), c.use_context));
    auto recipe = model_recipe(c, system.tokenizer->vocab_size());
    recipe.content_encoder.vocab = system.tokenizer->fingerprint();
    const auto classes = static_cast<std::size_t>(prepared.dataset.num_classes());
    for (auto rep : c.representations) {
        const auto rep_dir = dir / system_name(rep);
        if (!fs::exists(rep_dir / "weights.bin"))
            throw ConfigError("no checkpoint for " + system_name(rep) + " under " + dir.string() + "; run train first");
        auto bundle = classifier::ModelBundle::load(rep_dir);
        const auto expected = classifier::model_fingerprint(rep, c.train_config(c.seed), recipe, *system.features,
                                                            classes, text_fingerprint(rep, *backends.summarizer));
        if (bundle.fingerprint != expected)
            throw ConfigError("checkpoint " + rep_dir.string() +
                              " was trained with a different configuration; rerun train");
        system.bundles.emplace(rep, std::move(bundle));
    }

    const auto test = manifest_split(prepared).second;
    const summarize::RepresentationTexts texts(&store, backends.summarizer.get(), true);
    auto ev = evaluate_system(c, system, test, texts);
    write_predictions(paths.predictions(), ev, prepared.dataset.class_names);
    std::vector<eval::TrialResult> rows;
    for (const auto& [name, m] : ev.metrics) rows.push_back({0, name, m, c.averaging});
    eval::write_trials(paths.results(), rows);
    out << "evaluated " << test.size() << " documents (" << averaging_name(c.averaging) << " averaging"
        << (c.use_context ? "" : ", w/o context") << "):\n";
    print_metrics(out, ev.metrics);
    if (ev.metrics.count("ensemble")) out << ev.draws << " ensemble draws\n";
    out << "wrote " << paths.predictions().string() << " and " << paths.results().string() << '\n';
    return ev;
}

eval::AnalysisReport cmd_analyze(const AnalyzeOptions& options, std::ostream& out) {
    if (options.results.empty()) throw ConfigError("analyze needs at least one results file");
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    for (const auto& path : options.results) {
        for (auto& [name, values] : eval::metric_columns(eval::read_trials(path), options.metric)) {
            std::string label = name;
            const bool clash = std::any_of(columns.begin(), columns.end(), [&](const auto& c) { return c.first == label; });
            if (clash) label = path.stem().string() + ":" + name;
            columns.emplace_back(label, std::move(values));
        }
    }
    if (columns.size() < 2)
        throw ConfigError("analyze needs at least two result columns; found " + std::to_string(columns.size()));
    const auto report = eval::analyze(columns);
    out << "metric " << eval::to_string(options.metric) << ", " << columns.size() << " systems, "
        << columns.front().second.size() << " trials\n";
    out << eval::format_report(report);
    if (options.json_out) {
        std::ofstream f(*options.json_out);
        if (!f) throw RuntimeError("cannot write " + options.json_out->string());
        f << eval::report_json(report) << '\n';
    }
    return report;
}

eval::AblationReport cmd_ablate(const RunConfig& c, const AblateOptions& options, std::ostream& out) {
    c.validate();
    const Paths paths{c.output_dir};
    const auto toggles = eval::parse_toggles(options.systems, options.contexts);
    const auto prepared = load_prepared(c);
    const auto backends = make_backends(c, summary_corpus(prepared));
    summarize::SummaryStore store(paths.summaries());
    const summarize::RepresentationTexts texts(&store, backends.summarizer.get(), false);

    auto runner = [&](bool context, const std::vector<std::string>& systems, std::uint64_t seed, std::size_t trial) {
        RunConfig cfg = c;
        cfg.representations.clear();
        for (const auto& s : systems) {
            std::vector<Representation> need;
            if (s == "ensemble") need.assign(kAllRepresentations.begin(), kAllRepresentations.end());
            else need.push_back(parse_representation(s));
            for (auto r : need)
                if (!cfg.has(r)) cfg.representations.push_back(r);
        }
        std::sort(cfg.representations.begin(), cfg.representations.end());
        const auto ev = run_trial(cfg, prepared.dataset, prepared.fixed_test, seed, texts, *backends.summarizer, context);
        std::map<std::string, eval::MetricValues> result;
        for (const auto& s : systems)
            result[s] = ev.metrics.at(s == "ensemble" ? "ensemble" : system_name(parse_representation(s)));
        out << "trial " << trial << (context ? " with context" : " w/o context") << " done\n";
        return result;
    };
    auto report = eval::ablation_run(toggles, c.trials, runner, c.seed, options.metric, c.averaging, c.alpha);
    eval::write_trials(paths.ablation(), report.results);
    print_metrics(out, eval::mean_by_system(report.results));
    out << eval::format_report(eval::AnalysisReport{report.tests});
    out << "wrote " << paths.ablation().string() << '\n';
    return report;
}

}  // namespace cmtr::pipeline
