#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cmtr/classifier.hpp"
#include "cmtr/corpus.hpp"
#include "cmtr/ensemble.hpp"
#include "cmtr/metrics.hpp"
#include "cmtr/summary_store.hpp"
#include "cmtr/trials.hpp"

namespace cmtr::pipeline {

struct DatasetConfig {
    std::string format = "fakenewsnet";  // fakenewsnet | ctfan | jsonl | synthetic
    std::filesystem::path path;
    std::string domain = "politifact";
    std::optional<std::filesystem::path> test_path;  // ctfan: fixed test file, no split
    std::vector<std::string> classes;               // jsonl only
    corpus::SyntheticOptions synthetic{};
};

struct GeneratorConfig {
    std::string kind = "bigram";  // bigram | process
    std::string command;          // process only
    std::size_t vocab_size = 30000;
};

struct EncoderShape {
    std::string preset = "base";  // base | tiny
    std::optional<std::size_t> layers, hidden_dim, heads, intermediate_dim, max_positions;

    encoder::EncoderConfig resolve(std::size_t vocab_size) const;
};

// Everything a command needs. Defaults are the reference settings.
struct RunConfig {
    DatasetConfig dataset;
    std::filesystem::path output_dir = "run";
    std::uint64_t seed = 42;
    std::vector<Representation> representations{kAllRepresentations.begin(), kAllRepresentations.end()};
    bool use_context = true;
    double train_fraction = 0.8;
    bool oversample = false;
    chunker::ChunkPlan chunk = chunker::encoder_plan();
    double extractive_ratio = 0.40;
    bool coref = true;
    std::size_t top_k = 100;
    double top_p = 0.95;
    double abstractive_ratio = 0.40;
    GeneratorConfig generator;
    EncoderShape encoder;
    EncoderShape context_encoder;
    std::size_t vocab_size = 30000;
    std::size_t head_hidden = 512;
    std::size_t batch_size = 8;
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    std::size_t epochs = 3;
    std::size_t trials = 10;
    double alpha = 0.05;
    eval::Averaging averaging = eval::Averaging::binary;
    bool probability_fallback = false;
    bool log1p_retweets = false;
    std::size_t threads = 1;

    void validate() const;  // ConfigError on bad values or missing paths

    classifier::TrainConfig train_config(std::uint64_t seed) const;
    summarize::ExtractiveConfig extractive_config() const;
    summarize::AbstractiveConfig abstractive_config() const;
    bool has(Representation rep) const;
};

// Unknown keys are rejected.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& config);

// Hash of the settings that determine the prepared dataset.
std::string dataset_fingerprint(const RunConfig& config);

corpus::LoadResult load_dataset(const RunConfig& config);
// Fixed test set for formats that ship one, else nullopt.
std::optional<corpus::LabeledDataset> load_fixed_test(const RunConfig& config);

// Sentence embedder, generator and summarizer with matching lifetimes.
struct SummaryBackends {
    std::unique_ptr<summarize::SentenceEmbedder> embedder;
    std::unique_ptr<summarize::SummaryGenerator> generator;
    std::unique_ptr<summarize::Summarizer> summarizer;
};
SummaryBackends make_backends(const RunConfig& config, const corpus::LabeledDataset& corpus);

// Tokenizer, frozen context encoder, feature extractor and one trained
// bundle per enabled representation.
struct TrainedSystem {
    std::unique_ptr<WordPieceTokenizer> tokenizer;
    std::unique_ptr<encoder::TransformerEncoder> context_encoder;
    std::unique_ptr<classifier::FeatureExtractor> features;
    std::map<Representation, classifier::ModelBundle> bundles;
};

classifier::FeatureOptions feature_options(const RunConfig& config, std::size_t hidden_dim, bool use_context);
classifier::ModelRecipe model_recipe(const RunConfig& config, std::size_t vocab_size);

// Builds tokenizer and context encoder from the training split, then trains
// each representation. texts must resolve every training document.
TrainedSystem train_system(const RunConfig& config, const corpus::LabeledDataset& train, std::uint64_t seed,
                           const summarize::RepresentationTexts& texts, const summarize::Summarizer& summarizer,
                           bool use_context);

struct PredictionRow {
    std::string doc_id;
    int gold = 0;
    std::map<Representation, int> per_model;
    std::optional<int> ensemble;  // empty on DRAW
};

struct Evaluation {
    std::map<std::string, eval::MetricValues> metrics;  // per representation name and "ensemble"
    std::vector<PredictionRow> rows;
    std::size_t draws = 0;
};

// Draws count as wrong predictions (label -1) in the ensemble metrics.
Evaluation evaluate_system(const RunConfig& config, const TrainedSystem& system, const corpus::LabeledDataset& test,
                           const summarize::RepresentationTexts& texts);

// One full trial: split with seed (unless a fixed test set is given),
// optional oversampling, training and evaluation.
Evaluation run_trial(const RunConfig& config, const corpus::LabeledDataset& dataset,
                     const std::optional<corpus::LabeledDataset>& fixed_test, std::uint64_t seed,
                     const summarize::RepresentationTexts& texts, const summarize::Summarizer& summarizer,
                     bool use_context);

// Command entry points. Artifacts go under config.output_dir; progress
// lines go to out.
struct PrepareOptions {
    bool force = false;
};
void cmd_prepare(const RunConfig& config, const PrepareOptions& options, std::ostream& out);

struct SummarizeOptions {
    std::set<Representation> only{Representation::extractive, Representation::abstractive};
};
summarize::CorpusSummaryReport cmd_summarize(const RunConfig& config, const SummarizeOptions& options,
                                             std::ostream& out);

void cmd_train(const RunConfig& config, std::ostream& out);

struct EvaluateOptions {
    std::optional<std::size_t> repeat;  // run this many full trials instead of using checkpoints
};
Evaluation cmd_evaluate(const RunConfig& config, const EvaluateOptions& options, std::ostream& out);

struct AnalyzeOptions {
    std::vector<std::filesystem::path> results;
    eval::Metric metric = eval::Metric::f1;
    std::optional<std::filesystem::path> json_out;
};
eval::AnalysisReport cmd_analyze(const AnalyzeOptions& options, std::ostream& out);

struct AblateOptions {
    std::vector<std::string> systems{"O", "E", "A", "ensemble"};
    std::vector<bool> contexts{true, false};
    eval::Metric metric = eval::Metric::f1;
};
eval::AblationReport cmd_ablate(const RunConfig& config, const AblateOptions& options, std::ostream& out);

// Layout of the output directory.
struct Paths {
    std::filesystem::path root;

    std::filesystem::path dataset() const { return root / "data" / "dataset.jsonl"; }
    std::filesystem::path manifest() const { return root / "data" / "manifest.json"; }
    std::filesystem::path summaries() const { return root / "summaries.jsonl"; }
    std::filesystem::path models(bool use_context) const {
        return root / (use_context ? "models" : "models-no-context");
    }
    std::filesystem::path test_set() const { return root / "data" / "test.jsonl"; }
    std::filesystem::path predictions() const { return root / "predictions.jsonl"; }
    std::filesystem::path results() const { return root / "results.tsv"; }
    std::filesystem::path ablation() const { return root / "ablation.tsv"; }
};

}  // namespace cmtr::pipeline
