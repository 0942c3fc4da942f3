#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmtr/error.hpp"
#include "cmtr/pipeline.hpp"

namespace pl = cmtr::pipeline;

namespace {

struct Overrides {
    std::string config_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    bool no_context = false;
    std::vector<std::string> representations;
    std::optional<std::size_t> epochs, trials, threads;
};

pl::RunConfig resolve(const Overrides& o) {
    pl::RunConfig c = o.config_path.empty() ? pl::RunConfig{} : pl::load_config(o.config_path);
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    if (o.seed) c.seed = *o.seed;
    if (o.no_context) c.use_context = false;
    if (!o.representations.empty()) {
        c.representations.clear();
        for (const auto& r : o.representations) c.representations.push_back(cmtr::parse_representation(r));
    }
    if (o.epochs) c.epochs = *o.epochs;
    if (o.trials) c.trials = *o.trials;
    if (o.threads) c.threads = *o.threads;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-representation fake news classifier: prepare, summarize, train, evaluate, analyze"};
    app.require_subcommand(1);

    Overrides o;
    app.add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("-o,--output-dir", o.output_dir, "Artifact directory (overrides output_dir)");
    app.add_option("--seed", o.seed, "Global seed");
    app.add_flag("--no-context", o.no_context, "Zero the social-context block");
    app.add_option("--representations", o.representations, "Subset of original, extractive, abstractive (or O E A)");
    app.add_option("--epochs", o.epochs, "Training epochs");
    app.add_option("--trials", o.trials, "Trials for --repeat and ablate");
    app.add_option("--threads", o.threads, "Worker threads for summarization");

    auto* show = app.add_subcommand("config", "Print the resolved configuration as JSON");

    auto* prepare = app.add_subcommand("prepare", "Ingest, clean and split the dataset");
    pl::PrepareOptions prepare_opts;
    prepare->add_flag("--force", prepare_opts.force, "Overwrite a preparation made with another configuration");

    auto* summarize = app.add_subcommand("summarize", "Fill the summary cache");
    std::vector<std::string> only;
    summarize->add_option("--only", only, "extractive and/or abstractive");

    auto* train = app.add_subcommand("train", "Train one model per enabled representation");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate checkpoints, or run repeated trials");
    bool repeat = false;
    evaluate->add_flag("--repeat", repeat, "Run `trials` full split/train/evaluate trials");

    auto* analyze = app.add_subcommand("analyze", "Significance tests over result files");
    pl::AnalyzeOptions analyze_opts;
    std::string metric = "f1", json_out;
    analyze->add_option("results", analyze_opts.results, "results.tsv files")->required()->check(CLI::ExistingFile);
    analyze->add_option("--metric", metric, "accuracy, precision, recall or f1");
    analyze->add_option("--json", json_out, "Also write the report as JSON");

    auto* ablate = app.add_subcommand("ablate", "Component analysis with and without context");
    pl::AblateOptions ablate_opts;
    std::vector<std::string> contexts{"on", "off"};
    ablate->add_option("--systems", ablate_opts.systems, "Any of O, E, A, ensemble");
    ablate->add_option("--context", contexts, "on and/or off");
    ablate->add_option("--metric", metric, "accuracy, precision, recall or f1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto& out = std::cout;
        if (show->parsed()) {
            out << pl::config_to_json(resolve(o)) << '\n';
        } else if (prepare->parsed()) {
            pl::cmd_prepare(resolve(o), prepare_opts, out);
        } else if (summarize->parsed()) {
            pl::SummarizeOptions opts;
            if (!only.empty()) {
                opts.only.clear();
                for (const auto& r : only) opts.only.insert(cmtr::parse_representation(r));
            }
            pl::cmd_summarize(resolve(o), opts, out);
        } else if (train->parsed()) {
            pl::cmd_train(resolve(o), out);
        } else if (evaluate->parsed()) {
            const auto cfg = resolve(o);
            pl::EvaluateOptions opts;
            if (repeat) opts.repeat = cfg.trials;
            pl::cmd_evaluate(cfg, opts, out);
        } else if (analyze->parsed()) {
            analyze_opts.metric = cmtr::eval::parse_metric(metric);
            if (!json_out.empty()) analyze_opts.json_out = json_out;
            pl::cmd_analyze(analyze_opts, out);
        } else if (ablate->parsed()) {
            ablate_opts.metric = cmtr::eval::parse_metric(metric);
            ablate_opts.contexts.clear();
            for (const auto& c : contexts) {
                if (c == "on") ablate_opts.contexts.push_back(true);
                else if (c == "off") ablate_opts.contexts.push_back(false);
                else throw cmtr::ConfigError("--context takes on or off, got '" + c + "'");
            }
            pl::cmd_ablate(resolve(o), ablate_opts, out);
        }
    } catch (const cmtr::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
