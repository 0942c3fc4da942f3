#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmtr/metrics.hpp"
#include "cmtr/stats.hpp"

namespace cmtr::eval {

struct TrialResult {
    std::size_t trial_index = 0;
    std::string system;
    MetricValues values;
    Averaging averaging = Averaging::binary;
};

// trial, system, accuracy, precision, recall, f1 (tab separated, header row).
void write_trials(const std::filesystem::path& path, const std::vector<TrialResult>& trials);
void append_trial(const std::filesystem::path& path, const TrialResult& trial);
std::vector<TrialResult> read_trials(const std::filesystem::path& path);

struct TrialSummary {
    std::vector<TrialResult> trials;
    std::map<std::string, MetricValues> means;  // per system
};

std::map<std::string, MetricValues> mean_by_system(const std::vector<TrialResult>& trials);

// One trial: given its seed, returns metric values per system.
using TrialRunner = std::function<std::map<std::string, MetricValues>(std::uint64_t seed, std::size_t trial)>;

// Runs trial i with seed base_seed + i. Each finished trial is appended to
// persist_path (when given) before the next starts, so a failure keeps
// everything completed so far; the failure is rethrown with the trial index.
TrialSummary repeat_trials(std::size_t n, const TrialRunner& run, std::uint64_t base_seed,
                           Averaging averaging = Averaging::binary,
                           const std::optional<std::filesystem::path>& persist_path = std::nullopt);

// Per-system metric columns ordered by trial index, systems in first-seen
// order.
std::vector<std::pair<std::string, std::vector<double>>> metric_columns(const std::vector<TrialResult>& trials,
                                                                        Metric metric);

struct AnalysisReport {
    std::vector<StatReport> tests;
};

// Pairwise two-sided Wilcoxon for every pair of columns; Friedman plus
// Nemenyi when there are three or more. Fewer than two columns throws.
AnalysisReport analyze(const std::vector<std::pair<std::string, std::vector<double>>>& columns,
                       double alpha = kAlpha);

std::string format_report(const AnalysisReport& report);
std::string report_json(const AnalysisReport& report);

// One model configuration in a component analysis: a system (O, E, A or
// ensemble) with context on or off.
struct AblationToggle {
    std::string system;
    bool context = true;

    std::string name() const;
    bool operator==(const AblationToggle&) const = default;
};

std::vector<AblationToggle> parse_toggles(const std::vector<std::string>& systems, const std::vector<bool>& contexts);

// Runs every requested system for one context setting and seed.
using AblationRunner = std::function<std::map<std::string, MetricValues>(
    bool context, const std::vector<std::string>& systems, std::uint64_t seed, std::size_t trial)>;

struct AblationReport {
    std::vector<TrialResult> results;
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    std::vector<StatReport> tests;  // empty when only one toggle
};

// Battery per context group: Friedman + Nemenyi over >= 3 systems and
// pairwise two-sided Wilcoxon; across groups, one-sided Wilcoxon of each
// system with context against itself without, plus a pooled comparison
// when several systems have both settings.
AblationReport ablation_run(const std::vector<AblationToggle>& toggles, std::size_t trials,
                            const AblationRunner& run, std::uint64_t base_seed, Metric metric = Metric::f1,
                            Averaging averaging = Averaging::binary, double alpha = kAlpha);

}  // namespace cmtr::eval
