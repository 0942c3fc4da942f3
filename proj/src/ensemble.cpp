#include "cmtr/ensemble.hpp"

#include <algorithm>
#include <string>

#include "cmtr/error.hpp"

namespace cmtr::ensemble {

namespace {

std::string describe(const std::vector<int>& tied) {
    std::string s = "voting draw between labels";
    for (int t : tied) s += " " + std::to_string(t);
    return s;
}

}  // namespace

DrawError::DrawError(std::vector<int> tied) : std::runtime_error(describe(tied)), tied_(std::move(tied)) {}

int vote(std::span<const int> labels) {
    if (labels.empty()) throw ConfigError("vote needs at least one label");
    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];
    std::size_t best = 0;
    for (const auto& [label, n] : counts) best = std::max(best, n);
    std::vector<int> winners;
    for (const auto& [label, n] : counts)
        if (n == best) winners.push_back(label);
    if (winners.size() > 1) throw DrawError(std::move(winners));
    return winners.front();
}

int VoteResult::final_or_throw() const {
    if (final_label) return *final_label;
    std::vector<int> labels;
    for (const auto& [rep, p] : per_model) labels.push_back(p.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    throw DrawError(labels);
}

VoteResult run_ensemble(const corpus::Document& doc,
                        const std::map<Representation, const classifier::ModelBundle*>& bundles,
                        const classifier::FeatureExtractor& features, const summarize::RepresentationTexts& texts,
                        const EnsembleOptions& options) {
    VoteResult result;
    std::vector<int> labels;
    for (Representation rep : kAllRepresentations) {
        auto it = bundles.find(rep);
        if (it == bundles.end() || it->second == nullptr)
            throw ConfigError("ensemble is missing the " + std::string(to_string(rep)) + " model");
        auto p = classifier::predict(*it->second, doc, features, texts);
        labels.push_back(p.label);
        result.per_model.emplace(rep, std::move(p));
    }
    try {
        result.final_label = vote(labels);
    } catch (const DrawError&) {
        if (options.probability_fallback) {
            nn::Vector mean = nn::Vector::Zero(result.per_model.begin()->second.probabilities.size());
            for (const auto& [rep, p] : result.per_model) mean += p.probabilities;
            result.final_label = classifier::argmax(mean);
            result.resolved_by_fallback = true;
        }
    }
    return result;
}

}  // namespace cmtr::ensemble
