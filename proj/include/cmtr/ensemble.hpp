#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cmtr/classifier.hpp"
#include "cmtr/representation.hpp"

namespace cmtr::ensemble {

// Raised when the highest vote count is shared by several labels.
class DrawError : public std::runtime_error {
public:
    explicit DrawError(std::vector<int> tied);
    const std::vector<int>& tied_labels() const { return tied_; }

private:
    std::vector<int> tied_;
};

// Strictly most frequent label.
int vote(std::span<const int> labels);

struct VoteResult {
    std::optional<int> final_label;  // empty means DRAW
    std::map<Representation, classifier::Prediction> per_model;
    bool resolved_by_fallback = false;

    bool draw() const { return !final_label.has_value(); }
    int final_or_throw() const;
};

struct EnsembleOptions {
    // On a draw, pick the argmax of the averaged probabilities instead of
    // reporting DRAW. Off by default.
    bool probability_fallback = false;
};

// Runs the original, extractive and abstractive models and votes.
VoteResult run_ensemble(const corpus::Document& doc,
                        const std::map<Representation, const classifier::ModelBundle*>& bundles,
                        const classifier::FeatureExtractor& features, const summarize::RepresentationTexts& texts,
                        const EnsembleOptions& options = {});

}  // namespace cmtr::ensemble
