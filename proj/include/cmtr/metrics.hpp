#pragma once

#include <span>
#include <string>

namespace cmtr::eval {

enum class Averaging { binary, macro };

struct MetricValues {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricOptions {
    Averaging averaging = Averaging::binary;
    int positive_class = 1;  // fake
    // Classes for macro averaging are 0..num_classes-1; when 0, the union of
    // labels seen in gold and predictions.
    int num_classes = 0;
};

// Zero-denominator precision/recall/F1 are defined as 0.
MetricValues metrics(std::span<const int> predictions, std::span<const int> gold, const MetricOptions& options = {});

enum class Metric { accuracy, precision, recall, f1 };
double select(const MetricValues& values, Metric metric);
Metric parse_metric(const std::string& name);
std::string to_string(Metric metric);

}  // namespace cmtr::eval
