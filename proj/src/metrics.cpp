#include "cmtr/metrics.hpp"

#include <set>
#include <vector>

#include "cmtr/error.hpp"

namespace cmtr::eval {

namespace {

struct Counts {
    double tp = 0, fp = 0, fn = 0;
};

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void per_class(const Counts& c, double& p, double& r, double& f) {
    p = ratio(c.tp, c.tp + c.fp);
    r = ratio(c.tp, c.tp + c.fn);
    f = ratio(2.0 * p * r, p + r);
}

}  // namespace

MetricValues metrics(std::span<const int> predictions, std::span<const int> gold, const MetricOptions& options) {
    if (predictions.size() != gold.size())
        throw ConfigError("metrics: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(gold.size()) + " gold labels");
    if (gold.empty()) throw ConfigError("metrics: no labels");

    std::set<int> classes;
    if (options.num_classes > 0) {
        for (int c = 0; c < options.num_classes; ++c) classes.insert(c);
    } else {
        classes.insert(gold.begin(), gold.end());
        classes.insert(predictions.begin(), predictions.end());
    }

    MetricValues m;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) correct += predictions[i] == gold[i];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());

    auto counts_for = [&](int cls) {
        Counts c;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            const bool pred_pos = predictions[i] == cls;
            const bool gold_pos = gold[i] == cls;
            c.tp += pred_pos && gold_pos;
            c.fp += pred_pos && !gold_pos;
            c.fn += !pred_pos && gold_pos;
        }
        return c;
    };

    if (options.averaging == Averaging::binary) {
        per_class(counts_for(options.positive_class), m.precision, m.recall, m.f1);
        return m;
    }
    for (int cls : classes) {
        double p, r, f;
        per_class(counts_for(cls), p, r, f);
        m.precision += p;
        m.recall += r;
        m.f1 += f;
    }
    const auto k = static_cast<double>(classes.size());
    m.precision /= k;
    m.recall /= k;
    m.f1 /= k;
    return m;
}

double select(const MetricValues& values, Metric metric) {
    switch (metric) {
        case Metric::accuracy: return values.accuracy;
        case Metric::precision: return values.precision;
        case Metric::recall: return values.recall;
        case Metric::f1: return values.f1;
    }
    return values.f1;
}

Metric parse_metric(const std::string& name) {
    if (name == "accuracy") return Metric::accuracy;
    if (name == "precision") return Metric::precision;
    if (name == "recall") return Metric::recall;
    if (name == "f1") return Metric::f1;
    throw ConfigError("unknown metric '" + name + "'");
}

std::string to_string(Metric metric) {
    switch (metric) {
        case Metric::accuracy: return "accuracy";
        case Metric::precision: return "precision";
        case Metric::recall: return "recall";
        case Metric::f1: return "f1";
    }
    return "f1";
}

}  // namespace cmtr::eval
