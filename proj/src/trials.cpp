#include "cmtr/trials.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cmtr/error.hpp"
#include "json.hpp"

using nlohmann::json;

namespace cmtr::eval {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

constexpr const char* kHeader = "trial\tsystem\taccuracy\tprecision\trecall\tf1";

std::string row(const TrialResult& t) {
    return std::to_string(t.trial_index) + '\t' + t.system + '\t' + num(t.values.accuracy) + '\t' +
           num(t.values.precision) + '\t' + num(t.values.recall) + '\t' + num(t.values.f1);
}

}  // namespace

void write_trials(const std::filesystem::path& path, const std::vector<TrialResult>& trials) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << kHeader << '\n';
    for (const auto& t : trials) out << row(t) << '\n';
}

void append_trial(const std::filesystem::path& path, const TrialResult& trial) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw RuntimeError("cannot append to " + path.string());
    if (fresh) out << kHeader << '\n';
    out << row(trial) << '\n';
}

std::vector<TrialResult> read_trials(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open results file " + path.string());
    std::vector<TrialResult> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.rfind("trial\t", 0) == 0) continue;
        std::istringstream fields(line);
        std::string trial, system, acc, prec, rec, f1;
        if (!std::getline(fields, trial, '\t') || !std::getline(fields, system, '\t') ||
            !std::getline(fields, acc, '\t') || !std::getline(fields, prec, '\t') ||
            !std::getline(fields, rec, '\t') || !std::getline(fields, f1, '\t'))
            throw RuntimeError(path.string() + ":" + std::to_string(line_no) + ": expected 6 tab-separated fields");
        try {
            out.push_back({std::stoul(trial), system, {std::stod(acc), std::stod(prec), std::stod(rec), std::stod(f1)}});
        } catch (const std::exception&) {
            throw RuntimeError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    return out;
}

std::map<std::string, MetricValues> mean_by_system(const std::vector<TrialResult>& trials) {
    std::map<std::string, MetricValues> sums;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : trials) {
        auto& s = sums[t.system];
        s.accuracy += t.values.accuracy;
        s.precision += t.values.precision;
        s.recall += t.values.recall;
        s.f1 += t.values.f1;
        ++counts[t.system];
    }
    for (auto& [system, s] : sums) {
        const double n = static_cast<double>(counts[system]);
        s.accuracy /= n;
        s.precision /= n;
        s.recall /= n;
        s.f1 /= n;
    }
    return sums;
}

TrialSummary repeat_trials(std::size_t n, const TrialRunner& run, std::uint64_t base_seed, Averaging averaging,
                           const std::optional<std::filesystem::path>& persist_path) {
    if (n == 0) throw ConfigError("repeat_trials needs at least one trial");
    if (persist_path && std::filesystem::exists(*persist_path)) std::filesystem::remove(*persist_path);
    TrialSummary summary;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<std::string, MetricValues> values;
        try {
            values = run(base_seed + i, i);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw RuntimeError("trial " + std::to_string(i) + " failed after " + std::to_string(i) +
                               " completed trials: " + e.what());
        }
        for (const auto& [system, v] : values) {
            TrialResult t{i, system, v, averaging};
            if (persist_path) append_trial(*persist_path, t);
            summary.trials.push_back(std::move(t));
        }
    }
    summary.means = mean_by_system(summary.trials);
    return summary;
}

std::vector<std::pair<std::string, std::vector<double>>> metric_columns(const std::vector<TrialResult>& trials,
                                                                        Metric metric) {
    std::vector<std::pair<std::string, std::vector<std::pair<std::size_t, double>>>> grouped;
    for (const auto& t : trials) {
        auto it = std::find_if(grouped.begin(), grouped.end(), [&](const auto& g) { return g.first == t.system; });
        if (it == grouped.end()) {
            grouped.push_back({t.system, {}});
            it = grouped.end() - 1;
        }
        it->second.emplace_back(t.trial_index, select(t.values, metric));
    }
    std::vector<std::pair<std::string, std::vector<double>>> out;
    for (auto& [system, values] : grouped) {
        std::stable_sort(values.begin(), values.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<double> column;
        for (const auto& [trial, v] : values) column.push_back(v);
        out.emplace_back(system, std::move(column));
    }
    return out;
}

namespace {

StatReport safe_wilcoxon(const std::string& name, const std::vector<double>& a, const std::vector<double>& b,
                         Alternative alternative, double alpha) {
    StatReport r;
    try {
        r = wilcoxon_signed_rank(a, b, WilcoxonOptions{alternative, ZeroMethod::wilcox, PValueMethod::automatic, alpha});
    } catch (const RuntimeError& e) {
        r.test = "wilcoxon";
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.significant = false;
        r.detail = std::string("undefined: ") + e.what();
    }
    r.test = name;
    return r;
}

void friedman_battery(const std::vector<std::pair<std::string, std::vector<double>>>& columns, double alpha,
                      std::vector<StatReport>& tests, const std::string& suffix = "") {
    std::vector<std::vector<double>> values;
    std::vector<std::string> labels;
    for (const auto& [name, v] : columns) {
        labels.push_back(name);
        values.push_back(v);
    }
    StatReport f = friedman(values, alpha);
    f.test = std::to_string(columns.size()) + "-factor friedman" + suffix;
    f.labels = labels;
    tests.push_back(f);

    StatReport nem;
    nem.test = "nemenyi" + suffix;
    nem.labels = labels;
    nem.pairwise = nemenyi_posthoc(values);
    double min_p = 1.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j) min_p = std::min(min_p, nem.pairwise[i][j]);
    nem.p_value = min_p;
    nem.statistic = 0.0;
    nem.significant = min_p < alpha;
    nem.detail = "p_value is the smallest pairwise p";
    tests.push_back(std::move(nem));
}

}  // namespace

AnalysisReport analyze(const std::vector<std::pair<std::string, std::vector<double>>>& columns, double alpha) {
    if (columns.size() < 2)
        throw ConfigError("analysis needs at least two result columns, got " + std::to_string(columns.size()));
    for (const auto& [name, v] : columns)
        if (v.size() != columns.front().second.size())
            throw ConfigError("column '" + name + "' has " + std::to_string(v.size()) + " trials, expected " +
                              std::to_string(columns.front().second.size()));
    AnalysisReport report;
    for (std::size_t i = 0; i < columns.size(); ++i)
        for (std::size_t j = i + 1; j < columns.size(); ++j) {
            auto r = safe_wilcoxon("wilcoxon " + columns[i].first + " vs " + columns[j].first, columns[i].second,
                                   columns[j].second, Alternative::two_sided, alpha);
            r.labels = {columns[i].first, columns[j].first};
            report.tests.push_back(std::move(r));
        }
    if (columns.size() >= 3) friedman_battery(columns, alpha, report.tests);
    return report;
}

std::string format_report(const AnalysisReport& report) {
    std::ostringstream out;
    for (const auto& t : report.tests) {
        out << t.test << ": statistic=" << num(t.statistic) << " p=" << num(t.p_value)
            << (t.significant ? " significant" : " not significant") << " (alpha=" << kAlpha << ")";
        if (!t.detail.empty()) out << " [" << t.detail << "]";
        out << '\n';
        if (!t.pairwise.empty()) {
            for (std::size_t i = 0; i < t.labels.size(); ++i) {
                out << "  " << t.labels[i];
                for (double p : t.pairwise[i]) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), " %.6f", p);
                    out << buf;
                }
                out << '\n';
            }
        }
    }
    return out.str();
}

std::string report_json(const AnalysisReport& report) {
    json arr = json::array();
    for (const auto& t : report.tests) {
        json j{{"test", t.test},
               {"statistic", t.statistic},
               {"p_value", t.p_value},
               {"significant", t.significant},
               {"labels", t.labels},
               {"detail", t.detail}};
        if (!t.pairwise.empty()) j["pairwise"] = t.pairwise;
        arr.push_back(std::move(j));
    }
    return json{{"alpha", kAlpha}, {"tests", arr}}.dump(2);
}

std::string AblationToggle::name() const {
    std::string base = system == "ensemble" ? "CMTR-BERT" : "CMTR-BERT " + system;
    return context ? base : base + " w/o context";
}

std::vector<AblationToggle> parse_toggles(const std::vector<std::string>& systems, const std::vector<bool>& contexts) {
    static const std::set<std::string> known{"O", "E", "A", "ensemble"};
    if (systems.empty() || contexts.empty()) throw ConfigError("ablation needs at least one system and context setting");
    std::vector<AblationToggle> out;
    for (bool c : contexts)
        for (const auto& s : systems) {
            if (!known.count(s)) throw ConfigError("unknown ablation system '" + s + "' (use O, E, A or ensemble)");
            AblationToggle t{s, c};
            if (std::find(out.begin(), out.end(), t) != out.end())
                throw ConfigError("duplicate ablation toggle " + t.name());
            out.push_back(t);
        }
    return out;
}

AblationReport ablation_run(const std::vector<AblationToggle>& toggles, std::size_t trials, const AblationRunner& run,
                            std::uint64_t base_seed, Metric metric, Averaging averaging, double alpha) {
    static const std::set<std::string> known{"O", "E", "A", "ensemble"};
    if (toggles.empty()) throw ConfigError("ablation needs at least one toggle");
    if (trials == 0) throw ConfigError("ablation needs at least one trial");
    for (std::size_t i = 0; i < toggles.size(); ++i) {
        if (!known.count(toggles[i].system))
            throw ConfigError("unknown ablation system '" + toggles[i].system + "'");
        for (std::size_t j = 0; j < i; ++j)
            if (toggles[i] == toggles[j]) throw ConfigError("duplicate ablation toggle " + toggles[i].name());
    }

    AblationReport report;
    for (bool context : {true, false}) {
        std::vector<std::string> systems;
        for (const auto& t : toggles)
            if (t.context == context) systems.push_back(t.system);
        if (systems.empty()) continue;
        for (std::size_t i = 0; i < trials; ++i) {
            const auto values = run(context, systems, base_seed + i, i);
            for (const auto& s : systems) {
                auto it = values.find(s);
                if (it == values.end()) throw RuntimeError("ablation runner returned no result for " + s);
                report.results.push_back({i, AblationToggle{s, context}.name(), it->second, averaging});
            }
        }
    }
    report.columns = metric_columns(report.results, metric);
    if (toggles.size() < 2) return report;

    auto column = [&](const AblationToggle& t) -> const std::vector<double>& {
        const auto name = t.name();
        return std::find_if(report.columns.begin(), report.columns.end(), [&](const auto& c) { return c.first == name; })
            ->second;
    };

    for (bool context : {true, false}) {
        std::vector<std::pair<std::string, std::vector<double>>> group;
        for (const auto& t : toggles)
            if (t.context == context) group.emplace_back(t.name(), column(t));
        for (std::size_t i = 0; i < group.size(); ++i)
            for (std::size_t j = i + 1; j < group.size(); ++j) {
                auto r = safe_wilcoxon("wilcoxon " + group[i].first + " vs " + group[j].first, group[i].second,
                                       group[j].second, Alternative::two_sided, alpha);
                r.labels = {group[i].first, group[j].first};
                report.tests.push_back(std::move(r));
            }
        if (group.size() >= 3) friedman_battery(group, alpha, report.tests, context ? "" : " (w/o context)");
    }

    std::vector<double> pooled_with, pooled_without;
    std::size_t paired_systems = 0;
    for (const auto& t : toggles) {
        if (!t.context) continue;
        const AblationToggle off{t.system, false};
        if (std::find(toggles.begin(), toggles.end(), off) == toggles.end()) continue;
        const auto& a = column(t);
        const auto& b = column(off);
        auto r = safe_wilcoxon("one-sided wilcoxon " + t.name() + " > " + off.name(), a, b, Alternative::greater, alpha);
        r.labels = {t.name(), off.name()};
        report.tests.push_back(std::move(r));
        pooled_with.insert(pooled_with.end(), a.begin(), a.end());
        pooled_without.insert(pooled_without.end(), b.begin(), b.end());
        ++paired_systems;
    }
    if (paired_systems >= 2) {
        auto r = safe_wilcoxon("pooled one-sided wilcoxon context > w/o context", pooled_with, pooled_without,
                               Alternative::greater, alpha);
        r.labels = {"with context", "w/o context"};
        report.tests.push_back(std::move(r));
    }
    return report;
}

}  // namespace cmtr::eval
