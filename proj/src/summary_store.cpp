#include "cmtr/summary_store.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "cmtr/error.hpp"
#include "json.hpp"

using nlohmann::json;

namespace cmtr::summarize {

SummaryStore::SummaryStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            // A torn final line from an interrupted run is dropped on replay.
            continue;
        }
        try {
            SummaryRecord r{j.at("doc_id").get<std::string>(),
                            parse_representation(j.at("representation").get<std::string>()),
                            j.at("text").get<std::string>(), j.at("params_fingerprint").get<std::string>()};
            records_[{r.doc_id, r.representation}] = std::move(r);
        } catch (const std::exception& e) {
            throw RuntimeError(path_->string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::optional<SummaryRecord> SummaryStore::find(const std::string& doc_id, Representation rep) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find({doc_id, rep});
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void SummaryStore::put(SummaryRecord record) {
    std::lock_guard lock(mutex_);
    if (path_) {
        if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
        std::ofstream out(*path_, std::ios::app);
        if (!out) throw RuntimeError("cannot append to " + path_->string());
        out << json{{"doc_id", record.doc_id},
                    {"representation", to_string(record.representation)},
                    {"params_fingerprint", record.params_fingerprint},
                    {"text", record.text}}
                   .dump()
            << '\n';
    }
    auto key = std::pair{record.doc_id, record.representation};
    records_[std::move(key)] = std::move(record);
}

std::size_t SummaryStore::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::size_t SummaryStore::count(Representation rep) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& [key, r] : records_) n += key.second == rep;
    return n;
}

CorpusSummaryReport summarize_corpus(const corpus::LabeledDataset& dataset, SummaryStore& store,
                                     const Summarizer& summarizer, const std::set<Representation>& which,
                                     std::size_t threads) {
    struct Job {
        const corpus::Document* doc;
        Representation rep;
        std::string fingerprint;
    };
    CorpusSummaryReport report;
    std::vector<Job> jobs;
    for (Representation rep : which) {
        if (rep == Representation::original) continue;
        const std::string fp = summarizer.fingerprint(rep);
        for (const auto& doc : dataset.documents) {
            auto existing = store.find(doc.id, rep);
            if (existing && existing->params_fingerprint == fp) {
                ++report.skipped;
                continue;
            }
            jobs.push_back({&doc, rep, fp});
        }
    }

    std::vector<std::optional<std::string>> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            try {
                store.put({job.doc->id, job.rep, summarizer.summarize(*job.doc, job.rep), job.fingerprint});
            } catch (const std::exception& e) {
                errors[i] = std::string(to_string(job.rep)) + ": " + e.what();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (errors[i]) report.failures.emplace_back(jobs[i].doc->id, *errors[i]);
        else ++report.generated;
    }
    return report;
}

std::optional<std::string> RepresentationTexts::find(const corpus::Document& doc, Representation rep) const {
    if (rep == Representation::original) return doc.body;
    if (store_) {
        if (auto r = store_->find(doc.id, rep)) {
            if (!on_demand_ || r->params_fingerprint == on_demand_->fingerprint(rep)) return r->text;
        }
    }
    return std::nullopt;
}

void RepresentationTexts::require_all(const std::vector<corpus::Document>& docs, Representation rep) const {
    if (rep == Representation::original || (on_demand_ && generate_missing_)) return;
    std::vector<std::string> missing;
    for (const auto& d : docs)
        if (!find(d, rep)) missing.push_back(d.id);
    if (missing.empty()) return;
    std::string msg = "missing " + std::string(to_string(rep)) + " summaries for " +
                      std::to_string(missing.size()) + " documents:";
    for (std::size_t i = 0; i < missing.size(); ++i) {
        if (i == 20) {
            msg += " ...";
            break;
        }
        msg += " " + missing[i];
    }
    throw RuntimeError(msg);
}

std::string RepresentationTexts::text(const corpus::Document& doc, Representation rep) const {
    if (auto t = find(doc, rep)) return *t;
    if (on_demand_ && generate_missing_) return on_demand_->summarize(doc, rep);
    throw RuntimeError("missing " + std::string(to_string(rep)) + " summary for document " + doc.id);
}

}  // namespace cmtr::summarize
