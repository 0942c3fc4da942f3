#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cmtr/corpus.hpp"
#include "cmtr/representation.hpp"
#include "cmtr/summarize.hpp"

namespace cmtr::summarize {

struct SummaryRecord {
    std::string doc_id;
    Representation representation = Representation::original;
    std::string text;
    std::string params_fingerprint;

    bool operator==(const SummaryRecord&) const = default;
};

// Append-only JSON-lines cache of summaries. Replaying the file keeps the
// last record per (doc_id, representation). Writes are serialized.
class SummaryStore {
public:
    SummaryStore() = default;  // in-memory only
    explicit SummaryStore(std::filesystem::path path);

    std::optional<SummaryRecord> find(const std::string& doc_id, Representation rep) const;
    void put(SummaryRecord record);

    std::size_t size() const;
    std::size_t count(Representation rep) const;
    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    std::optional<std::filesystem::path> path_;
    std::map<std::pair<std::string, Representation>, SummaryRecord> records_;
    mutable std::mutex mutex_;
};

struct CorpusSummaryReport {
    std::size_t generated = 0;
    std::size_t skipped = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // doc id, message
};

// Ensures a record with the current fingerprint exists for every document
// and each requested representation. Matching records are left alone;
// failures are collected while completed records are kept.
CorpusSummaryReport summarize_corpus(const corpus::LabeledDataset& dataset, SummaryStore& store,
                                     const Summarizer& summarizer,
                                     const std::set<Representation>& which = {Representation::extractive,
                                                                              Representation::abstractive},
                                     std::size_t threads = 1);

// Resolves the text a model sees for a document: the body for original, the
// cached summary otherwise, generated on demand when a summarizer is given.
class RepresentationTexts {
public:
    // With a summarizer, cached records must carry its current fingerprint;
    // missing ones are generated unless generate_missing is false.
    RepresentationTexts(const SummaryStore* store, const Summarizer* on_demand = nullptr, bool generate_missing = true)
        : store_(store), on_demand_(on_demand), generate_missing_(generate_missing) {}

    std::optional<std::string> find(const corpus::Document& doc, Representation rep) const;

    // Throws RuntimeError listing every document without text for rep.
    void require_all(const std::vector<corpus::Document>& docs, Representation rep) const;

    std::string text(const corpus::Document& doc, Representation rep) const;

private:
    const SummaryStore* store_;
    const Summarizer* on_demand_;
    bool generate_missing_;
};

}  // namespace cmtr::summarize
