#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "cmtr/segmented_text.hpp"

namespace cmtr::corpus {

struct ContextBundle {
    std::optional<std::string> author;
    std::optional<std::string> source_url;
    std::vector<std::string> tweet_authors;
    std::vector<std::string> tweet_texts;  // deduplicated, first-seen order
    std::int64_t retweet_count = 0;

    bool operator==(const ContextBundle&) const = default;
};

struct Document {
    std::string id;
    std::string title;
    std::string body;
    int label = 0;
    std::optional<ContextBundle> context;
    std::string domain_tag;

    bool operator==(const Document&) const = default;
};

// Class codes are positions in class_names, so codes are contiguous from 0
// and the name <-> code mapping is a bijection by construction.
struct LabeledDataset {
    std::vector<Document> documents;
    std::vector<std::string> class_names;

    std::size_t size() const { return documents.size(); }
    bool empty() const { return documents.empty(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }

    std::map<std::string, int> label_map() const;
    int code_of(const std::string& class_name) const;  // throws on unknown name
    std::vector<std::size_t> class_counts() const;

    // Same class names, given documents.
    LabeledDataset with_documents(std::vector<Document> docs) const {
        return LabeledDataset{std::move(docs), class_names};
    }
};

struct IngestReport {
    std::size_t kept = 0;
    std::size_t dropped_empty = 0;     // article present but body empty after cleaning
    std::size_t dropped_missing = 0;   // no article file at all
    std::size_t unreadable = 0;        // record could not be parsed
    std::vector<std::string> warnings;
};

struct LoadResult {
    LabeledDataset dataset;
    IngestReport report;
};

// Rewrites archived URLs back to the original address. Rules are applied in
// order; the first matching pattern wins.
class UrlRewriter {
public:
    struct Rule {
        std::string pattern;
        std::string replacement;
    };

    UrlRewriter();  // web.archive.org style prefixes
    explicit UrlRewriter(std::vector<Rule> rules);

    std::string rewrite(const std::string& url) const;
    const std::vector<Rule>& rules() const { return rules_; }

private:
    std::vector<Rule> rules_;
    std::vector<std::regex> compiled_;
};

// FakeNewsNet layout: <root>/<domain>/{fake,real}/<news_id>/news content.json
// with optional tweets/*.json and retweets/*.json next to it. Labels are
// fake -> 1, real -> 0. Missing root or domain directory throws ConfigError.
LoadResult load_fakenewsnet(const std::filesystem::path& root, const std::string& domain,
                            const UrlRewriter& rewriter = UrlRewriter());

// Four-class fact-checking file with a header row naming title, text and a
// rating column. Unknown ratings throw with the 1-based data row index.
LoadResult load_ctfan(const std::filesystem::path& csv_path);

const std::vector<std::string>& ctfan_classes();
const std::vector<std::string>& fakenewsnet_classes();

// Line-delimited cleaned records: id, title, body, label_code, domain and
// the context fields.
void save_jsonl(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_jsonl(const std::filesystem::path& path, std::vector<std::string> class_names);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;

    void validate() const;
};

// Seeded disjoint partition. Documents are ordered by id before shuffling, so
// the result does not depend on input order. Each side keeps dataset order.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, const SplitSpec& spec);

// Random oversampling with replacement until every class matches the
// majority count. The originals come first, unchanged, then the additions.
LabeledDataset oversample(const LabeledDataset& train, std::uint64_t seed);

// <CLS> title <SEP> body
SegmentedText build_content_string(const Document& doc);
SegmentedText build_content_string(const std::string& title, const std::string& body);

struct ContextOptions {
    std::string author_delimiter = " | ";
    bool log1p_retweets = false;
};

struct ContextInputs {
    SegmentedText text;
    std::vector<double> numeric;
};

// Segments: author, source url, delimiter-joined tweet authors, then one
// segment per distinct tweet text. Absent fields give empty segments.
ContextInputs build_context_inputs(const ContextBundle& ctx, const ContextOptions& options = {});

std::vector<std::string> deduplicate(const std::vector<std::string>& items);

// Binary corpus for desk-scale runs: fake documents (label 1) carry marker
// phrases in title and body, real documents (label 0) do not.
struct SyntheticOptions {
    std::size_t documents = 500;
    double fake_fraction = 0.4;
    double long_fraction = 0.1;  // share of documents long enough to need several chunks
    std::uint64_t seed = 7;
};
LabeledDataset make_synthetic(const SyntheticOptions& options);

}  // namespace cmtr::corpus
