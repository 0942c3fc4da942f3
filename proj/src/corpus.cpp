#include "cmtr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cmtr/error.hpp"
#include "cmtr/rng.hpp"
#include "csv.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cmtr::corpus {

namespace {

std::string normalize_space(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string string_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return {};
    return it->get<std::string>();
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open " + path.string());
    return json::parse(in);
}

std::vector<fs::path> sorted_entries(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::map<std::string, int> LabeledDataset::label_map() const {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < class_names.size(); ++i) out[class_names[i]] = static_cast<int>(i);
    return out;
}

int LabeledDataset::code_of(const std::string& class_name) const {
    auto it = std::find(class_names.begin(), class_names.end(), class_name);
    if (it == class_names.end()) throw ConfigError("unknown class '" + class_name + "'");
    return static_cast<int>(it - class_names.begin());
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& d : documents) {
        if (d.label < 0 || d.label >= num_classes())
            throw RuntimeError("document " + d.id + " has label " + std::to_string(d.label) +
                               " outside the declared classes");
        ++counts[static_cast<std::size_t>(d.label)];
    }
    return counts;
}

UrlRewriter::UrlRewriter()
    : UrlRewriter(std::vector<Rule>{Rule{R"(^https?://(web|wayback)\.archive\.org/web/[0-9]+[a-z_]*/)", ""}}) {}

UrlRewriter::UrlRewriter(std::vector<Rule> rules) : rules_(std::move(rules)) {
    for (const auto& r : rules_) {
        try {
            compiled_.emplace_back(r.pattern, std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
            throw ConfigError("bad url rewrite pattern '" + r.pattern + "': " + e.what());
        }
    }
}

std::string UrlRewriter::rewrite(const std::string& url) const {
    for (std::size_t i = 0; i < compiled_.size(); ++i) {
        if (std::regex_search(url, compiled_[i]))
            return std::regex_replace(url, compiled_[i], rules_[i].replacement,
                                      std::regex_constants::format_first_only);
    }
    return url;
}

const std::vector<std::string>& fakenewsnet_classes() {
    static const std::vector<std::string> names{"real", "fake"};
    return names;
}

const std::vector<std::string>& ctfan_classes() {
    static const std::vector<std::string> names{"False", "Partially False", "True", "Other"};
    return names;
}

LoadResult load_fakenewsnet(const fs::path& root, const std::string& domain, const UrlRewriter& rewriter) {
    if (!fs::is_directory(root)) throw ConfigError("dataset root does not exist: " + root.string());
    fs::path domain_dir = root / domain;
    if (!fs::is_directory(domain_dir)) throw ConfigError("domain directory does not exist: " + domain_dir.string());

    LoadResult result;
    result.dataset.class_names = fakenewsnet_classes();
    auto& report = result.report;

    for (const auto& [label_dir, label] : {std::pair{"fake", 1}, std::pair{"real", 0}}) {
        for (const auto& record_dir : sorted_entries(domain_dir / label_dir)) {
            if (!fs::is_directory(record_dir)) continue;
            const fs::path article = record_dir / "news content.json";
            if (!fs::exists(article)) {
                ++report.dropped_missing;
                continue;
            }
            Document doc;
            try {
                const json content = read_json_file(article);
                doc.id = record_dir.filename().string();
                doc.title = normalize_space(string_field(content, "title"));
                doc.body = normalize_space(string_field(content, "text"));
                doc.label = label;
                doc.domain_tag = domain;

                ContextBundle ctx;
                if (auto it = content.find("authors"); it != content.end() && it->is_array() && !it->empty()) {
                    std::string joined;
                    for (const auto& a : *it) {
                        if (!a.is_string()) continue;
                        if (!joined.empty()) joined += ", ";
                        joined += a.get<std::string>();
                    }
                    if (!joined.empty()) ctx.author = joined;
                }
                if (auto url = string_field(content, "url"); !url.empty()) ctx.source_url = rewriter.rewrite(url);

                std::vector<std::string> texts;
                std::int64_t tweet_retweets = 0;
                for (const auto& tweet_file : sorted_entries(record_dir / "tweets")) {
                    try {
                        const json tweet = read_json_file(tweet_file);
                        if (auto t = string_field(tweet, "text"); !t.empty()) texts.push_back(normalize_space(t));
                        if (auto u = tweet.find("user"); u != tweet.end() && u->is_object()) {
                            if (auto name = string_field(*u, "screen_name"); !name.empty())
                                ctx.tweet_authors.push_back(name);
                        }
                        if (auto rc = tweet.find("retweet_count"); rc != tweet.end() && rc->is_number_integer())
                            tweet_retweets += std::max<std::int64_t>(0, rc->get<std::int64_t>());
                    } catch (const std::exception& e) {
                        report.warnings.push_back(tweet_file.string() + ": " + e.what());
                    }
                }
                ctx.tweet_texts = deduplicate(texts);

                const fs::path retweet_dir = record_dir / "retweets";
                if (fs::is_directory(retweet_dir)) {
                    std::int64_t count = 0;
                    for (const auto& rt_file : sorted_entries(retweet_dir)) {
                        try {
                            const json rt = read_json_file(rt_file);
                            if (auto it = rt.find("retweets"); it != rt.end() && it->is_array())
                                count += static_cast<std::int64_t>(it->size());
                        } catch (const std::exception& e) {
                            report.warnings.push_back(rt_file.string() + ": " + e.what());
                        }
                    }
                    ctx.retweet_count = count;
                } else {
                    ctx.retweet_count = tweet_retweets;
                }
                doc.context = std::move(ctx);
            } catch (const std::exception& e) {
                ++report.unreadable;
                report.warnings.push_back(article.string() + ": " + e.what());
                continue;
            }
            if (doc.body.empty()) {
                ++report.dropped_empty;
                continue;
            }
            result.dataset.documents.push_back(std::move(doc));
        }
    }
    std::sort(result.dataset.documents.begin(), result.dataset.documents.end(),
              [](const Document& a, const Document& b) { return a.id < b.id; });
    report.kept = result.dataset.size();
    return result;
}

LoadResult load_ctfan(const fs::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw ConfigError("cannot open " + csv_path.string());

    std::vector<std::string> header;
    if (!detail::read_csv_row(in, header)) throw RuntimeError(csv_path.string() + ": empty file");
    int title_col = -1, text_col = -1, rating_col = -1, id_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string h = lower(normalize_space(header[i]));
        if (h == "title") title_col = static_cast<int>(i);
        else if (h == "text") text_col = static_cast<int>(i);
        else if (h.find("rating") != std::string::npos || h == "label") rating_col = static_cast<int>(i);
        else if (h == "public_id" || h == "id") id_col = static_cast<int>(i);
    }
    if (text_col < 0 || rating_col < 0)
        throw RuntimeError(csv_path.string() + ": header must name a text and a rating column");

    LoadResult result;
    result.dataset.class_names = ctfan_classes();
    std::map<std::string, int> codes;
    for (std::size_t i = 0; i < ctfan_classes().size(); ++i) codes[lower(ctfan_classes()[i])] = static_cast<int>(i);

    std::vector<std::string> row;
    std::size_t row_index = 0;
    while (detail::read_csv_row(in, row)) {
        ++row_index;
        if (row.size() == 1 && row[0].empty()) continue;
        auto cell = [&](int col) -> std::string {
            return col >= 0 && static_cast<std::size_t>(col) < row.size() ? row[static_cast<std::size_t>(col)]
                                                                          : std::string{};
        };
        const std::string rating = normalize_space(cell(rating_col));
        auto it = codes.find(lower(rating));
        if (it == codes.end())
            throw RuntimeError(csv_path.string() + ": row " + std::to_string(row_index) + ": unknown rating '" +
                               rating + "'");
        Document doc;
        doc.id = id_col >= 0 ? normalize_space(cell(id_col)) : std::to_string(row_index);
        doc.title = normalize_space(cell(title_col));
        doc.body = normalize_space(cell(text_col));
        doc.label = it->second;
        doc.domain_tag = "ctfan";
        if (doc.body.empty()) {
            ++result.report.dropped_empty;
            continue;
        }
        result.dataset.documents.push_back(std::move(doc));
    }
    result.report.kept = result.dataset.size();
    return result;
}

void save_jsonl(const LabeledDataset& dataset, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path.string());
    for (const auto& d : dataset.documents) {
        json j{{"id", d.id}, {"title", d.title}, {"body", d.body}, {"label_code", d.label}, {"domain", d.domain_tag}};
        if (d.context) {
            const auto& c = *d.context;
            j["author"] = c.author ? json(*c.author) : json(nullptr);
            j["source_url"] = c.source_url ? json(*c.source_url) : json(nullptr);
            j["tweet_authors"] = c.tweet_authors;
            j["tweet_texts"] = c.tweet_texts;
            j["retweet_count"] = c.retweet_count;
        }
        out << j.dump() << '\n';
    }
}

LabeledDataset load_jsonl(const fs::path& path, std::vector<std::string> class_names) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    LabeledDataset ds;
    ds.class_names = std::move(class_names);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            Document d;
            d.id = j.at("id").get<std::string>();
            d.title = j.value("title", "");
            d.body = j.at("body").get<std::string>();
            d.label = j.at("label_code").get<int>();
            d.domain_tag = j.value("domain", "");
            if (j.contains("tweet_texts") || j.contains("author") || j.contains("source_url")) {
                ContextBundle c;
                if (j.contains("author") && j["author"].is_string()) c.author = j["author"].get<std::string>();
                if (j.contains("source_url") && j["source_url"].is_string())
                    c.source_url = j["source_url"].get<std::string>();
                c.tweet_authors = j.value("tweet_authors", std::vector<std::string>{});
                c.tweet_texts = deduplicate(j.value("tweet_texts", std::vector<std::string>{}));
                c.retweet_count = std::max<std::int64_t>(0, j.value("retweet_count", std::int64_t{0}));
                d.context = std::move(c);
            }
            if (d.label < 0 || d.label >= ds.num_classes())
                throw RuntimeError("label_code " + std::to_string(d.label) + " outside declared classes");
            ds.documents.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw RuntimeError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const RuntimeError& e) {
            throw RuntimeError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ds;
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = dataset.size();
    if (n < 2) throw ConfigError("cannot split a dataset of " + std::to_string(n) + " documents");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.documents[a].id < dataset.documents[b].id;
    });
    Rng rng(spec.seed);
    rng.shuffle(order);

    auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

    std::vector<Document> train, validation;
    for (std::size_t i = 0; i < n; ++i)
        (in_train[i] ? train : validation).push_back(dataset.documents[i]);
    return {dataset.with_documents(std::move(train)), dataset.with_documents(std::move(validation))};
}

LabeledDataset oversample(const LabeledDataset& train, std::uint64_t seed) {
    const auto counts = train.class_counts();
    const auto present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    if (present < 2) throw ConfigError("oversampling needs at least two classes present");

    const std::size_t majority = *std::max_element(counts.begin(), counts.end());
    std::vector<Document> out = train.documents;
    Rng rng(seed);
    for (int cls = 0; cls < train.num_classes(); ++cls) {
        const std::size_t have = counts[static_cast<std::size_t>(cls)];
        if (have == 0 || have == majority) continue;
        std::vector<const Document*> pool;
        for (const auto& d : train.documents)
            if (d.label == cls) pool.push_back(&d);
        std::stable_sort(pool.begin(), pool.end(), [](const Document* a, const Document* b) { return a->id < b->id; });
        for (std::size_t i = have; i < majority; ++i) out.push_back(*pool[rng.below(pool.size())]);
    }
    return train.with_documents(std::move(out));
}

SegmentedText build_content_string(const std::string& title, const std::string& body) {
    return SegmentedText{{title, body}};
}

SegmentedText build_content_string(const Document& doc) { return build_content_string(doc.title, doc.body); }

std::vector<std::string> deduplicate(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& s : items)
        if (seen.insert(s).second) out.push_back(s);
    return out;
}

ContextInputs build_context_inputs(const ContextBundle& ctx, const ContextOptions& options) {
    ContextInputs in;
    auto& seg = in.text.segments;
    seg.push_back(ctx.author.value_or(""));
    seg.push_back(ctx.source_url.value_or(""));
    std::string authors;
    for (std::size_t i = 0; i < ctx.tweet_authors.size(); ++i) {
        if (i > 0) authors += options.author_delimiter;
        authors += ctx.tweet_authors[i];
    }
    seg.push_back(std::move(authors));
    for (auto& t : deduplicate(ctx.tweet_texts)) seg.push_back(std::move(t));

    const double count = static_cast<double>(std::max<std::int64_t>(0, ctx.retweet_count));
    in.numeric.push_back(options.log1p_retweets ? std::log1p(count) : count);
    return in;
}

namespace {

const std::vector<std::string> kSubjects{
    "the city council", "a local school", "the regional hospital", "state officials", "the county board",
    "a research team", "the transit agency", "several residents", "the university", "a small business group",
    "the mayor", "the police department", "a community group", "the health department", "the library",
};
const std::vector<std::string> kVerbs{
    "announced", "reviewed", "approved", "discussed", "published", "postponed", "considered", "reported",
    "updated", "presented", "described", "evaluated",
};
const std::vector<std::string> kObjects{
    "a new budget plan", "the quarterly report", "changes to the bus routes", "a road repair schedule",
    "the annual survey results", "a proposal for new parks", "funding for school lunches",
    "an updated safety policy", "the water quality findings", "plans for a community center",
    "a study on local housing", "the election timetable",
};
const std::vector<std::string> kTails{
    "on tuesday", "after a long meeting", "in a public statement", "during the weekly session",
    "according to the minutes", "earlier this month", "following public comment", "at the town hall",
};
const std::vector<std::string> kMarkers{
    "shocking secret exposed", "miracle cure they hide", "insiders reveal hoax", "banned truth leaked",
    "outrageous cover up", "secret plot uncovered",
};
const std::vector<std::string> kNeutralTitles{
    "council reviews plan", "officials publish report", "residents discuss proposal", "agency updates schedule",
    "board approves funding", "team presents findings",
};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[rng.below(v.size())];
}

std::string sentence(Rng& rng) {
    std::string s = pick(rng, kSubjects) + " " + pick(rng, kVerbs) + " " + pick(rng, kObjects) + " " +
                    pick(rng, kTails) + ".";
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string marker_sentence(Rng& rng) {
    std::string s = pick(rng, kMarkers) + " as " + pick(rng, kSubjects) + " " + pick(rng, kVerbs) + " " +
                    pick(rng, kObjects) + ".";
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace

LabeledDataset make_synthetic(const SyntheticOptions& options) {
    Rng rng(options.seed);
    LabeledDataset ds;
    ds.class_names = fakenewsnet_classes();
    const std::vector<std::string> fake_sites{"dailytruthwire.example", "realpatriotnews.example",
                                              "buzzleaks.example"};
    const std::vector<std::string> real_sites{"citygazette.example", "statetribune.example",
                                              "metroherald.example"};
    for (std::size_t i = 0; i < options.documents; ++i) {
        Document d;
        char id[32];
        std::snprintf(id, sizeof(id), "synth%05zu", i);
        d.id = id;
        d.domain_tag = "synthetic";
        const bool fake = rng.uniform() < options.fake_fraction;
        d.label = fake ? 1 : 0;
        const bool long_doc = rng.uniform() < options.long_fraction;
        const std::size_t sentences = long_doc ? 45 + rng.below(20) : 6 + rng.below(10);

        d.title = fake && rng.uniform() < 0.85 ? pick(rng, kMarkers) + " " + pick(rng, kNeutralTitles)
                                               : pick(rng, kNeutralTitles);
        std::vector<std::string> body;
        for (std::size_t s = 0; s < sentences; ++s) body.push_back(sentence(rng));
        if (fake) {
            const std::size_t markers = std::max<std::size_t>(2, sentences / 3);
            for (std::size_t m = 0; m < markers; ++m) body[rng.below(body.size())] = marker_sentence(rng);
        }
        for (std::size_t s = 0; s < body.size(); ++s) d.body += (s ? " " : "") + body[s];

        ContextBundle ctx;
        if (rng.uniform() < 0.8) ctx.author = "reporter" + std::to_string(rng.below(40));
        const auto& sites = (rng.uniform() < 0.8) == fake ? fake_sites : real_sites;
        ctx.source_url = "https://" + pick(rng, sites) + "/story/" + std::to_string(i);
        const std::size_t tweets = rng.below(5);
        std::vector<std::string> texts;
        for (std::size_t t = 0; t < tweets; ++t) {
            ctx.tweet_authors.push_back("user" + std::to_string(rng.below(200)));
            texts.push_back(rng.uniform() < 0.3 ? d.title : "read this " + pick(rng, kObjects));
        }
        ctx.tweet_texts = deduplicate(texts);
        ctx.retweet_count = static_cast<std::int64_t>(rng.below(fake ? 30 : 10));
        d.context = std::move(ctx);
        ds.documents.push_back(std::move(d));
    }
    return ds;
}

}  // namespace cmtr::corpus
