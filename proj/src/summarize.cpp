#include "cmtr/summarize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "cmtr/chunker.hpp"
#include "cmtr/error.hpp"
#include "cmtr/rng.hpp"
#include "json.hpp"

namespace cmtr::summarize {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

double squared_distance(const Embedding& a, const Embedding& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i] - b[i];
        d += x * x;
    }
    return d;
}

std::string join_sentences(const std::vector<std::string>& sentences, const std::vector<std::size_t>& picks) {
    std::string out;
    for (std::size_t i : picks) {
        if (!out.empty()) out += ' ';
        out += sentences[i];
    }
    return out;
}

}  // namespace

SentenceSplitter::SentenceSplitter()
    : SentenceSplitter({"mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "inc",
                        "ltd", "co", "corp", "u.s", "u.k", "gov", "sen", "rep", "gen", "no", "fig", "jan", "feb",
                        "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "mt", "approx"}) {}

SentenceSplitter::SentenceSplitter(std::vector<std::string> abbreviations) : abbreviations_(std::move(abbreviations)) {
    for (auto& a : abbreviations_) a = lower(a);
}

std::vector<std::string> SentenceSplitter::split(std::string_view text) const {
    std::vector<std::string> out;
    std::size_t start = 0;
    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t end = i + 1;
        while (end < n && (text[end] == '.' || text[end] == '!' || text[end] == '?')) ++end;
        while (end < n && (text[end] == '"' || text[end] == '\'' || text[end] == ')' || text[end] == ']')) ++end;
        if (end < n && !std::isspace(static_cast<unsigned char>(text[end]))) continue;

        if (c == '.') {
            std::size_t w = i;
            while (w > start && !std::isspace(static_cast<unsigned char>(text[w - 1]))) --w;
            std::string word = lower(std::string(text.substr(w, i - w)));
            while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\''))
                word.erase(word.begin());
            const bool initial = word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0]));
            if (initial || std::find(abbreviations_.begin(), abbreviations_.end(), word) != abbreviations_.end()) {
                i = end - 1;
                continue;
            }
        }
        if (auto s = trim(text.substr(start, end - start)); !s.empty()) out.push_back(std::move(s));
        start = end;
        i = end - 1;
    }
    if (auto s = trim(text.substr(std::min(start, n))); !s.empty()) out.push_back(std::move(s));
    return out;
}

std::vector<Embedding> HashingEmbedder::embed(const std::vector<std::string>& sentences) const {
    std::vector<Embedding> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
        Embedding v(dim_, 0.0);
        std::string word;
        auto flush = [&] {
            if (word.empty()) return;
            const std::uint64_t h = stable_hash(word);
            v[h % dim_] += (h >> 63) ? 1.0 : -1.0;
            word.clear();
        };
        for (char ch : s) {
            const auto c = static_cast<unsigned char>(ch);
            if (std::isalnum(c) || c >= 128) word += static_cast<char>(std::tolower(c));
            else flush();
        }
        flush();
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

KMeansResult kmeans(const std::vector<Embedding>& points, std::size_t k, const KMeansOptions& options) {
    const std::size_t n = points.size();
    if (n == 0) throw RuntimeError("k-means on an empty point set");
    if (k == 0 || k > n) throw ConfigError("k-means needs 1 <= k <= n, got k=" + std::to_string(k));
    const std::size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw RuntimeError("k-means points have inconsistent dimensions");

    Rng rng(options.seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (std::size_t restart = 0; restart < std::max<std::size_t>(1, options.restarts); ++restart) {
        std::vector<Embedding> centroids;
        centroids.push_back(points[rng.below(n)]);
        std::vector<double> d2(n);
        for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
        while (centroids.size() < k) {
            double total = 0.0;
            for (double d : d2) total += d;
            std::size_t pick = n - 1;
            if (total <= 0.0) {
                pick = rng.below(n);
            } else {
                const double u = rng.uniform() * total;
                double cumulative = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    cumulative += d2[i];
                    if (u < cumulative) {
                        pick = i;
                        break;
                    }
                }
            }
            centroids.push_back(points[pick]);
            for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
        }

        std::vector<std::size_t> assignment(n, k);
        for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
            bool changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t arg = 0;
                double bd = squared_distance(points[i], centroids[0]);
                for (std::size_t c = 1; c < k; ++c) {
                    const double d = squared_distance(points[i], centroids[c]);
                    if (d < bd) {
                        bd = d;
                        arg = c;
                    }
                }
                if (assignment[i] != arg) {
                    assignment[i] = arg;
                    changed = true;
                }
            }
            if (!changed) break;
            std::vector<Embedding> sums(k, Embedding(dim, 0.0));
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                ++counts[assignment[i]];
                for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += points[i][d];
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) continue;
                for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
            }
        }

        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += squared_distance(points[i], centroids[assignment[i]]);
        if (inertia < best.inertia) {
            best.centroids = std::move(centroids);
            best.assignment = std::move(assignment);
            best.inertia = inertia;
        }
    }
    return best;
}

std::vector<std::size_t> nearest_to_centroids(const std::vector<Embedding>& points,
                                              const std::vector<Embedding>& centroids) {
    std::vector<bool> used(points.size(), false);
    std::vector<std::size_t> picks;
    for (const auto& c : centroids) {
        std::size_t arg = points.size();
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (used[i]) continue;
            const double d = squared_distance(points[i], c);
            if (d < bd) {
                bd = d;
                arg = i;
            }
        }
        if (arg == points.size()) break;
        used[arg] = true;
        picks.push_back(arg);
    }
    std::sort(picks.begin(), picks.end());
    return picks;
}

void ExtractiveConfig::validate() const {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("extractive ratio must lie in (0, 1]");
}

std::size_t extractive_sentence_count(std::size_t sentences, double ratio) {
    const auto k = static_cast<std::size_t>(std::max<long long>(1, std::llround(ratio * static_cast<double>(sentences))));
    return std::min(k, sentences);
}

std::string extractive_summary(const std::string& body, const ExtractiveConfig& cfg, const SentenceEmbedder& embedder,
                               const CorefResolver& coref, const SentenceSplitter& splitter) {
    cfg.validate();
    const std::string text = cfg.coref_enabled ? coref.resolve(body) : body;
    const auto sentences = splitter.split(text);
    if (sentences.empty()) throw RuntimeError("extractive summary: no sentences in input");

    const std::size_t k = extractive_sentence_count(sentences.size(), cfg.ratio);
    const auto vectors = embedder.embed(sentences);
    if (vectors.size() != sentences.size())
        throw RuntimeError("embedder '" + embedder.id() + "' returned " + std::to_string(vectors.size()) +
                           " vectors for " + std::to_string(sentences.size()) + " sentences");

    const auto clusters = kmeans(vectors, k, KMeansOptions{10, 300, cfg.seed});
    return join_sentences(sentences, nearest_to_centroids(vectors, clusters.centroids));
}

void AbstractiveConfig::validate() const {
    if (top_k < 1) throw ConfigError("top_k must be at least 1");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
    if (!(target_ratio > 0.0)) throw ConfigError("target_ratio must be positive");
}

LengthBounds AbstractiveConfig::bounds_for(std::size_t window_tokens) const {
    const double n = static_cast<double>(window_tokens);
    LengthBounds b;
    b.min_tokens = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(target_ratio * 0.625 * n)));
    b.max_tokens = std::max(b.min_tokens, static_cast<std::size_t>(std::ceil(target_ratio * 1.375 * n)));
    return b;
}

std::string abstractive_summary(const std::string& body, const AbstractiveConfig& cfg,
                                const SummaryGenerator& generator) {
    cfg.validate();
    const TokenSequence tokens = generator.tokenize(body);
    if (tokens.empty()) throw RuntimeError("abstractive summary: empty body");

    const auto windows = chunker::chunk_for_summarizer(tokens);
    std::string out;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const SamplingParams params{cfg.top_k, cfg.top_p, stable_hash_combine(cfg.seed, "window:" + std::to_string(i))};
        std::string part = generator.generate(windows.chunks[i], params, cfg.bounds_for(windows.chunks[i].size()));
        if (part.empty()) continue;
        if (!out.empty()) out += ' ';
        out += part;
    }
    return out;
}

Summarizer::Summarizer(ExtractiveConfig extractive, AbstractiveConfig abstractive, const SentenceEmbedder& embedder,
                       const SummaryGenerator& generator, const CorefResolver& coref)
    : extractive_(extractive), abstractive_(abstractive), embedder_(embedder), generator_(generator), coref_(coref) {
    extractive_.validate();
    abstractive_.validate();
}

const CorefResolver& Summarizer::default_coref() {
    static const IdentityCoref identity;
    return identity;
}

std::uint64_t Summarizer::document_seed(std::uint64_t global_seed, const std::string& doc_id) {
    return stable_hash_combine(global_seed, doc_id);
}

std::string Summarizer::summarize(const corpus::Document& doc, Representation rep) const {
    switch (rep) {
        case Representation::original:
            return doc.body;
        case Representation::extractive: {
            ExtractiveConfig cfg = extractive_;
            cfg.seed = document_seed(extractive_.seed, doc.id);
            return extractive_summary(doc.body, cfg, embedder_, coref_, splitter_);
        }
        case Representation::abstractive: {
            AbstractiveConfig cfg = abstractive_;
            cfg.seed = document_seed(abstractive_.seed, doc.id);
            return abstractive_summary(doc.body, cfg, generator_);
        }
    }
    throw ConfigError("unknown representation");
}

std::string Summarizer::fingerprint(Representation rep) const {
    nlohmann::json j;
    j["representation"] = to_string(rep);
    switch (rep) {
        case Representation::original:
            break;
        case Representation::extractive:
            j["ratio"] = extractive_.ratio;
            j["coref_enabled"] = extractive_.coref_enabled;
            j["coref"] = coref_.id();
            j["seed"] = extractive_.seed;
            j["embedder"] = embedder_.id();
            break;
        case Representation::abstractive:
            j["top_k"] = abstractive_.top_k;
            j["top_p"] = abstractive_.top_p;
            j["target_ratio"] = abstractive_.target_ratio;
            j["seed"] = abstractive_.seed;
            j["generator"] = generator_.id();
            break;
    }
    return to_hex(stable_hash(j.dump()));
}

}  // namespace cmtr::summarize
