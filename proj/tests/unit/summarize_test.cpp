#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "cmtr/error.hpp"
#include "cmtr/summarize.hpp"
#include "cmtr/summary_store.hpp"
#include "doctest.h"

using namespace cmtr;
using namespace cmtr::summarize;
namespace fs = std::filesystem;

#ifndef CMTR_TEST_DATA
#define CMTR_TEST_DATA "."
#endif

namespace {

std::string numbered_text(std::size_t sentences) {
    static const char* topics[] = {"budget", "election", "weather", "school", "hospital", "transit", "housing"};
    std::string out;
    for (std::size_t i = 0; i < sentences; ++i) {
        if (!out.empty()) out += ' ';
        out += "Sentence " + std::to_string(i) + " talks about the " + topics[i % 7] + " plan.";
    }
    return out;
}

class UpperCoref final : public CorefResolver {
public:
    std::string resolve(const std::string& text) const override {
        std::string out = text;
        for (std::size_t p = out.find(" it "); p != std::string::npos; p = out.find(" it ", p)) out.replace(p, 4, " the plan ");
        return out;
    }
    std::string id() const override { return "test-coref"; }
};

}  // namespace

TEST_CASE("sentence splitter") {
    SentenceSplitter s;
    CHECK(s.split("Dr. Smith met Mr. J. Doe. They talked!  Then? Done") ==
          std::vector<std::string>{"Dr. Smith met Mr. J. Doe.", "They talked!", "Then?", "Done"});
    CHECK(s.split("He said \"stop.\" Then left.") == std::vector<std::string>{"He said \"stop.\"", "Then left."});
    CHECK(s.split("Version 2.5 is out. Yes.") == std::vector<std::string>{"Version 2.5 is out.", "Yes."});
    CHECK(s.split("   ").empty());
}

TEST_CASE("hashing embedder is normalized and deterministic") {
    HashingEmbedder e(64);
    const auto v = e.embed({"The budget plan", "the BUDGET plan", ""});
    double norm = 0;
    for (double x : v[0]) norm += x * x;
    CHECK(norm == doctest::Approx(1.0));
    CHECK(v[0] == v[1]);
    CHECK(std::all_of(v[2].begin(), v[2].end(), [](double x) { return x == 0.0; }));
}

TEST_CASE("k-means finds separated clusters") {
    std::vector<Embedding> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({0.0 + 0.01 * i, 0.0});
    for (int i = 0; i < 10; ++i) pts.push_back({5.0 + 0.01 * i, 5.0});
    const auto r = kmeans(pts, 2, {10, 300, 1});
    for (int i = 1; i < 10; ++i) CHECK(r.assignment[i] == r.assignment[0]);
    for (int i = 11; i < 20; ++i) CHECK(r.assignment[i] == r.assignment[10]);
    CHECK(r.assignment[0] != r.assignment[10]);
    CHECK_THROWS_AS(kmeans(pts, 0, {}), ConfigError);
    CHECK_THROWS_AS(kmeans(pts, 21, {}), ConfigError);
}

TEST_CASE("nearest sentence per centroid never repeats") {
    const std::vector<Embedding> pts{{0, 0}, {1, 0}, {10, 0}};
    const std::vector<Embedding> centroids{{0.1, 0}, {0.2, 0}};
    CHECK(nearest_to_centroids(pts, centroids) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("extractive sentence count") {
    CHECK(extractive_sentence_count(1, 0.4) == 1);
    CHECK(extractive_sentence_count(2, 0.4) == 1);
    CHECK(extractive_sentence_count(4, 0.4) == 2);
    CHECK(extractive_sentence_count(10, 0.4) == 4);
    CHECK(extractive_sentence_count(11, 0.4) == 4);
    CHECK(extractive_sentence_count(4, 1.0) == 4);
}

TEST_CASE("extractive summary picks verbatim sentences in order") {
    SentenceSplitter splitter;
    HashingEmbedder embedder;
    const auto body = numbered_text(12);
    const auto sentences = splitter.split(body);
    const auto summary = extractive_summary(body, {0.4, true, 3}, embedder);
    const auto picked = splitter.split(summary);
    CHECK(picked.size() == 5);
    std::size_t last = 0;
    for (const auto& s : picked) {
        auto it = std::find(sentences.begin(), sentences.end(), s);
        REQUIRE(it != sentences.end());
        const auto idx = static_cast<std::size_t>(it - sentences.begin());
        if (&s != &picked.front()) CHECK(idx > last);
        last = idx;
    }
    CHECK(extractive_summary(body, {0.4, true, 3}, embedder) == summary);
    CHECK_THROWS_AS(extractive_summary("   ", {0.4, true, 3}, embedder), RuntimeError);
    CHECK_THROWS_AS(extractive_summary(body, {0.0, true, 3}, embedder), ConfigError);
}

TEST_CASE("coref pre-pass runs only when enabled") {
    HashingEmbedder embedder;
    UpperCoref coref;
    const std::string body = "The plan passed. Officials said it was late.";
    const auto on = extractive_summary(body, {1.0, true, 1}, embedder, coref);
    const auto off = extractive_summary(body, {1.0, false, 1}, embedder, coref);
    CHECK(on.find("said the plan was") != std::string::npos);
    CHECK(off == body);
}

TEST_CASE("top-k then top-p filtering") {
    const std::vector<std::pair<TokenId, double>> p{{5, 0.1}, {1, 0.4}, {2, 0.3}, {3, 0.2}};
    auto f = filter_top_k_top_p(p, 100, 0.65);
    REQUIRE(f.size() == 2);
    CHECK(f[0].first == 1);
    CHECK(f[1].first == 2);
    CHECK(f[0].second == doctest::Approx(0.4 / 0.7));
    f = filter_top_k_top_p(p, 1, 0.95);
    REQUIRE(f.size() == 1);
    CHECK(f[0].second == 1.0);
    f = filter_top_k_top_p(p, 100, 1.0);
    CHECK(f.size() == 4);
    CHECK(sample_index(f, 0.0) == 0);
    CHECK(sample_index(f, 0.999999) == 3);
}

TEST_CASE("length bounds bracket the target ratio") {
    AbstractiveConfig cfg;
    const auto b = cfg.bounds_for(1000);
    CHECK(b.min_tokens == 250);
    CHECK(b.max_tokens == 550);
    const auto tiny = cfg.bounds_for(1);
    CHECK(tiny.min_tokens == 1);
    CHECK(tiny.max_tokens >= tiny.min_tokens);
}

TEST_CASE("bigram sampler respects bounds and seeds") {
    const auto body = numbered_text(40);
    auto tok = WordPieceTokenizer::build({body});
    BigramSampler gen(tok);
    const auto ids = gen.tokenize(body);
    const LengthBounds bounds{20, 40};
    const auto a = gen.generate(ids, {100, 0.95, 7}, bounds);
    CHECK(a == gen.generate(ids, {100, 0.95, 7}, bounds));
    const auto n = gen.tokenize(a).size();
    CHECK(n >= 20);
    CHECK(n <= 40);
    std::set<std::string> outputs;
    for (std::uint64_t s = 0; s < 8; ++s) outputs.insert(gen.generate(ids, {100, 0.95, s}, bounds));
    CHECK(outputs.size() > 1);
}

TEST_CASE("abstractive summary over long input uses every window") {
    const auto body = numbered_text(400);  // a few thousand tokens
    auto tok = WordPieceTokenizer::build({body});
    BigramSampler gen(tok);
    const auto s = abstractive_summary(body, {}, gen);
    const auto n_in = gen.tokenize(body).size();
    const auto n_out = gen.tokenize(s).size();
    CHECK(n_in > 2000);
    CHECK(n_out >= n_in / 5);
    CHECK(n_out <= n_in);
}

TEST_CASE("process generator protocol") {
    const std::string script = std::string(CMTR_TEST_DATA) + "/echo_generator.py";
    ProcessGenerator gen("python3 " + script);
    CHECK(gen.id() == "process:echo");
    const auto ids = gen.tokenize("a b c d");
    CHECK(ids.size() == 4);
    CHECK(gen.generate(ids, {5, 0.9, 1234}, {1, 3}) == "n=4 min=1 max=3 seed=234");
    CHECK_THROWS_AS(gen.generate(ids, {1, 0.9, 1}, {1, 3}), RuntimeError);
    CHECK_THROWS_AS(ProcessGenerator("exit 3"), RuntimeError);
}

TEST_CASE("summarizer seeds per document and fingerprints per representation") {
    HashingEmbedder embedder;
    const auto body = numbered_text(30);
    BigramSampler gen(WordPieceTokenizer::build({body}));
    Summarizer sm({0.4, true, 5}, {100, 0.95, 0.4, 5}, embedder, gen);
    corpus::Document d1{"d1", "t", body, 0, std::nullopt, ""};
    corpus::Document d2 = d1;
    d2.id = "d2";
    CHECK(sm.summarize(d1, Representation::original) == body);
    CHECK(sm.summarize(d1, Representation::abstractive) == sm.summarize(d1, Representation::abstractive));
    CHECK(sm.summarize(d1, Representation::abstractive) != sm.summarize(d2, Representation::abstractive));
    CHECK(Summarizer::document_seed(5, "d1") != Summarizer::document_seed(5, "d2"));

    Summarizer other({0.5, true, 5}, {100, 0.95, 0.4, 5}, embedder, gen);
    CHECK(other.fingerprint(Representation::extractive) != sm.fingerprint(Representation::extractive));
    CHECK(other.fingerprint(Representation::abstractive) == sm.fingerprint(Representation::abstractive));
}

TEST_CASE("summary store replays the last record and skips torn lines") {
    const auto path = fs::temp_directory_path() / "cmtr_store_test.jsonl";
    fs::remove(path);
    {
        SummaryStore s(path);
        s.put({"a", Representation::extractive, "one", "f1"});
        s.put({"a", Representation::extractive, "two", "f2"});
        s.put({"b", Representation::abstractive, "three", "f1"});
    }
    std::ofstream(path, std::ios::app) << "{\"doc_id\": \"c\", \"repr";
    SummaryStore s(path);
    CHECK(s.size() == 2);
    CHECK(s.find("a", Representation::extractive)->text == "two");
    CHECK(s.count(Representation::abstractive) == 1);
    CHECK_FALSE(s.find("c", Representation::extractive));
    fs::remove(path);
}

TEST_CASE("corpus summarization is idempotent and texts resolve") {
    auto ds = corpus::make_synthetic({30, 0.4, 0.0, 2});
    HashingEmbedder embedder;
    std::vector<std::string> bodies;
    for (const auto& d : ds.documents) bodies.push_back(d.body);
    BigramSampler gen(WordPieceTokenizer::build(bodies));
    Summarizer sm({0.4, true, 1}, {100, 0.95, 0.4, 1}, embedder, gen);
    SummaryStore store;
    auto r = summarize_corpus(ds, store, sm, {Representation::extractive, Representation::abstractive}, 3);
    CHECK(r.generated == 60);
    CHECK(r.skipped == 0);
    r = summarize_corpus(ds, store, sm);
    CHECK(r.generated == 0);
    CHECK(r.skipped == 60);

    // parallel and serial runs agree
    SummaryStore serial;
    summarize_corpus(ds, serial, sm, {Representation::extractive, Representation::abstractive}, 1);
    for (const auto& d : ds.documents)
        CHECK(serial.find(d.id, Representation::abstractive)->text == store.find(d.id, Representation::abstractive)->text);

    RepresentationTexts strict(&store, &sm, false);
    strict.require_all(ds.documents, Representation::extractive);
    CHECK(strict.text(ds.documents[0], Representation::original) == ds.documents[0].body);

    Summarizer changed({0.6, true, 1}, {100, 0.95, 0.4, 1}, embedder, gen);
    RepresentationTexts stale(&store, &changed, false);
    CHECK_THROWS_AS(stale.require_all(ds.documents, Representation::extractive), RuntimeError);
    stale.require_all(ds.documents, Representation::abstractive);
    RepresentationTexts on_demand(&store, &changed, true);
    CHECK(on_demand.text(ds.documents[0], Representation::extractive) ==
          changed.summarize(ds.documents[0], Representation::extractive));
}
