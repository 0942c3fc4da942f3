#include <filesystem>

#include "cmtr/error.hpp"
#include "cmtr/tokenizer.hpp"
#include "doctest.h"

using namespace cmtr;

namespace {

WordPieceTokenizer small_vocab() {
    return WordPieceTokenizer({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "the", "fake", "news", "un", "##want",
                               "##ed", "want", ",", "!", "run", "##ning"});
}

}  // namespace

TEST_CASE("greedy longest match with continuation pieces") {
    const auto tok = small_vocab();
    const auto ids = tok.encode_plain("unwanted running");
    std::vector<std::string> pieces;
    for (auto id : ids) pieces.push_back(tok.token(id));
    CHECK(pieces == std::vector<std::string>{"un", "##want", "##ed", "run", "##ning"});
}

TEST_CASE("lower casing, punctuation and unknown words") {
    const auto tok = small_vocab();
    const auto ids = tok.encode_plain("The FAKE, news! xyz");
    std::vector<std::string> pieces;
    for (auto id : ids) pieces.push_back(tok.token(id));
    CHECK(pieces == std::vector<std::string>{"the", "fake", ",", "news", "!", "[UNK]"});
}

TEST_CASE("segmented text places sentinels between segments") {
    const auto tok = small_vocab();
    const auto ids = tok.encode(SegmentedText{{"the news", "fake"}});
    REQUIRE(ids.size() == 5);
    CHECK(ids[0] == tok.cls_id());
    CHECK(ids[3] == tok.sep_id());
    CHECK(tok.token(ids[4]) == "fake");
    // sentinel spelling in the text is not a sentinel
    const auto typed = tok.encode_plain("[CLS]");
    for (auto id : typed) CHECK(id != tok.cls_id());
}

TEST_CASE("missing special tokens are rejected") {
    CHECK_THROWS_AS(WordPieceTokenizer({"[PAD]", "[UNK]", "a"}), ConfigError);
}

TEST_CASE("built vocabulary covers every character") {
    const auto tok = WordPieceTokenizer::build({"alpha beta gamma", "beta delta"}, 40);
    CHECK(tok.vocab_size() <= 40);
    CHECK(tok.encode_plain("zeta") == TokenSequence{tok.unk_id()});  // no piece for z
    const auto ids = tok.encode_plain("abe");
    for (auto id : ids) CHECK(id != tok.unk_id());
    CHECK(tok.decode(tok.encode_plain("beta delta")) == "beta delta");
}

TEST_CASE("vocab file round trip") {
    const auto tok = WordPieceTokenizer::build({"one two three two"});
    const auto path = std::filesystem::temp_directory_path() / "cmtr_vocab_test.txt";
    tok.save(path);
    const auto back = WordPieceTokenizer::load(path);
    CHECK(back.vocab_size() == tok.vocab_size());
    CHECK(back.fingerprint() == tok.fingerprint());
    CHECK(back.encode_plain("two three") == tok.encode_plain("two three"));
    std::filesystem::remove(path);
}
