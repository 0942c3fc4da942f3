#include "cmtr/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "cmtr/error.hpp"
#include "cmtr/rng.hpp"

namespace cmtr {

namespace {

constexpr std::size_t kMaxWordChars = 100;

bool is_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lower_case)
    : vocab_(std::move(vocab)), lower_case_(lower_case) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<TokenId>(i));
    auto require = [&](std::string_view name) {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw ConfigError("vocabulary lacks special token " + std::string(name));
        return it->second;
    };
    pad_ = require(kPad);
    unk_ = require(kUnk);
    cls_ = require(kCls);
    sep_ = require(kSep);
    mask_ = require(kMask);
}

WordPieceTokenizer WordPieceTokenizer::load(const std::filesystem::path& vocab_txt, bool lower_case) {
    std::ifstream in(vocab_txt);
    if (!in) throw ConfigError("cannot open vocabulary " + vocab_txt.string());
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab.push_back(line);
    }
    return WordPieceTokenizer(std::move(vocab), lower_case);
}

void WordPieceTokenizer::save(const std::filesystem::path& vocab_txt) const {
    if (vocab_txt.has_parent_path()) std::filesystem::create_directories(vocab_txt.parent_path());
    std::ofstream out(vocab_txt);
    if (!out) throw RuntimeError("cannot write " + vocab_txt.string());
    for (const auto& t : vocab_) out << t << '\n';
}

std::vector<std::string> WordPieceTokenizer::basic_split(std::string_view text) const {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || c < 32) {
            flush();
        } else if (is_punct(c)) {
            flush();
            words.emplace_back(1, ch);
        } else {
            cur += lower_case_ && c < 128 ? static_cast<char>(std::tolower(c)) : ch;
        }
    }
    flush();
    return words;
}

TokenId WordPieceTokenizer::id_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk_ : it->second;
}

void WordPieceTokenizer::wordpiece(const std::string& word, TokenSequence& out) const {
    if (word.size() > kMaxWordChars) {
        out.push_back(unk_);
        return;
    }
    TokenSequence pieces;
    std::size_t start = 0;
    while (start < word.size()) {
        std::size_t end = word.size();
        TokenId found = -1;
        while (start < end) {
            std::string sub = word.substr(start, end - start);
            if (start > 0) sub = "##" + sub;
            if (auto it = index_.find(sub); it != index_.end()) {
                found = it->second;
                break;
            }
            --end;
        }
        if (found < 0) {
            out.push_back(unk_);
            return;
        }
        pieces.push_back(found);
        start = end;
    }
    out.insert(out.end(), pieces.begin(), pieces.end());
}

TokenSequence WordPieceTokenizer::encode_plain(std::string_view text) const {
    TokenSequence out;
    for (const auto& w : basic_split(text)) wordpiece(w, out);
    return out;
}

TokenSequence WordPieceTokenizer::encode(const SegmentedText& text) const {
    TokenSequence out{cls_};
    for (std::size_t i = 0; i < text.segments.size(); ++i) {
        if (i > 0) out.push_back(sep_);
        for (const auto& w : basic_split(text.segments[i])) wordpiece(w, out);
    }
    return out;
}

std::string WordPieceTokenizer::decode(const TokenSequence& ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (is_special(id)) continue;
        const std::string& t = token(id);
        if (t.rfind("##", 0) == 0) {
            out += t.substr(2);
        } else {
            const bool punct = t.size() == 1 && is_punct(static_cast<unsigned char>(t[0]));
            if (!out.empty() && !punct) out += ' ';
            out += t;
        }
    }
    return out;
}

WordPieceTokenizer WordPieceTokenizer::build(const std::vector<std::string>& texts, std::size_t max_size,
                                             std::size_t min_count) {
    std::vector<std::string> vocab{std::string(kPad), std::string(kUnk), std::string(kCls), std::string(kSep),
                                   std::string(kMask)};
    WordPieceTokenizer splitter(vocab);

    std::map<std::string, std::size_t> freq;
    std::set<char> chars;
    for (const auto& t : texts) {
        for (const auto& w : splitter.basic_split(t)) {
            ++freq[w];
            chars.insert(w.begin(), w.end());
        }
    }
    for (char c : chars) vocab.emplace_back(1, c);
    for (char c : chars) vocab.push_back("##" + std::string(1, c));

    std::vector<std::pair<std::string, std::size_t>> words;
    for (const auto& [w, n] : freq)
        if (w.size() > 1 && n >= min_count) words.emplace_back(w, n);
    std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [w, n] : words) {
        if (vocab.size() >= max_size) break;
        vocab.push_back(w);
    }
    return WordPieceTokenizer(std::move(vocab));
}

std::string WordPieceTokenizer::fingerprint() const {
    std::uint64_t h = stable_hash(lower_case_ ? "lower" : "cased");
    for (const auto& t : vocab_) h = stable_hash_combine(h, t);
    return to_hex(h);
}

}  // namespace cmtr
