#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmtr/segmented_text.hpp"

namespace cmtr {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// BERT-style WordPiece tokenizer: lower-casing basic split on whitespace and
// punctuation, then greedy longest-match-first subwords with "##" prefixes.
// Reads and writes the one-token-per-line vocab.txt format.
class WordPieceTokenizer {
public:
    static constexpr std::string_view kPad = "[PAD]";
    static constexpr std::string_view kUnk = "[UNK]";
    static constexpr std::string_view kCls = "[CLS]";
    static constexpr std::string_view kSep = "[SEP]";
    static constexpr std::string_view kMask = "[MASK]";

    explicit WordPieceTokenizer(std::vector<std::string> vocab, bool lower_case = true);

    static WordPieceTokenizer load(const std::filesystem::path& vocab_txt, bool lower_case = true);
    void save(const std::filesystem::path& vocab_txt) const;

    // Whole words seen at least min_count times (most frequent first, up to
    // max_size entries overall) plus every character as a piece, so that no
    // input maps to [UNK] merely for lack of coverage.
    static WordPieceTokenizer build(const std::vector<std::string>& texts, std::size_t max_size = 30000,
                                    std::size_t min_count = 1);

    // Sub-word pieces of plain text, no sentinels.
    TokenSequence encode_plain(std::string_view text) const;

    // <CLS> seg0 <SEP> seg1 ... <SEP> segN
    TokenSequence encode(const SegmentedText& text) const;

    std::string decode(const TokenSequence& ids) const;

    std::vector<std::string> basic_split(std::string_view text) const;

    TokenId pad_id() const { return pad_; }
    TokenId unk_id() const { return unk_; }
    TokenId cls_id() const { return cls_; }
    TokenId sep_id() const { return sep_; }
    bool is_special(TokenId id) const { return id == pad_ || id == cls_ || id == sep_ || id == mask_; }

    std::size_t vocab_size() const { return vocab_.size(); }
    const std::string& token(TokenId id) const { return vocab_.at(static_cast<std::size_t>(id)); }
    TokenId id_of(std::string_view token) const;  // unk_id() when absent

    std::string fingerprint() const;

private:
    void wordpiece(const std::string& word, TokenSequence& out) const;

    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> index_;
    bool lower_case_;
    TokenId pad_, unk_, cls_, sep_, mask_;
};

}  // namespace cmtr
