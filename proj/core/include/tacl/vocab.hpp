#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tacl/common.hpp"

namespace tacl {

// Subword vocabulary. Ids 0..4 are reserved; every non-word-initial subword
// carries the "##" continuation marker.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr int kMask = 4;
    static constexpr int kNumReserved = 5;
    static const std::vector<std::string>& reserved_tokens();

    static Vocab with_reserved();
    static Vocab from_tokens(std::vector<std::string> tokens);  // includes the reserved five

    int size() const { return static_cast<int>(id_to_token_.size()); }
    int id_of(std::string_view token) const;  // -1 if absent
    const std::string& token_of(int id) const;
    bool contains(std::string_view token) const { return id_of(token) >= 0; }
    static bool is_special(int id) { return id >= 0 && id < kNumReserved; }

    void add(const std::string& token);

    // One token per line, line number = id, first five lines the reserved tokens.
    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

// Whitespace split with punctuation characters broken out as single-char
// pre-tokens. UTF-8 aware: code points stay intact.
std::vector<std::string> pretokenize(std::string_view text);

// Splits a pre-token into UTF-8 code points.
std::vector<std::string> utf8_codepoints(std::string_view word);

// Greedy frequency-based subword vocabulary: character symbols first, then
// iterative most-frequent-pair merging until target_size (ties broken
// lexicographically on the pair). Pairs below min_freq are never merged.
Vocab build_vocab(std::istream& corpus, int target_size, int min_freq = 2);
Vocab build_vocab_from_file(const std::string& path, int target_size, int min_freq = 2);

// Greedy longest-match segmentation per pre-token; unmatched single
// characters map to [UNK] without resetting the continuation state.
std::vector<int> encode(std::string_view text, const Vocab& vocab);

// Inverse of encode up to pre-token boundaries: emits pre-tokens joined by
// single spaces, continuation markers stripped.
std::string decode(std::span<const int> ids, const Vocab& vocab);

}  // namespace tacl
