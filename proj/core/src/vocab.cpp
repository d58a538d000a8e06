#include "tacl/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace tacl {

namespace {
constexpr std::string_view kContinuation = "##";

bool is_punct_byte(unsigned char c) {
    return std::ispunct(c) != 0;
}
}  // namespace

const std::vector<std::string>& Vocab::reserved_tokens() {
    static const std::vector<std::string> r = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    return r;
}

Vocab Vocab::with_reserved() {
    Vocab v;
    for (const auto& t : reserved_tokens()) v.add(t);
    return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < kNumReserved)
        throw ValueError("Vocab: fewer tokens than the reserved five");
    for (int i = 0; i < kNumReserved; ++i)
        if (tokens[i] != reserved_tokens()[i])
            throw ValueError("Vocab: token " + std::to_string(i) + " must be " +
                             reserved_tokens()[i] + ", got '" + tokens[i] + "'");
    Vocab v;
    for (auto& t : tokens) v.add(t);
    return v;
}

int Vocab::id_of(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? -1 : it->second;
}

const std::string& Vocab::token_of(int id) const {
    if (id < 0 || id >= size()) throw ValueError("Vocab: id out of range: " + std::to_string(id));
    return id_to_token_[id];
}

void Vocab::add(const std::string& token) {
    if (token.empty()) throw ValueError("Vocab: empty token");
    if (token_to_id_.count(token)) throw ValueError("Vocab: duplicate token '" + token + "'");
    token_to_id_.emplace(token, size());
    id_to_token_.push_back(token);
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& t : id_to_token_) out << t << "\n";
    if (!out) throw IoError("write failed: " + path);
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

std::vector<std::string> utf8_codepoints(std::string_view word) {
    std::vector<std::string> cps;
    size_t i = 0;
    while (i < word.size()) {
        unsigned char c = word[i];
        size_t len = 1;
        if ((c & 0x80) == 0)
            len = 1;
        else if ((c & 0xe0) == 0xc0)
            len = 2;
        else if ((c & 0xf0) == 0xe0)
            len = 3;
        else if ((c & 0xf8) == 0xf0)
            len = 4;
        len = std::min(len, word.size() - i);
        cps.emplace_back(word.substr(i, len));
        i += len;
    }
    return cps;
}

std::vector<std::string> pretokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    size_t i = 0;
    while (i < text.size()) {
        unsigned char c = text[i];
        if (c < 0x80 && std::isspace(c)) {
            flush();
            ++i;
        } else if (c < 0x80 && is_punct_byte(c)) {
            flush();
            out.emplace_back(1, static_cast<char>(c));
            ++i;
        } else {
            size_t len = 1;
            if ((c & 0xe0) == 0xc0)
                len = 2;
            else if ((c & 0xf0) == 0xe0)
                len = 3;
            else if ((c & 0xf8) == 0xf0)
                len = 4;
            len = std::min(len, text.size() - i);
            cur.append(text.substr(i, len));
            i += len;
        }
    }
    flush();
    return out;
}

namespace {

// Symbol sequence of a pre-token: first code point plain, the rest marked.
std::vector<std::string> initial_symbols(const std::string& word) {
    auto cps = utf8_codepoints(word);
    std::vector<std::string> syms;
    syms.reserve(cps.size());
    for (size_t i = 0; i < cps.size(); ++i)
        syms.push_back(i == 0 ? cps[i] : std::string(kContinuation) + cps[i]);
    return syms;
}

std::string merge_symbols(const std::string& left, const std::string& right) {
    std::string r = right;
    if (r.rfind(kContinuation, 0) == 0) r = r.substr(kContinuation.size());
    return left + r;
}

}  // namespace

Vocab build_vocab(std::istream& corpus, int target_size, int min_freq) {
    if (target_size <= Vocab::kNumReserved)
        throw ConfigError("build_vocab: target_size must exceed the reserved token count");
    if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");

    std::map<std::string, long long> word_freq;
    std::string line;
    while (std::getline(corpus, line))
        for (auto& w : pretokenize(line)) ++word_freq[w];
    if (word_freq.empty()) throw ValueError("build_vocab: empty corpus");

    struct Entry {
        std::vector<std::string> symbols;
        long long freq;
    };
    std::vector<Entry> entries;
    entries.reserve(word_freq.size());
    std::map<std::string, long long> base_freq;
    for (const auto& [word, freq] : word_freq) {
        Entry e{initial_symbols(word), freq};
        for (const auto& s : e.symbols) base_freq[s] += freq;
        entries.push_back(std::move(e));
    }

    Vocab vocab = Vocab::with_reserved();
    int room = target_size - Vocab::kNumReserved;
    if (std::cmp_less_equal(base_freq.size(), room)) {
        for (const auto& [sym, _] : base_freq) vocab.add(sym);  // map order = lexicographic
    } else {
        // Not enough room for full character coverage: keep the most frequent
        // symbols (ties lexicographic), assign ids in lexicographic order.
        std::vector<std::pair<std::string, long long>> by_freq(base_freq.begin(), base_freq.end());
        std::stable_sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        by_freq.resize(room);
        std::sort(by_freq.begin(), by_freq.end());
        for (const auto& [sym, _] : by_freq) vocab.add(sym);
        return vocab;  // no room for merges
    }

    while (vocab.size() < target_size) {
        std::map<std::pair<std::string, std::string>, long long> pair_freq;
        for (const auto& e : entries)
            for (size_t i = 0; i + 1 < e.symbols.size(); ++i)
                pair_freq[{e.symbols[i], e.symbols[i + 1]}] += e.freq;

        // Best pair: highest count, ties broken by lexicographically smallest
        // (left, right). Map iteration is already in pair order.
        std::pair<std::string, std::string> best;
        long long best_count = 0;
        for (const auto& [pr, cnt] : pair_freq) {
            if (cnt > best_count) {
                best = pr;
                best_count = cnt;
            }
        }
        if (best_count < min_freq) break;

        std::string merged = merge_symbols(best.first, best.second);
        for (auto& e : entries) {
            std::vector<std::string> next;
            next.reserve(e.symbols.size());
            size_t i = 0;
            while (i < e.symbols.size()) {
                if (i + 1 < e.symbols.size() && e.symbols[i] == best.first &&
                    e.symbols[i + 1] == best.second) {
                    next.push_back(merged);
                    i += 2;
                } else {
                    next.push_back(e.symbols[i]);
                    ++i;
                }
            }
            e.symbols = std::move(next);
        }
        if (!vocab.contains(merged)) vocab.add(merged);
    }
    return vocab;
}

Vocab build_vocab_from_file(const std::string& path, int target_size, int min_freq) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return build_vocab(in, target_size, min_freq);
}

std::vector<int> encode(std::string_view text, const Vocab& vocab) {
    std::vector<int> ids;
    for (const auto& word : pretokenize(text)) {
        auto cps = utf8_codepoints(word);
        size_t pos = 0;
        bool first = true;
        while (pos < cps.size()) {
            int match_id = -1;
            size_t match_len = 0;
            std::string prefix = first ? "" : std::string(kContinuation);
            for (size_t take = 0; take < cps.size() - pos; ++take) prefix += cps[pos + take];
            // Longest match first: shrink the candidate from the right.
            std::string candidate = prefix;
            for (size_t take = cps.size() - pos; take >= 1; --take) {
                int id = vocab.id_of(candidate);
                if (id >= 0 && !Vocab::is_special(id)) {
                    match_id = id;
                    match_len = take;
                    break;
                }
                candidate.resize(candidate.size() - cps[pos + take - 1].size());
            }
            if (match_id >= 0) {
                ids.push_back(match_id);
                pos += match_len;
            } else {
                ids.push_back(Vocab::kUnk);
                pos += 1;
            }
            first = false;
        }
    }
    return ids;
}

std::string decode(std::span<const int> ids, const Vocab& vocab) {
    std::string out;
    for (int id : ids) {
        const std::string& tok = vocab.token_of(id);
        if (tok.rfind(kContinuation, 0) == 0 && !out.empty()) {
            out += tok.substr(kContinuation.size());
        } else {
            if (!out.empty()) out += ' ';
            out += tok;
        }
    }
    return out;
}

}  // namespace tacl
