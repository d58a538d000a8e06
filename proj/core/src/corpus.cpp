#include "tacl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace tacl {

namespace {
bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}
}  // namespace

std::vector<Document> parse_corpus(std::istream& in) {
    std::vector<Document> docs;
    Document cur;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (blank(line)) {
            if (!cur.sentences.empty()) docs.push_back(std::move(cur));
            cur = Document{};
        } else {
            cur.sentences.push_back(line);
        }
    }
    if (!cur.sentences.empty()) docs.push_back(std::move(cur));
    return docs;
}

std::vector<Document> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path);
    return parse_corpus(in);
}

void validate_token_sequence(const TokenSequence& seq, int vocab_size, int max_len) {
    const auto& ids = seq.ids;
    if (ids.empty() || ids.front() != Vocab::kCls)
        throw ValueError("TokenSequence: must begin with [CLS]");
    if (seq.length() > max_len)
        throw ValueError("TokenSequence: length " + std::to_string(seq.length()) + " exceeds " +
                         std::to_string(max_len));
    if (seq.segment_ids.size() != ids.size())
        throw ValueError("TokenSequence: segment ids length mismatch");
    if (ids.back() != Vocab::kSep) throw ValueError("TokenSequence: must end with [SEP]");
    int seg = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || id >= vocab_size)
            throw ValueError("TokenSequence: id out of range: " + std::to_string(id));
        if (id == Vocab::kMask || id == Vocab::kPad)
            throw ValueError("TokenSequence: contains [MASK]/[PAD]");
        int s = seq.segment_ids[i];
        if (s != 0 && s != 1) throw ValueError("TokenSequence: segment id not in {0,1}");
        if (s < seg) throw ValueError("TokenSequence: segment ids must be non-decreasing");
        if (s > seg) {
            if (i == 0 || ids[i - 1] != Vocab::kSep)
                throw ValueError("TokenSequence: segments must be separated by [SEP]");
            seg = s;
        }
    }
}

TokenSequence make_single_sequence(const std::vector<int>& sentence_ids, int max_len) {
    if (max_len < 3) throw ValueError("make_single_sequence: max_len too small");
    size_t keep = std::min(sentence_ids.size(), static_cast<size_t>(max_len - 2));
    TokenSequence seq;
    seq.ids.push_back(Vocab::kCls);
    seq.ids.insert(seq.ids.end(), sentence_ids.begin(), sentence_ids.begin() + keep);
    seq.ids.push_back(Vocab::kSep);
    seq.segment_ids.assign(seq.ids.size(), 0);
    return seq;
}

EncodedCorpus EncodedCorpus::from(const std::vector<Document>& docs, const Vocab& vocab) {
    EncodedCorpus ec;
    for (const auto& doc : docs) {
        std::vector<std::vector<int>> enc;
        for (const auto& s : doc.sentences) {
            auto ids = encode(s, vocab);
            if (!ids.empty()) enc.push_back(std::move(ids));
        }
        if (!enc.empty()) ec.docs.push_back(std::move(enc));
    }
    return ec;
}

size_t EncodedCorpus::n_sentences() const {
    size_t n = 0;
    for (const auto& d : docs) n += d.size();
    return n;
}

std::vector<const std::vector<int>*> EncodedCorpus::all_sentences() const {
    std::vector<const std::vector<int>*> out;
    out.reserve(n_sentences());
    for (const auto& d : docs)
        for (const auto& s : d) out.push_back(&s);
    return out;
}

NspSample make_nsp_pair(const EncodedCorpus& corpus, Rng& rng, int max_len) {
    if (corpus.docs.size() < 2)
        throw ValueError("make_nsp_pair: need at least two documents");
    if (max_len < 8) throw ValueError("make_nsp_pair: max_len too small");
    int n_docs = static_cast<int>(corpus.docs.size());

    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        int a = rng.uniform_int(n_docs);
        const auto& doc = corpus.docs[a];
        if (doc.size() < 2) continue;  // document too short: skip and resample
        int s = rng.uniform_int(static_cast<int>(doc.size()) - 1);
        bool is_next = rng.bernoulli(0.5);

        std::vector<int> first = doc[s];
        std::vector<int> second;
        if (is_next) {
            second = doc[s + 1];
        } else {
            int b = rng.uniform_int(n_docs - 1);
            if (b >= a) ++b;
            const auto& other = corpus.docs[b];
            second = other[rng.uniform_int(static_cast<int>(other.size()))];
        }

        while (static_cast<int>(first.size() + second.size()) > max_len - 3) {
            auto& longer = first.size() > second.size() ? first : second;
            longer.pop_back();
        }
        if (first.empty() || second.empty()) continue;

        NspSample sample;
        sample.is_next = is_next;
        auto& seq = sample.seq;
        seq.ids.push_back(Vocab::kCls);
        seq.ids.insert(seq.ids.end(), first.begin(), first.end());
        seq.ids.push_back(Vocab::kSep);
        size_t seg0 = seq.ids.size();
        seq.ids.insert(seq.ids.end(), second.begin(), second.end());
        seq.ids.push_back(Vocab::kSep);
        seq.segment_ids.assign(seg0, 0);
        seq.segment_ids.resize(seq.ids.size(), 1);
        return sample;
    }
    throw ValueError("make_nsp_pair: resampling exhausted (no document can provide a pair)");
}

}  // namespace tacl
