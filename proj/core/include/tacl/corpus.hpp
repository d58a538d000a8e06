#pragma once

#include <string>
#include <vector>

#include "tacl/common.hpp"
#include "tacl/vocab.hpp"

namespace tacl {

// Blank-line-separated documents, newline-separated sentences.
struct Document {
    std::vector<std::string> sentences;
};

std::vector<Document> load_corpus(const std::string& path);
std::vector<Document> parse_corpus(std::istream& in);

// [CLS]-initial token id sequence with {0,1} segment ids. Never contains
// [MASK] or [PAD]; padding happens at batching.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<int> segment_ids;

    int length() const { return static_cast<int>(ids.size()); }
};

// Throws ValueError when a structural invariant is violated.
void validate_token_sequence(const TokenSequence& seq, int vocab_size, int max_len);

// Single-segment sequence [CLS] sentence [SEP], truncated to max_len.
TokenSequence make_single_sequence(const std::vector<int>& sentence_ids, int max_len);

// Pre-encoded corpus: documents of sentences of token ids. Empty sentences
// and empty documents are dropped.
struct EncodedCorpus {
    std::vector<std::vector<std::vector<int>>> docs;

    static EncodedCorpus from(const std::vector<Document>& docs, const Vocab& vocab);
    size_t n_sentences() const;
    // Flat list of sentences (document order), for analysis sampling.
    std::vector<const std::vector<int>*> all_sentences() const;
};

struct NspSample {
    TokenSequence seq;
    bool is_next = false;
};

// With probability 0.5 the pair is two consecutive sentences of one document
// (is_next), otherwise the second sentence comes from a different document.
// The longer segment is truncated from the end until the total fits max_len.
// Documents too short to provide a pair are skipped and resampled; throws
// ValueError once resampling is exhausted.
NspSample make_nsp_pair(const EncodedCorpus& corpus, Rng& rng, int max_len);

}  // namespace tacl
