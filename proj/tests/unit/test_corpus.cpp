#include <doctest.h>

#include <sstream>

#include "tacl/corpus.hpp"

using namespace tacl;

namespace {
EncodedCorpus tiny_corpus(int docs, int sentences_per_doc, int words_per_sentence,
                          Vocab& vocab_out) {
    std::ostringstream text;
    const char* words[] = {"red", "blue", "green", "stone", "river", "cloud", "lamp", "gate"};
    Rng rng(3);
    for (int d = 0; d < docs; ++d) {
        for (int s = 0; s < sentences_per_doc; ++s) {
            for (int w = 0; w < words_per_sentence; ++w) {
                if (w) text << ' ';
                text << words[rng.uniform_int(8)];
            }
            text << '\n';
        }
        text << '\n';
    }
    std::istringstream vocab_stream(text.str());
    vocab_out = build_vocab(vocab_stream, 64, 1);
    std::istringstream corpus_stream(text.str());
    auto docs_parsed = parse_corpus(corpus_stream);
    return EncodedCorpus::from(docs_parsed, vocab_out);
}
}  // namespace

TEST_CASE("corpus parsing: blank-line documents, newline sentences") {
    std::istringstream in("a b\nc d\n\n\ne f\n");
    auto docs = parse_corpus(in);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].sentences.size() == 2);
    CHECK(docs[1].sentences.size() == 1);
    CHECK(docs[0].sentences[1] == "c d");
}

TEST_CASE("nsp pairs: empirical is_next rate over many draws") {
    Vocab vocab;
    auto corpus = tiny_corpus(12, 6, 5, vocab);
    Rng rng(13);
    int draws = 100000, next = 0;
    for (int i = 0; i < draws; ++i) next += make_nsp_pair(corpus, rng, 64).is_next ? 1 : 0;
    double rate = double(next) / draws;
    CHECK(std::abs(rate - 0.5) < 0.01);
}

TEST_CASE("nsp pairs satisfy the token sequence invariants") {
    Vocab vocab;
    auto corpus = tiny_corpus(8, 5, 6, vocab);
    Rng rng(17);
    for (int i = 0; i < 500; ++i) {
        auto sample = make_nsp_pair(corpus, rng, 32);
        CHECK_NOTHROW(validate_token_sequence(sample.seq, vocab.size(), 32));
        // exactly two [SEP]s, one terminal
        int seps = 0;
        for (int id : sample.seq.ids) seps += id == Vocab::kSep ? 1 : 0;
        CHECK(seps == 2);
    }
}

TEST_CASE("degenerate corpus: one-sentence documents exhaust resampling") {
    Vocab vocab = Vocab::with_reserved();
    for (const char* t : {"q", "w"}) vocab.add(t);
    EncodedCorpus corpus;
    corpus.docs = {{{5}}, {{6}}};  // two docs, one sentence each
    Rng rng(1);
    CHECK_THROWS_AS(make_nsp_pair(corpus, rng, 32), ValueError);
}

TEST_CASE("overlong pairs truncate the longer segment, preserving [SEP]s") {
    Vocab vocab = Vocab::with_reserved();
    for (int i = 0; i < 10; ++i) vocab.add("tok" + std::to_string(i));
    EncodedCorpus corpus;
    std::vector<int> long_sentence, short_sentence{5, 6, 7};
    for (int i = 0; i < 40; ++i) long_sentence.push_back(5 + (i % 10));
    corpus.docs = {{long_sentence, long_sentence}, {short_sentence, short_sentence}};

    Rng rng(5);
    int max_len = 16;
    for (int i = 0; i < 200; ++i) {
        auto sample = make_nsp_pair(corpus, rng, max_len);
        CHECK(sample.seq.length() <= max_len);
        if (sample.seq.length() == max_len) {
            CHECK(sample.seq.ids.front() == Vocab::kCls);
            CHECK(sample.seq.ids.back() == Vocab::kSep);
            // the mid [SEP] sits exactly where segment ids flip
            for (size_t p = 1; p < sample.seq.ids.size(); ++p)
                if (sample.seq.segment_ids[p] == 1 && sample.seq.segment_ids[p - 1] == 0)
                    CHECK(sample.seq.ids[p - 1] == Vocab::kSep);
        }
    }
}

TEST_CASE("pair generation is deterministic under a fixed seed") {
    Vocab vocab;
    auto corpus = tiny_corpus(6, 4, 5, vocab);
    auto draw = [&](uint64_t seed) {
        Rng rng(seed);
        std::vector<int> flat;
        for (int i = 0; i < 50; ++i) {
            auto s = make_nsp_pair(corpus, rng, 48);
            flat.insert(flat.end(), s.seq.ids.begin(), s.seq.ids.end());
            flat.push_back(s.is_next ? 1 : 0);
        }
        return flat;
    };
    CHECK(draw(21) == draw(21));
    CHECK(draw(21) != draw(22));
}

TEST_CASE("single-sequence builder truncates and validates") {
    std::vector<int> ids;
    for (int i = 0; i < 50; ++i) ids.push_back(5);
    auto seq = make_single_sequence(ids, 16);
    CHECK(seq.length() == 16);
    CHECK(seq.ids.front() == Vocab::kCls);
    CHECK(seq.ids.back() == Vocab::kSep);
    CHECK_NOTHROW(validate_token_sequence(seq, 6, 16));
}
