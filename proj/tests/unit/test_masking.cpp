#include <doctest.h>

#include "tacl/masking.hpp"
#include "tacl/oracles.hpp"

using namespace tacl;

namespace {
TokenSequence plain_sequence(int n_regular, int vocab_size, uint64_t seed) {
    Rng rng(seed);
    TokenSequence seq;
    seq.ids.push_back(Vocab::kCls);
    for (int i = 0; i < n_regular; ++i)
        seq.ids.push_back(Vocab::kNumReserved +
                          rng.uniform_int(vocab_size - Vocab::kNumReserved));
    seq.ids.push_back(Vocab::kSep);
    seq.segment_ids.assign(seq.ids.size(), 0);
    return seq;
}
}  // namespace

TEST_CASE("selection rate and category split over many tokens") {
    // the full 10^6-token version runs in the acceptance suite
    MaskingRates rates;
    auto stats = oracles::run_masking_stats(200000, 62, 42, rates, 1000);
    CHECK(stats.special_selected == 0);
    CHECK(std::abs(stats.selection_rate() - 0.15) < 0.004);
    CHECK(std::abs(stats.mask_fraction() - 0.80) < 0.01);
    CHECK(std::abs(stats.random_fraction() - 0.10) < 0.01);
    CHECK(std::abs(stats.keep_fraction() - 0.10) < 0.01);
}

TEST_CASE("boundary rates (1,1,0,0): every non-special token becomes [MASK]") {
    auto seq = plain_sequence(20, 100, 7);
    MaskingRates rates{1.0, 1.0, 0.0, 0.0};
    Rng rng(9);
    auto ex = apply_masking(seq, true, rng, rates, 100);
    for (size_t i = 0; i < ex.masked_ids.size(); ++i) {
        if (Vocab::is_special(ex.original_ids[i])) {
            CHECK(ex.mask_indicator[i] == 0);
            CHECK(ex.masked_ids[i] == ex.original_ids[i]);
        } else {
            CHECK(ex.mask_indicator[i] == 1);
            CHECK(ex.masked_ids[i] == Vocab::kMask);
            CHECK(ex.mlm_targets[i] == ex.original_ids[i]);
        }
    }
}

TEST_CASE("[CLS]/[SEP] positions carry indicator 0 in every draw") {
    auto seq = plain_sequence(10, 50, 3);
    MaskingRates rates;
    for (uint64_t s = 0; s < 300; ++s) {
        Rng rng(s);
        auto ex = apply_masking(seq, false, rng, rates, 50);
        CHECK(ex.mask_indicator.front() == 0);
        CHECK(ex.mask_indicator.back() == 0);
    }
}

TEST_CASE("keep-category positions still carry indicator 1") {
    auto seq = plain_sequence(30, 80, 11);
    MaskingRates rates{1.0, 0.0, 0.0, 1.0};  // select everything, keep everything
    Rng rng(13);
    auto ex = apply_masking(seq, false, rng, rates, 80);
    for (size_t i = 0; i < ex.masked_ids.size(); ++i) {
        if (Vocab::is_special(ex.original_ids[i])) continue;
        CHECK(ex.mask_indicator[i] == 1);
        CHECK(ex.masked_ids[i] == ex.original_ids[i]);  // literal token unchanged
        CHECK(ex.mlm_targets[i] == ex.original_ids[i]);
    }
    // literal-[MASK] indicator view is empty in this configuration
    auto lit = ex.literal_mask_indicator();
    for (uint8_t v : lit) CHECK(v == 0);
}

TEST_CASE("apply_masking never alters original_ids") {
    auto seq = plain_sequence(25, 60, 5);
    MaskingRates rates;
    Rng rng(77);
    auto ex = apply_masking(seq, true, rng, rates, 60);
    CHECK(ex.original_ids == seq.ids);
    CHECK(ex.is_next);
    CHECK(ex.attention_len == seq.length());
}

TEST_CASE("very short sequences force exactly one selection") {
    auto seq = plain_sequence(1, 30, 2);
    MaskingRates rates{0.0, 0.8, 0.1, 0.1};  // selection never fires on its own
    Rng rng(21);
    auto ex = apply_masking(seq, false, rng, rates, 30);
    CHECK(ex.selected_count() == 1);
    CHECK(ex.mask_indicator[1] == 1);
}

TEST_CASE("a sequence with no maskable token is an error") {
    TokenSequence seq;
    seq.ids = {Vocab::kCls, Vocab::kSep};
    seq.segment_ids = {0, 0};
    MaskingRates rates;
    Rng rng(1);
    CHECK_THROWS_AS(apply_masking(seq, false, rng, rates, 30), ValueError);
}

TEST_CASE("masking is deterministic under a fixed seed") {
    auto seq = plain_sequence(40, 90, 8);
    MaskingRates rates;
    auto draw = [&](uint64_t seed) {
        Rng rng(seed);
        return apply_masking(seq, false, rng, rates, 90);
    };
    auto a = draw(5), b = draw(5), c = draw(6);
    CHECK(a.masked_ids == b.masked_ids);
    CHECK(a.mask_indicator == b.mask_indicator);
    CHECK(a.masked_ids != c.masked_ids);
}

TEST_CASE("pad_batch pads right, masks pads, rejects overlong examples") {
    MaskingRates rates;
    auto short_seq = plain_sequence(1, 30, 1);  // length 3
    auto long_seq = plain_sequence(3, 30, 2);   // length 5
    Rng rng(3);
    auto ex1 = apply_masking(short_seq, false, rng, rates, 30);
    auto ex2 = apply_masking(long_seq, true, rng, rates, 30);

    auto batch = pad_batch({ex1, ex2}, 5);
    CHECK(batch.padded_len == 5);
    CHECK(batch.examples[0].masked_ids.size() == 5);
    CHECK(batch.examples[0].masked_ids[3] == Vocab::kPad);
    CHECK(batch.examples[0].masked_ids[4] == Vocab::kPad);
    CHECK(batch.padding_mask[0] == std::vector<uint8_t>{1, 1, 1, 0, 0});
    CHECK(batch.padding_mask[1] == std::vector<uint8_t>{1, 1, 1, 1, 1});
    // an exactly-max_len example gains no padding
    auto solo = pad_batch({ex2}, 5);
    CHECK(solo.padded_len == 5);
    CHECK(solo.examples[0].masked_ids == ex2.masked_ids);

    CHECK_THROWS_AS(pad_batch({ex2}, 4), ValueError);
}
