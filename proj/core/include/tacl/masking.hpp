#pragma once

#include <cstdint>
#include <vector>

#include "tacl/common.hpp"
#include "tacl/corpus.hpp"

namespace tacl {

// Selection and replacement rates of the masking procedure. Defaults follow
// the 15% / 80-10-10 convention.
struct MaskingRates {
    double select = 0.15;
    double mask = 0.80;
    double random_replace = 0.10;
    double keep = 0.10;

    void validate() const;
};

// One masked training example. mask_indicator marks positions selected for
// prediction — including the "random" and "keep" replacement categories, not
// just literal [MASK] tokens. original_ids is the untouched teacher input.
struct MaskedExample {
    std::vector<int> original_ids;
    std::vector<int> masked_ids;
    std::vector<uint8_t> mask_indicator;
    std::vector<int> mlm_targets;  // original id where selected, -1 elsewhere
    std::vector<int> segment_ids;
    bool is_next = false;
    int attention_len = 0;  // length before padding

    int selected_count() const;
    // Positions whose replacement was a literal [MASK] token.
    std::vector<uint8_t> literal_mask_indicator() const;
};

// Per-position independent selection among non-special tokens. If the draw
// selects nothing, one uniformly chosen non-special position is forced so the
// example always carries a prediction target. Throws ValueError when the
// sequence has no non-special token at all.
MaskedExample apply_masking(const TokenSequence& seq, bool is_next, Rng& rng,
                            const MaskingRates& rates, int vocab_size);

// Right-padded batch plus the padding mask (1 = real position). [PAD] rows
// are excluded from attention, MLM targets, contrastive sums and analysis.
struct PaddedBatch {
    int padded_len = 0;
    std::vector<MaskedExample> examples;
    std::vector<std::vector<uint8_t>> padding_mask;
};

PaddedBatch pad_batch(const std::vector<MaskedExample>& examples, int max_len);

}  // namespace tacl
