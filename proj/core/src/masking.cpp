#include "tacl/masking.hpp"

#include <algorithm>
#include <cmath>

namespace tacl {

void MaskingRates::validate() const {
    if (select < 0.0 || select > 1.0)
        throw ConfigError("MaskingRates: select must be in [0,1]");
    if (mask < 0.0 || random_replace < 0.0 || keep < 0.0)
        throw ConfigError("MaskingRates: category rates must be non-negative");
    if (std::abs(mask + random_replace + keep - 1.0) > 1e-9)
        throw ConfigError("MaskingRates: mask+random_replace+keep must sum to 1");
}

int MaskedExample::selected_count() const {
    int n = 0;
    for (uint8_t m : mask_indicator) n += m;
    return n;
}

std::vector<uint8_t> MaskedExample::literal_mask_indicator() const {
    std::vector<uint8_t> lit(masked_ids.size(), 0);
    for (size_t i = 0; i < masked_ids.size(); ++i)
        lit[i] = (mask_indicator[i] && masked_ids[i] == Vocab::kMask) ? 1 : 0;
    return lit;
}

namespace {

bool is_maskable(int id) { return !Vocab::is_special(id); }

// Replacement category for one selected position. Draw order is fixed so
// streams are reproducible.
int replace_token(int original, Rng& rng, const MaskingRates& rates, int vocab_size) {
    double u = rng.uniform();
    if (u < rates.mask) return Vocab::kMask;
    if (u < rates.mask + rates.random_replace) {
        int n_regular = vocab_size - Vocab::kNumReserved;
        if (n_regular <= 0) throw ValueError("apply_masking: no non-special vocabulary ids");
        return Vocab::kNumReserved + rng.uniform_int(n_regular);
    }
    return original;
}

}  // namespace

MaskedExample apply_masking(const TokenSequence& seq, bool is_next, Rng& rng,
                            const MaskingRates& rates, int vocab_size) {
    rates.validate();
    size_t n = seq.ids.size();

    MaskedExample ex;
    ex.original_ids = seq.ids;
    ex.masked_ids = seq.ids;
    ex.mask_indicator.assign(n, 0);
    ex.mlm_targets.assign(n, -1);
    ex.segment_ids = seq.segment_ids;
    ex.is_next = is_next;
    ex.attention_len = static_cast<int>(n);

    int n_maskable = 0;
    for (int id : seq.ids) n_maskable += is_maskable(id) ? 1 : 0;
    if (n_maskable == 0) throw ValueError("apply_masking: sequence has no maskable token");

    int selected = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!is_maskable(seq.ids[i])) continue;
        if (!rng.bernoulli(rates.select)) continue;
        ex.mask_indicator[i] = 1;
        ex.mlm_targets[i] = seq.ids[i];
        ex.masked_ids[i] = replace_token(seq.ids[i], rng, rates, vocab_size);
        ++selected;
    }

    if (selected == 0) {
        // Force one selection: Eq-style objectives are vacuous otherwise.
        int pick = rng.uniform_int(n_maskable);
        for (size_t i = 0; i < n; ++i) {
            if (!is_maskable(seq.ids[i])) continue;
            if (pick-- != 0) continue;
            ex.mask_indicator[i] = 1;
            ex.mlm_targets[i] = seq.ids[i];
            ex.masked_ids[i] = replace_token(seq.ids[i], rng, rates, vocab_size);
            break;
        }
    }
    return ex;
}

PaddedBatch pad_batch(const std::vector<MaskedExample>& examples, int max_len) {
    if (examples.empty()) throw ValueError("pad_batch: empty batch");
    int longest = 0;
    for (const auto& ex : examples) {
        if (ex.attention_len > max_len)
            throw ValueError("pad_batch: example of length " + std::to_string(ex.attention_len) +
                             " exceeds max_len " + std::to_string(max_len));
        longest = std::max(longest, ex.attention_len);
    }

    PaddedBatch batch;
    batch.padded_len = longest;
    batch.examples = examples;
    batch.padding_mask.resize(examples.size());
    for (size_t b = 0; b < examples.size(); ++b) {
        auto& ex = batch.examples[b];
        size_t n = static_cast<size_t>(longest);
        ex.original_ids.resize(n, Vocab::kPad);
        ex.masked_ids.resize(n, Vocab::kPad);
        ex.mask_indicator.resize(n, 0);
        ex.mlm_targets.resize(n, -1);
        ex.segment_ids.resize(n, 0);
        auto& mask = batch.padding_mask[b];
        mask.assign(n, 0);
        std::fill(mask.begin(), mask.begin() + ex.attention_len, 1);
    }
    return batch;
}

}  // namespace tacl
