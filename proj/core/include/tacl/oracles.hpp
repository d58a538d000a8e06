#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tacl/masking.hpp"

namespace tacl::oracles {

// Brute-force reference implementations of the losses and metrics, written
// as literal transcriptions of their defining formulas (plain exp sums, no
// log-sum-exp or matrix reformulation). They share no code with the graph
// ops and exist so `selftest` and the test suites can cross-check the
// production path.

double cosine_ref(std::span<const double> u, std::span<const double> v);

// s(x) = 1/(n(n-1)) * sum_i sum_{j != i} cosine(h_i, h_j)
double self_similarity_ref(const std::vector<std::vector<double>>& rows);

struct TaclRef {
    double loss = 0.0;                       // after requested normalization
    std::vector<double> per_position_terms;  // one entry per selected position
    int n_selected = 0;
};

// Double loop over selected positions i and denominator positions j.
TaclRef tacl_loss_ref(const std::vector<std::vector<double>>& student,
                      const std::vector<std::vector<double>>& teacher,
                      std::span<const uint8_t> mask_indicator,
                      std::span<const uint8_t> padding_mask, double tau, bool token_mean,
                      bool denom_include_specials = true,
                      std::span<const uint8_t> special_mask = {});

// Mean cross-entropy over indicated positions, one explicit loop per row.
double mlm_loss_ref(const std::vector<std::vector<double>>& logits,
                    std::span<const int> targets, std::span<const uint8_t> indicator);

// Symmetric in-batch InfoNCE over two views of pooled states.
double sent_cl_ref(const std::vector<std::vector<double>>& view1,
                   const std::vector<std::vector<double>>& view2, double tau);

struct MaskingStats {
    long long maskable = 0;
    long long selected = 0;
    long long to_mask = 0;
    long long to_random = 0;
    long long to_keep = 0;
    long long special_selected = 0;

    double selection_rate() const { return double(selected) / double(maskable); }
    double mask_fraction() const { return double(to_mask) / double(selected); }
    double random_fraction() const { return double(to_random) / double(selected); }
    double keep_fraction() const { return double(to_keep) / double(selected); }
};

// Applies the masking procedure to synthetic sequences until at least
// min_maskable non-special tokens have been processed and tallies outcomes.
// Random replacements that happen to redraw the original id are counted as
// "keep"; with a realistic vocabulary this shifts the split by O(1/vocab).
MaskingStats run_masking_stats(long long min_maskable, int seq_len, uint64_t seed,
                               const MaskingRates& rates, int vocab_size);

}  // namespace tacl::oracles
