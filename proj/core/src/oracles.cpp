#include "tacl/oracles.hpp"

#include <cmath>

namespace tacl::oracles {

double cosine_ref(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ShapeError("cosine_ref: length mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw ValueError("cosine_ref: zero-norm vector");
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

double self_similarity_ref(const std::vector<std::vector<double>>& rows) {
    size_t n = rows.size();
    if (n < 2) throw ValueError("self_similarity_ref: need at least two rows");
    double total = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            total += cosine_ref(rows[i], rows[j]);
        }
    return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

TaclRef tacl_loss_ref(const std::vector<std::vector<double>>& student,
                      const std::vector<std::vector<double>>& teacher,
                      std::span<const uint8_t> mask_indicator,
                      std::span<const uint8_t> padding_mask, double tau, bool token_mean,
                      bool denom_include_specials, std::span<const uint8_t> special_mask) {
    size_t n = student.size();
    if (teacher.size() != n || mask_indicator.size() != n || padding_mask.size() != n)
        throw ShapeError("tacl_loss_ref: length mismatch");
    auto in_denominator = [&](size_t j) {
        if (!padding_mask[j]) return false;
        if (!denom_include_specials && !special_mask.empty() && special_mask[j]) return false;
        return true;
    };
    TaclRef ref;
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!mask_indicator[i] || !padding_mask[i]) continue;
        double numer = std::exp(cosine_ref(student[i], teacher[i]) / tau);
        double denom = 0.0;
        for (size_t j = 0; j < n; ++j)
            if (in_denominator(j)) denom += std::exp(cosine_ref(student[i], teacher[j]) / tau);
        double term = -std::log(numer / denom);
        ref.per_position_terms.push_back(term);
        sum += term;
        ref.n_selected += 1;
    }
    if (ref.n_selected == 0) throw ValueError("tacl_loss_ref: zero selected positions");
    ref.loss = token_mean ? sum / ref.n_selected : sum;
    return ref;
}

double mlm_loss_ref(const std::vector<std::vector<double>>& logits, std::span<const int> targets,
                    std::span<const uint8_t> indicator) {
    if (logits.size() != targets.size() || logits.size() != indicator.size())
        throw ShapeError("mlm_loss_ref: length mismatch");
    double sum = 0.0;
    long long count = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        if (!indicator[i]) continue;
        double denom = 0.0;
        for (double z : logits[i]) denom += std::exp(z);
        sum += -std::log(std::exp(logits[i][static_cast<size_t>(targets[i])]) / denom);
        ++count;
    }
    if (count == 0) throw ValueError("mlm_loss_ref: zero selected positions");
    return sum / static_cast<double>(count);
}

double sent_cl_ref(const std::vector<std::vector<double>>& view1,
                   const std::vector<std::vector<double>>& view2, double tau) {
    size_t b = view1.size();
    if (view2.size() != b) throw ShapeError("sent_cl_ref: batch mismatch");
    if (b < 2) throw ValueError("sent_cl_ref: batch size must be >= 2");
    auto direction = [&](const std::vector<std::vector<double>>& a,
                         const std::vector<std::vector<double>>& c) {
        double sum = 0.0;
        for (size_t i = 0; i < b; ++i) {
            double numer = std::exp(cosine_ref(a[i], c[i]) / tau);
            double denom = 0.0;
            for (size_t j = 0; j < b; ++j) denom += std::exp(cosine_ref(a[i], c[j]) / tau);
            sum += -std::log(numer / denom);
        }
        return sum / static_cast<double>(b);
    };
    return 0.5 * (direction(view1, view2) + direction(view2, view1));
}

MaskingStats run_masking_stats(long long min_maskable, int seq_len, uint64_t seed,
                               const MaskingRates& rates, int vocab_size) {
    if (seq_len < 3) throw ValueError("run_masking_stats: seq_len too small");
    MaskingStats stats;
    Rng seq_rng = Rng::derive(seed, "stats-seq");
    uint64_t draw = 0;
    while (stats.maskable < min_maskable) {
        TokenSequence seq;
        seq.ids.push_back(Vocab::kCls);
        for (int i = 0; i < seq_len - 2; ++i)
            seq.ids.push_back(Vocab::kNumReserved +
                              seq_rng.uniform_int(vocab_size - Vocab::kNumReserved));
        seq.ids.push_back(Vocab::kSep);
        seq.segment_ids.assign(seq.ids.size(), 0);

        Rng mask_rng = Rng::derive(seed, "stats-mask", draw++);
        MaskedExample ex = apply_masking(seq, false, mask_rng, rates, vocab_size);
        for (size_t i = 0; i < ex.original_ids.size(); ++i) {
            bool special = Vocab::is_special(ex.original_ids[i]);
            if (special) {
                stats.special_selected += ex.mask_indicator[i];
                continue;
            }
            stats.maskable += 1;
            if (!ex.mask_indicator[i]) continue;
            stats.selected += 1;
            if (ex.masked_ids[i] == Vocab::kMask)
                stats.to_mask += 1;
            else if (ex.masked_ids[i] == ex.original_ids[i])
                stats.to_keep += 1;
            else
                stats.to_random += 1;
        }
    }
    return stats;
}

}  // namespace tacl::oracles
