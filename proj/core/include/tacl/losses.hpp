#pragma once

#include <optional>
#include <string>

#include "tacl/masking.hpp"
#include "tacl/ops.hpp"

namespace tacl {

struct LossConfig {
    double tau = 0.01;

    bool mlm = true;
    bool nsp = true;
    bool tacl = false;
    bool sent_cl = false;

    double w_mlm = 1.0;
    double w_nsp = 1.0;
    double w_tacl = 1.0;
    double w_sent_cl = 1.0;

    // Sum over selected positions divided by their count; false restores the
    // raw per-sequence sum.
    bool tacl_token_mean = true;
    // Count only literal [MASK] replacements as selected, instead of the full
    // selection (mask/random/keep).
    bool tacl_literal_mask_only = false;
    // [CLS]/[SEP] participate in the denominator as negatives; [PAD] never does.
    bool tacl_denom_include_specials = true;

    void validate() const {
        if (tau <= 0.0) throw ConfigError("LossConfig: tau must be positive");
        if (!(mlm || nsp || tacl || sent_cl))
            throw ConfigError("LossConfig: at least one term must be enabled");
    }
};

// Scalar loss with the weight (position count or row count) that went into
// its normalization; lets the trainer combine per-example sums into one
// batch-level token mean.
template <typename T>
struct WeightedLoss {
    Tensor<T> sum;  // un-normalized
    double weight = 0.0;
};

// ---- MLM -------------------------------------------------------------------

template <typename T>
WeightedLoss<T> mlm_loss_sum(Graph<T>& g, Tensor<T> logits, std::span<const int> mlm_targets,
                             std::span<const uint8_t> mask_indicator) {
    if (logits.rank() != 2 || logits.extent(0) != mask_indicator.size() ||
        mlm_targets.size() != mask_indicator.size())
        throw ShapeError("mlm_loss: logits rows must match targets/indicator length");
    std::vector<T> weights(mask_indicator.size());
    double total = 0.0;
    for (size_t i = 0; i < mask_indicator.size(); ++i) {
        weights[i] = mask_indicator[i] ? T(1) : T(0);
        total += mask_indicator[i] ? 1.0 : 0.0;
    }
    return {cross_entropy(g, logits, mlm_targets, std::span<const T>(weights), /*mean=*/false),
            total};
}

// Mean cross-entropy over the selected positions only.
template <typename T>
Tensor<T> mlm_loss(Graph<T>& g, Tensor<T> logits, std::span<const int> mlm_targets,
                   std::span<const uint8_t> mask_indicator) {
    auto wl = mlm_loss_sum(g, logits, mlm_targets, mask_indicator);
    return scale(g, wl.sum, static_cast<T>(1.0 / wl.weight));
}

// ---- NSP -------------------------------------------------------------------

// Two-way cross-entropy; class 0 is "is next".
template <typename T>
Tensor<T> nsp_loss(Graph<T>& g, Tensor<T> logits, bool is_next) {
    if (logits.rank() != 2 || logits.extent(0) != 1 || logits.extent(1) != 2)
        throw ShapeError("nsp_loss: expected (1,2) logits");
    int target[1] = {is_next ? 0 : 1};
    T weight[1] = {T(1)};
    return cross_entropy(g, logits, std::span<const int>(target), std::span<const T>(weight),
                         /*mean=*/true);
}

// ---- TaCL ------------------------------------------------------------------

struct TaclOptions {
    double tau = 0.01;
    bool denom_include_specials = true;

    static TaclOptions from(const LossConfig& cfg) {
        return {cfg.tau, cfg.tacl_denom_include_specials};
    }
};

// Sum over selected positions of the in-sequence InfoNCE term: the positive
// is the teacher state at the same position, negatives are the teacher states
// of the other non-[PAD] positions. Gradient flows only into student_final.
template <typename T>
WeightedLoss<T> tacl_loss_sum(Graph<T>& g, Tensor<T> student_final, Tensor<T> teacher_final,
                              std::span<const uint8_t> mask_indicator,
                              std::span<const uint8_t> padding_mask, const TaclOptions& opt,
                              std::span<const uint8_t> special_mask = {}) {
    if (opt.tau <= 0.0) throw ConfigError("tacl_loss: tau must be positive");
    if (student_final.rank() != 2 || teacher_final.rank() != 2 ||
        student_final.shape() != teacher_final.shape())
        throw ShapeError("tacl_loss: student/teacher shapes disagree");
    size_t n = student_final.extent(0);
    if (mask_indicator.size() != n || padding_mask.size() != n)
        throw ShapeError("tacl_loss: indicator/padding mask length mismatch");
    if (teacher_final.requires_grad())
        throw ValueError("tacl_loss: teacher representations must be detached");
    if (!opt.denom_include_specials && special_mask.size() != n)
        throw ShapeError("tacl_loss: special_mask required to exclude specials");

    auto s_hat = row_l2_normalize(g, student_final);
    auto t_hat = row_l2_normalize(g, teacher_final);
    auto sims = scale(g, matmul(g, s_hat, transpose(g, t_hat)), static_cast<T>(1.0 / opt.tau));

    // Columns excluded from the denominator get -1e9; after max subtraction
    // their exp underflows to exactly 0.
    std::vector<T> col_bias(n, T(0));
    for (size_t j = 0; j < n; ++j) {
        bool keep = padding_mask[j] != 0;
        if (keep && !opt.denom_include_specials && special_mask[j]) keep = false;
        if (!keep) col_bias[j] = T(-1e9);
    }
    sims = add_row_broadcast(g, sims, Tensor<T>::from_data({n}, std::move(col_bias)));

    std::vector<int> targets(n);
    std::vector<T> weights(n);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        targets[i] = static_cast<int>(i);
        bool sel = mask_indicator[i] && padding_mask[i];
        weights[i] = sel ? T(1) : T(0);
        total += sel ? 1.0 : 0.0;
    }
    if (total == 0.0) throw ValueError("tacl_loss: zero selected positions");
    return {cross_entropy(g, sims, std::span<const int>(targets), std::span<const T>(weights),
                          /*mean=*/false),
            total};
}

template <typename T>
Tensor<T> tacl_loss(Graph<T>& g, Tensor<T> student_final, Tensor<T> teacher_final,
                    std::span<const uint8_t> mask_indicator,
                    std::span<const uint8_t> padding_mask, const TaclOptions& opt,
                    bool token_mean = true, std::span<const uint8_t> special_mask = {}) {
    auto wl = tacl_loss_sum(g, student_final, teacher_final, mask_indicator, padding_mask, opt,
                            special_mask);
    if (!token_mean) return wl.sum;
    return scale(g, wl.sum, static_cast<T>(1.0 / wl.weight));
}

// ---- sentence-level contrastive (ablation model-1) --------------------------

// Symmetric in-batch InfoNCE over the [CLS]/pooled states of two views:
// view1[i] is positive with view2[i], negatives are the other batch rows;
// averaged over both directions.
template <typename T>
Tensor<T> sent_cl_loss(Graph<T>& g, Tensor<T> view1, Tensor<T> view2, double tau) {
    if (tau <= 0.0) throw ConfigError("sent_cl_loss: tau must be positive");
    if (view1.rank() != 2 || view2.rank() != 2 || view1.shape() != view2.shape())
        throw ShapeError("sent_cl_loss: view shapes disagree");
    size_t b = view1.extent(0);
    if (b < 2) throw ValueError("sent_cl_loss: batch size must be >= 2");

    auto a_hat = row_l2_normalize(g, view1);
    auto b_hat = row_l2_normalize(g, view2);
    auto sims = scale(g, matmul(g, a_hat, transpose(g, b_hat)), static_cast<T>(1.0 / tau));

    std::vector<int> targets(b);
    std::vector<T> weights(b, T(1));
    for (size_t i = 0; i < b; ++i) targets[i] = static_cast<int>(i);
    auto fwd = cross_entropy(g, sims, std::span<const int>(targets), std::span<const T>(weights),
                             /*mean=*/true);
    auto bwd = cross_entropy(g, transpose(g, sims), std::span<const int>(targets),
                             std::span<const T>(weights), /*mean=*/true);
    return scale(g, add(g, fwd, bwd), T(0.5));
}

// ---- composite ---------------------------------------------------------------

template <typename T>
struct LossTerms {
    std::optional<Tensor<T>> mlm, nsp, tacl, sent_cl;
};

struct LossBreakdown {
    std::optional<double> mlm, nsp, tacl, sent_cl;
    double total = 0.0;
};

// Weighted sum of the enabled terms, fixed order mlm, nsp, tacl, sent_cl.
template <typename T>
std::pair<Tensor<T>, LossBreakdown> total_loss(Graph<T>& g, const LossTerms<T>& terms,
                                               const LossConfig& cfg) {
    cfg.validate();
    LossBreakdown bd;
    Tensor<T> total;
    auto accumulate = [&](bool enabled, const std::optional<Tensor<T>>& term, double weight,
                          std::optional<double>& out, const char* name) {
        if (!enabled) {
            if (term) throw ValueError(std::string("total_loss: term '") + name + "' not enabled");
            return;
        }
        if (!term) throw ValueError(std::string("total_loss: missing enabled term '") + name + "'");
        out = static_cast<double>(term->value());
        Tensor<T> weighted = scale(g, *term, static_cast<T>(weight));
        total = total.defined() ? add(g, total, weighted) : weighted;
    };
    accumulate(cfg.mlm, terms.mlm, cfg.w_mlm, bd.mlm, "mlm");
    accumulate(cfg.nsp, terms.nsp, cfg.w_nsp, bd.nsp, "nsp");
    accumulate(cfg.tacl, terms.tacl, cfg.w_tacl, bd.tacl, "tacl");
    accumulate(cfg.sent_cl, terms.sent_cl, cfg.w_sent_cl, bd.sent_cl, "sent_cl");
    bd.total = static_cast<double>(total.value());
    return {total, bd};
}

}  // namespace tacl
