#pragma once

// Template bodies for the encoder forward pass and heads. Included at the end
// of model.hpp; not meant for direct inclusion.

#include <cmath>

namespace tacl {

namespace detail {

template <typename T>
Tensor<T> maybe_dropout(Graph<T>& g, Tensor<T> x, const ModelConfig& cfg, Mode mode, Rng* rng) {
    if (mode != Mode::train || cfg.dropout_p == 0.0) return x;
    if (!rng) throw ValueError("encoder_forward: train mode with dropout needs an RNG");
    return dropout(g, x, static_cast<T>(cfg.dropout_p), *rng);
}

}  // namespace detail

template <typename T>
EncoderActivations<T> encoder_forward(Graph<T>& g, const ModelParams<T>& params,
                                      const ModelConfig& cfg, std::span<const int> ids,
                                      std::span<const int> segment_ids,
                                      std::span<const uint8_t> padding_mask, Mode mode,
                                      Rng* dropout_rng, std::span<const int> position_ids) {
    size_t n = ids.size();
    if (n == 0) throw ValueError("encoder_forward: empty input");
    if (n > static_cast<size_t>(cfg.max_len))
        throw ValueError("encoder_forward: sequence longer than max_len");
    if (segment_ids.size() != n || padding_mask.size() != n)
        throw ShapeError("encoder_forward: ids/segments/mask lengths disagree");
    std::vector<int> default_positions;
    if (position_ids.empty()) {
        default_positions.resize(n);
        for (size_t i = 0; i < n; ++i) default_positions[i] = static_cast<int>(i);
        position_ids = default_positions;
    } else if (position_ids.size() != n) {
        throw ShapeError("encoder_forward: position_ids length mismatch");
    }
    for (int s : segment_ids)
        if (s != 0 && s != 1) throw ValueError("encoder_forward: segment id not in {0,1}");

    const T eps = static_cast<T>(cfg.ln_eps);
    size_t d = static_cast<size_t>(cfg.d_model);
    size_t n_heads = static_cast<size_t>(cfg.n_heads);
    size_t dh = d / n_heads;

    // Additive attention bias: 0 on real positions, -1e9 on [PAD] columns.
    // exp(-1e9 - max) underflows to exactly 0, so padded keys get weight 0.
    std::vector<T> bias_v(n, T(0));
    for (size_t j = 0; j < n; ++j)
        if (!padding_mask[j]) bias_v[j] = T(-1e9);
    Tensor<T> mask_bias = Tensor<T>::from_data({n}, std::move(bias_v));

    EncoderActivations<T> acts;

    Tensor<T> x;
    {
        auto tok = embedding_lookup(g, params.at("embed.token"), ids);
        auto pos = embedding_lookup(g, params.at("embed.position"), position_ids);
        auto seg = embedding_lookup(g, params.at("embed.segment"), segment_ids);
        x = add(g, add(g, tok, pos), seg);
        x = layer_norm(g, x, params.at("embed.ln.gain"), params.at("embed.ln.bias"), eps);
        x = detail::maybe_dropout(g, x, cfg, mode, dropout_rng);
    }
    acts.hidden.push_back(x);

    char lname[32];
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto pname = [&](const char* suffix) {
            std::snprintf(lname, sizeof(lname), "layer.%02d.%s", l, suffix);
            return std::string(lname);
        };
        auto q = add_row_broadcast(g, matmul(g, x, params.at(pname("attn.wq"))),
                                   params.at(pname("attn.bq")));
        auto k = add_row_broadcast(g, matmul(g, x, params.at(pname("attn.wk"))),
                                   params.at(pname("attn.bk")));
        auto v = add_row_broadcast(g, matmul(g, x, params.at(pname("attn.wv"))),
                                   params.at(pname("attn.bv")));

        std::vector<Tensor<T>> head_ctx;
        head_ctx.reserve(n_heads);
        for (size_t h = 0; h < n_heads; ++h) {
            auto qh = col_slice(g, q, h * dh, dh);
            auto kh = col_slice(g, k, h * dh, dh);
            auto vh = col_slice(g, v, h * dh, dh);
            auto scores = scale(g, matmul(g, qh, transpose(g, kh)),
                                static_cast<T>(1.0 / std::sqrt(double(dh))));
            scores = add_row_broadcast(g, scores, mask_bias);
            auto probs = softmax(g, scores, 1);
            probs = detail::maybe_dropout(g, probs, cfg, mode, dropout_rng);
            head_ctx.push_back(matmul(g, probs, vh));
        }
        auto ctx = concat_cols(g, head_ctx);
        auto attn_out = add_row_broadcast(g, matmul(g, ctx, params.at(pname("attn.wo"))),
                                          params.at(pname("attn.bo")));
        attn_out = detail::maybe_dropout(g, attn_out, cfg, mode, dropout_rng);
        x = layer_norm(g, add(g, x, attn_out), params.at(pname("attn.ln.gain")),
                       params.at(pname("attn.ln.bias")), eps);

        auto ffn = add_row_broadcast(g, matmul(g, x, params.at(pname("ffn.w1"))),
                                     params.at(pname("ffn.b1")));
        ffn = gelu(g, ffn);
        ffn = add_row_broadcast(g, matmul(g, ffn, params.at(pname("ffn.w2"))),
                                params.at(pname("ffn.b2")));
        ffn = detail::maybe_dropout(g, ffn, cfg, mode, dropout_rng);
        x = layer_norm(g, add(g, x, ffn), params.at(pname("ffn.ln.gain")),
                       params.at(pname("ffn.ln.bias")), eps);
        acts.hidden.push_back(x);
    }

    static const int kClsRow[1] = {0};
    auto cls = embedding_lookup(g, x, std::span<const int>(kClsRow));  // row gather
    acts.pooled = tanh_act(
        g, add_row_broadcast(g, matmul(g, cls, params.at("pooler.w")), params.at("pooler.b")));
    return acts;
}

template <typename T>
Tensor<T> mlm_logits(Graph<T>& g, const EncoderActivations<T>& acts, const ModelParams<T>& params,
                     const ModelConfig& cfg) {
    auto h = acts.hidden.back();
    auto t = add_row_broadcast(g, matmul(g, h, params.at("mlm.transform.w")),
                               params.at("mlm.transform.b"));
    t = gelu(g, t);
    t = layer_norm(g, t, params.at("mlm.ln.gain"), params.at("mlm.ln.bias"),
                   static_cast<T>(cfg.ln_eps));
    // Output projection tied to the token embedding table.
    auto logits = matmul(g, t, transpose(g, params.at("embed.token")));
    return add_row_broadcast(g, logits, params.at("mlm.output_bias"));
}

template <typename T>
Tensor<T> nsp_logits(Graph<T>& g, const EncoderActivations<T>& acts,
                     const ModelParams<T>& params) {
    return add_row_broadcast(g, matmul(g, acts.pooled, params.at("nsp.w")), params.at("nsp.b"));
}

}  // namespace tacl
