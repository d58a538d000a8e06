#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tacl/corpus.hpp"
#include "tacl/model.hpp"

namespace tacl {

struct AnalysisConfig {
    int sample = 2000;            // sentences drawn from the corpus
    bool exclude_special = true;  // drop [CLS]/[SEP] positions ([PAD] always dropped)
    uint64_t seed = 13;
};

// Mean off-diagonal pairwise cosine over the rows of h (n x d, n >= 2).
// Bounded by [-1/(n-1), 1]; throws on zero-norm rows or n < 2.
double self_similarity(const std::vector<std::vector<double>>& rows);

struct LayerStats {
    int layer = 0;
    double mean = 0.0;
    double stddev = 0.0;
    int n_sentences = 0;
};

// Layer index 0 is the embedding output, index L the final encoder layer.
struct SelfSimReport {
    std::string model_tag;
    std::string corpus_tag;
    std::vector<LayerStats> layers;

    void save(const std::string& path) const;
    static SelfSimReport load(const std::string& path);
};

struct SelfSimMatrix {
    std::vector<std::string> labels;         // token strings along both axes
    std::vector<std::vector<double>> values;  // diagonal exactly 1.0, symmetric

    size_t size() const { return labels.size(); }
};

// CSV with a header row/column of token strings (9 decimal digits) plus a
// binary PGM where cosine -1..1 maps linearly to intensity 255..0 (darker =
// higher), rounded half-up. Writes <prefix>.csv and <prefix>.pgm.
void export_heatmap(const SelfSimMatrix& m, const std::string& prefix);
SelfSimMatrix parse_heatmap_csv(const std::string& path);

struct LayerDelta {
    int layer = 0;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double delta = 0.0;  // mean_a - mean_b
};

struct ModelComparison {
    std::vector<LayerDelta> layers;
    double final_delta = 0.0;
    std::string verdict;  // tag of the model with the lower final-layer s(x)

    std::string to_table() const;
};

ModelComparison compare_models(const SelfSimReport& a, const SelfSimReport& b);

// ---- forward-based diagnostics ----------------------------------------------

namespace detail {

// Positions kept for analysis; [PAD] is never analyzed.
inline std::vector<size_t> analyzed_positions(std::span<const int> ids, bool exclude_special) {
    std::vector<size_t> keep;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == Vocab::kPad) continue;
        if (exclude_special && Vocab::is_special(ids[i])) continue;
        keep.push_back(i);
    }
    return keep;
}

template <typename T>
std::vector<std::vector<double>> gather_rows_double(const Tensor<T>& h,
                                                    const std::vector<size_t>& positions) {
    std::vector<std::vector<double>> rows;
    rows.reserve(positions.size());
    size_t d = h.extent(1);
    for (size_t p : positions) {
        std::vector<double> row(d);
        for (size_t j = 0; j < d; ++j) row[j] = static_cast<double>(h.at(p, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

// Runs the encoder in infer mode on one unmasked single-segment sentence and
// returns the L+1 per-layer activation tensors.
template <typename T>
std::vector<Tensor<T>> sentence_activations(const ModelParams<T>& params, const ModelConfig& cfg,
                                            const TokenSequence& seq) {
    Graph<T> g(false);
    std::vector<uint8_t> padmask(seq.ids.size(), 1);
    auto acts =
        encoder_forward<T>(g, params, cfg, seq.ids, seq.segment_ids, padmask, Mode::infer, nullptr);
    return acts.hidden;
}

// Per-layer s(x) for one sentence; empty when fewer than two analyzed tokens.
template <typename T>
std::vector<double> sentence_self_similarity(const ModelParams<T>& params, const ModelConfig& cfg,
                                             const TokenSequence& seq, bool exclude_special) {
    auto keep = detail::analyzed_positions(seq.ids, exclude_special);
    if (keep.size() < 2) return {};
    auto hidden = sentence_activations(params, cfg, seq);
    std::vector<double> per_layer;
    per_layer.reserve(hidden.size());
    for (const auto& h : hidden)
        per_layer.push_back(self_similarity(detail::gather_rows_double(h, keep)));
    return per_layer;
}

// Mean/std of s(x) per layer over a deterministic sample of corpus sentences.
// Aggregation sorts each layer's values before reducing, so the report is
// independent of sentence order.
template <typename T>
SelfSimReport layerwise_self_similarity(const ModelParams<T>& params, const ModelConfig& cfg,
                                        const std::vector<std::vector<int>>& sentences,
                                        const AnalysisConfig& acfg, std::string model_tag,
                                        std::string corpus_tag) {
    if (sentences.empty()) throw ValueError("layerwise_self_similarity: empty sentence sample");
    if (acfg.sample <= 0) throw ConfigError("layerwise_self_similarity: sample must be positive");

    std::vector<size_t> order(sentences.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (std::cmp_greater(order.size(), acfg.sample)) {
        // Seeded Fisher-Yates prefix: sample without replacement.
        Rng rng = Rng::derive(acfg.seed, "analysis-sample");
        for (size_t i = 0; i < static_cast<size_t>(acfg.sample); ++i) {
            size_t j = i + static_cast<size_t>(rng.uniform_int(static_cast<int>(order.size() - i)));
            std::swap(order[i], order[j]);
        }
        order.resize(static_cast<size_t>(acfg.sample));
    }

    size_t n_layers = static_cast<size_t>(cfg.n_layers) + 1;
    std::vector<std::vector<double>> values(n_layers);
    for (size_t idx : order) {
        auto seq = make_single_sequence(sentences[idx], cfg.max_len);
        auto per_layer =
            sentence_self_similarity(params, cfg, seq, acfg.exclude_special);
        if (per_layer.empty()) continue;
        for (size_t l = 0; l < n_layers; ++l) values[l].push_back(per_layer[l]);
    }
    if (values[0].empty())
        throw ValueError("layerwise_self_similarity: no sentence with >= 2 analyzed tokens");

    SelfSimReport report;
    report.model_tag = std::move(model_tag);
    report.corpus_tag = std::move(corpus_tag);
    for (size_t l = 0; l < n_layers; ++l) {
        auto& v = values[l];
        std::sort(v.begin(), v.end());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        report.layers.push_back(
            {static_cast<int>(l), mean, std::sqrt(var), static_cast<int>(v.size())});
    }
    return report;
}

// Pairwise cosine matrix of one sentence's representations at the chosen
// layer (-1 = final). The diagonal is exactly 1.0 by definition.
template <typename T>
SelfSimMatrix self_sim_matrix(const ModelParams<T>& params, const ModelConfig& cfg,
                              const Vocab& vocab, const TokenSequence& seq, int layer,
                              bool exclude_special) {
    if (layer == -1) layer = cfg.n_layers;
    if (layer < 0 || layer > cfg.n_layers)
        throw ValueError("self_sim_matrix: layer out of range [0," +
                         std::to_string(cfg.n_layers) + "]");
    auto keep = detail::analyzed_positions(seq.ids, exclude_special);
    if (keep.size() < 2) throw ValueError("self_sim_matrix: fewer than two analyzed tokens");
    auto hidden = sentence_activations(params, cfg, seq);
    auto rows = detail::gather_rows_double(hidden[static_cast<size_t>(layer)], keep);

    size_t n = rows.size();
    SelfSimMatrix m;
    m.labels.reserve(n);
    for (size_t p : keep) m.labels.push_back(vocab.token_of(seq.ids[p]));
    m.values.assign(n, std::vector<double>(n, 0.0));
    std::vector<double> norms(n);
    for (size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (double x : rows[i]) sq += x * x;
        if (sq == 0.0) throw ValueError("self_sim_matrix: zero-norm representation row");
        norms[i] = std::sqrt(sq);
    }
    for (size_t i = 0; i < n; ++i) {
        m.values[i][i] = 1.0;
        for (size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < rows[i].size(); ++k) dot += rows[i][k] * rows[j][k];
            double c = dot / (norms[i] * norms[j]);
            m.values[i][j] = c;
            m.values[j][i] = c;
        }
    }
    return m;
}

}  // namespace tacl
