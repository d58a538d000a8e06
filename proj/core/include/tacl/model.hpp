#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tacl/ops.hpp"
#include "tacl/serialize.hpp"
#include "tacl/vocab.hpp"

namespace tacl {

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 256;
    int max_len = 128;
    double dropout_p = 0.1;
    double ln_eps = 1e-12;

    void validate() const {
        if (vocab_size <= Vocab::kNumReserved)
            throw ConfigError("ModelConfig: vocab_size too small");
        if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_len <= 0)
            throw ConfigError("ModelConfig: all extents must be positive");
        if (d_model % n_heads != 0)
            throw ConfigError("ModelConfig: d_model must be divisible by n_heads");
        if (dropout_p < 0.0 || dropout_p >= 1.0)
            throw ConfigError("ModelConfig: dropout_p must be in [0,1)");
        if (ln_eps <= 0.0) throw ConfigError("ModelConfig: ln_eps must be positive");
    }

    bool operator==(const ModelConfig&) const = default;
};

enum class Mode { train, infer };

enum class ParamKind { weight, bias, gain };

struct ParamSpec {
    std::string name;
    std::vector<size_t> shape;
    ParamKind kind;
};

// All parameter names and shapes for a config, in name-sorted order. The MLM
// output projection is the transpose of the token embedding table (weight
// tying); only its bias appears here.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

template <typename T>
struct ModelParams {
    std::map<std::string, Tensor<T>> tensors;

    Tensor<T>& at(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ValueError("ModelParams: unknown tensor '" + name + "'");
        return it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ValueError("ModelParams: unknown tensor '" + name + "'");
        return it->second;
    }

    size_t total_params() const {
        size_t n = 0;
        for (const auto& [_, t] : tensors) n += t.numel();
        return n;
    }

    void set_requires_grad(bool rg) {
        for (auto& [_, t] : tensors) t.set_requires_grad(rg);
    }

    ModelParams clone() const {
        ModelParams p;
        for (const auto& [name, t] : tensors) p.tensors.emplace(name, t.clone());
        return p;
    }

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> p;
        for (const auto& [name, t] : tensors) p.tensors.emplace(name, t.template cast<U>());
        return p;
    }
};

// Truncated normal for weights (sample std 0.02, parent truncated at +-2
// sigma), zeros for biases, ones for layer-norm gains. Each tensor draws from
// its own (seed, name) stream, so the values of one tensor never depend on
// which other tensors exist.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    // Parent sigma is scaled so the +-2-sigma-truncated sample has std 1,
    // making the realized weight std 0.02 rather than 0.02 * 0.8796.
    const double a = 2.0;
    const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
    const double big_phi = 0.5 * (1.0 + std::erf(a / std::sqrt(2.0)));
    const double trunc_std = std::sqrt(1.0 - 2.0 * a * phi / (2.0 * big_phi - 1.0));
    ModelParams<T> params;
    for (const auto& spec : param_specs(cfg)) {
        size_t numel = 1;
        for (size_t e : spec.shape) numel *= e;
        std::vector<T> v(numel);
        switch (spec.kind) {
            case ParamKind::weight: {
                Rng rng = Rng::derive(seed, "init", fnv1a64(spec.name));
                for (size_t i = 0; i < numel; ++i)
                    v[i] = static_cast<T>(rng.truncated_normal(2.0) * 0.02 / trunc_std);
                break;
            }
            case ParamKind::bias:
                std::fill(v.begin(), v.end(), T(0));
                break;
            case ParamKind::gain:
                std::fill(v.begin(), v.end(), T(1));
                break;
        }
        params.tensors.emplace(spec.name, Tensor<T>::from_data(spec.shape, std::move(v), true));
    }
    return params;
}

// Per-layer hidden states: index 0 is the embedding output, index L the final
// layer. pooled is the tanh projection of the final [CLS] state.
template <typename T>
struct EncoderActivations {
    std::vector<Tensor<T>> hidden;
    Tensor<T> pooled;
};

template <typename T>
EncoderActivations<T> encoder_forward(Graph<T>& g, const ModelParams<T>& params,
                                      const ModelConfig& cfg, std::span<const int> ids,
                                      std::span<const int> segment_ids,
                                      std::span<const uint8_t> padding_mask, Mode mode,
                                      Rng* dropout_rng,
                                      std::span<const int> position_ids = {});

template <typename T>
Tensor<T> mlm_logits(Graph<T>& g, const EncoderActivations<T>& acts, const ModelParams<T>& params,
                     const ModelConfig& cfg);

template <typename T>
Tensor<T> nsp_logits(Graph<T>& g, const EncoderActivations<T>& acts, const ModelParams<T>& params);

// ---- checkpoints -----------------------------------------------------------

struct CheckpointMeta {
    uint32_t format_version = 1;
    int64_t step = 0;
    std::string recipe;
    ModelConfig config;
};

void save_checkpoint_meta(const std::string& path, const CheckpointMeta& meta);
CheckpointMeta load_checkpoint_meta(const std::string& path);

inline std::string checkpoint_tensor_path(const std::string& prefix) { return prefix + ".tensors"; }
inline std::string checkpoint_meta_path(const std::string& prefix) { return prefix + ".json"; }

template <typename T>
void save_checkpoint(const std::string& prefix, const ModelParams<T>& params,
                     const CheckpointMeta& meta) {
    save_named_tensors(checkpoint_tensor_path(prefix), to_named_tensors(params.tensors));
    save_checkpoint_meta(checkpoint_meta_path(prefix), meta);
}

template <typename T>
std::pair<ModelParams<T>, CheckpointMeta> load_checkpoint(const std::string& prefix) {
    CheckpointMeta meta = load_checkpoint_meta(checkpoint_meta_path(prefix));
    auto tensors = load_named_tensors(checkpoint_tensor_path(prefix));
    ModelParams<T> params;
    params.tensors = from_named_tensors<T>(tensors, true);
    // Shape check against the config the sidecar claims.
    for (const auto& spec : param_specs(meta.config)) {
        const auto& t = params.at(spec.name);
        if (t.shape() != spec.shape)
            throw IoError("checkpoint: tensor '" + spec.name + "' has shape " +
                          shape_to_string(t.shape()) + ", expected " +
                          shape_to_string(spec.shape));
    }
    if (params.tensors.size() != param_specs(meta.config).size())
        throw IoError("checkpoint: unexpected tensor count");
    return {std::move(params), std::move(meta)};
}

}  // namespace tacl

#include "tacl/model_forward.hpp"
