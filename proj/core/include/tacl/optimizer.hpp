#pragma once

#include <cmath>
#include <map>
#include <string>

#include "tacl/graph.hpp"
#include "tacl/model.hpp"

namespace tacl {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled; biases and layer-norm params excluded
};

// Linear warmup from 0 to lr_peak over warmup_ratio*steps, then linear decay
// to 0 at `steps`.
inline double lr_at(int64_t step, int64_t total_steps, double lr_peak, double warmup_ratio) {
    if (total_steps <= 0) throw ConfigError("lr_at: total_steps must be positive");
    if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
        throw ConfigError("lr_at: warmup_ratio must be in [0,1)");
    if (step < 0 || step > total_steps) throw ValueError("lr_at: step out of [0, steps]");
    double warmup = warmup_ratio * static_cast<double>(total_steps);
    double s = static_cast<double>(step);
    if (s <= warmup && warmup > 0.0) return lr_peak * s / warmup;
    return lr_peak * (static_cast<double>(total_steps) - s) /
           (static_cast<double>(total_steps) - warmup);
}

template <typename T>
struct AdamState {
    std::map<std::string, Tensor<T>> m, v;
    int64_t step = 0;
};

template <typename T>
AdamState<T> init_adam_state(const ModelParams<T>& params) {
    AdamState<T> state;
    for (const auto& [name, t] : params.tensors) {
        state.m.emplace(name, Tensor<T>::zeros(t.shape()));
        state.v.emplace(name, Tensor<T>::zeros(t.shape()));
    }
    return state;
}

// Scales the gradients of the touched parameters so the global L2 norm is at
// most max_norm. Returns the pre-clip norm. Throws NumericError on non-finite
// gradients, naming the parameter.
template <typename T>
double clip_global_norm(ModelParams<T>& params, const GradMap& touched, double max_norm) {
    double sq = 0.0;
    for (auto& [name, p] : params.tensors) {
        if (!touched.contains(p)) continue;
        for (T gv : p.grad()) {
            double d = static_cast<double>(gv);
            if (!std::isfinite(d))
                throw NumericError("clip_global_norm: non-finite gradient in '" + name + "'");
            sq += d * d;
        }
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        // Slightly conservative so the clipped norm stays under max_norm even
        // after float rounding of the per-element scaling.
        T factor = static_cast<T>(max_norm * (1.0 - 1e-6) / norm);
        for (auto& [name, p] : params.tensors) {
            if (!touched.contains(p)) continue;
            for (T& gv : p.grad()) gv *= factor;
        }
    }
    return norm;
}

// Bias-corrected Adam with decoupled multiplicative weight decay, applied
// before the moment update (the p *= (1 - lr*wd) convention). Rank-1 tensors
// (biases, layer-norm gains) are excluded from decay. Parameters outside the
// gradient map are left untouched.
template <typename T>
void adamw_step(ModelParams<T>& params, const GradMap& touched, AdamState<T>& state, double lr,
                const AdamConfig& cfg) {
    // Validate before mutating anything, so an aborted step leaves the
    // parameters exactly as the last completed step wrote them.
    for (const auto& [name, p] : params.tensors) {
        if (!touched.contains(p)) continue;
        for (T gv : p.grad())
            if (!std::isfinite(static_cast<double>(gv)))
                throw NumericError("adamw_step: non-finite gradient in '" + name + "'");
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params.tensors) {
        if (!touched.contains(p)) continue;
        auto g = p.grad();
        auto m = state.m.at(name).data();
        auto v = state.v.at(name).data();
        auto w = p.data();
        bool decay = p.rank() >= 2 && cfg.weight_decay != 0.0;
        T decay_factor = static_cast<T>(1.0 - lr * cfg.weight_decay);
        for (size_t i = 0; i < w.size(); ++i) {
            double gi = static_cast<double>(g[i]);
            if (decay) w[i] *= decay_factor;
            double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
            double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
            w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * update);
        }
    }
}

}  // namespace tacl
