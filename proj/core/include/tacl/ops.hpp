#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <memory>
#include <span>
#include <type_traits>
#include <vector>

#include "tacl/graph.hpp"
#include "tacl/tensor.hpp"

namespace tacl {

namespace kernels {

// C(n,m) = A(n,k) * B(k,m), row-major, ikj order.
template <typename T>
void mm_nn(const T* a, const T* b, T* c, size_t n, size_t k, size_t m, bool accumulate) {
    if (!accumulate) std::fill(c, c + n * m, T(0));
    for (size_t i = 0; i < n; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * m;
        for (size_t l = 0; l < k; ++l) {
            T av = arow[l];
            const T* brow = b + l * m;
            for (size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(n,m) = A(n,k) * B(m,k)^T : c[i][j] = dot(a_row_i, b_row_j).
template <typename T>
void mm_nt(const T* a, const T* b, T* c, size_t n, size_t k, size_t m, bool accumulate) {
    for (size_t i = 0; i < n; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * m;
        for (size_t j = 0; j < m; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            if (accumulate)
                crow[j] += acc;
            else
                crow[j] = acc;
        }
    }
}

// C(k,m) = A(n,k)^T * B(n,m).
template <typename T>
void mm_tn(const T* a, const T* b, T* c, size_t n, size_t k, size_t m, bool accumulate) {
    if (!accumulate) std::fill(c, c + k * m, T(0));
    for (size_t i = 0; i < n; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * m;
        for (size_t l = 0; l < k; ++l) {
            T av = arow[l];
            T* crow = c + l * m;
            for (size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void softmax_line(const T* in, T* out, size_t len, size_t stride) {
    T mx = in[0];
    for (size_t i = 1; i < len; ++i) mx = std::max(mx, in[i * stride]);
    T sum = 0;
    for (size_t i = 0; i < len; ++i) {
        T e = std::exp(in[i * stride] - mx);
        out[i * stride] = e;
        sum += e;
    }
    T inv = T(1) / sum;
    for (size_t i = 0; i < len; ++i) out[i * stride] *= inv;
}

template <typename T>
T log_sum_exp(const T* in, size_t len) {
    T mx = in[0];
    for (size_t i = 1; i < len; ++i) mx = std::max(mx, in[i]);
    T sum = 0;
    for (size_t i = 0; i < len; ++i) sum += std::exp(in[i] - mx);
    return mx + std::log(sum);
}

}  // namespace kernels

namespace detail {

template <typename T>
Tensor<T> record_op(Graph<T>& g, const char* name, std::vector<Tensor<T>> inputs, Tensor<T> out,
                    std::function<void()> fwd, std::function<void()> bwd) {
    fwd();
    out.check_finite(name);
    bool needs_grad = false;
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
    out.set_requires_grad(needs_grad);
    if (g.recording() && needs_grad)
        g.add_record(OpRecord<T>{name, std::move(inputs), out, std::move(fwd), std::move(bwd)});
    return out;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(Graph<T>& g, Tensor<T> a, Tensor<T> b) {
    detail::require(a.rank() == 2 && b.rank() == 2,
                    "matmul: expected rank-2 operands, got " + shape_to_string(a.shape()) + " x " +
                        shape_to_string(b.shape()));
    detail::require(a.extent(1) == b.extent(0),
                    "matmul: inner extents disagree, " + shape_to_string(a.shape()) + " x " +
                        shape_to_string(b.shape()));
    size_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
    Tensor<T> out = Tensor<T>::zeros({n, m});
    auto fwd = [=]() mutable { kernels::mm_nn(a.ptr(), b.ptr(), out.ptr(), n, k, m, false); };
    auto bwd = [=]() mutable {
        auto go = out.grad();
        if (a.requires_grad()) kernels::mm_nt(go.data(), b.ptr(), a.grad().data(), n, m, k, true);
        if (b.requires_grad()) kernels::mm_tn(a.ptr(), go.data(), b.grad().data(), n, k, m, true);
    };
    return detail::record_op(g, "matmul", {a, b}, out, fwd, bwd);
}

template <typename T>
Tensor<T> transpose(Graph<T>& g, Tensor<T> a) {
    detail::require(a.rank() == 2, "transpose: expected rank-2, got " + shape_to_string(a.shape()));
    size_t n = a.extent(0), m = a.extent(1);
    Tensor<T> out = Tensor<T>::zeros({m, n});
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) out.at(j, i) = a.at(i, j);
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < m; ++j) ga[i * m + j] += go[j * n + i];
    };
    return detail::record_op(g, "transpose", {a}, out, fwd, bwd);
}

template <typename T>
Tensor<T> add(Graph<T>& g, Tensor<T> a, Tensor<T> b) {
    detail::require(a.shape() == b.shape(), "add: shape mismatch " + shape_to_string(a.shape()) +
                                                " vs " + shape_to_string(b.shape()));
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    size_t n = a.numel();
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i) out.at(i) = a.at(i) + b.at(i);
    };
    auto bwd = [=]() mutable {
        auto go = out.grad();
        if (a.requires_grad()) {
            auto ga = a.grad();
            for (size_t i = 0; i < n; ++i) ga[i] += go[i];
        }
        if (b.requires_grad()) {
            auto gb = b.grad();
            for (size_t i = 0; i < n; ++i) gb[i] += go[i];
        }
    };
    return detail::record_op(g, "add", {a, b}, out, fwd, bwd);
}

template <typename T>
Tensor<T> mul(Graph<T>& g, Tensor<T> a, Tensor<T> b) {
    detail::require(a.shape() == b.shape(), "mul: shape mismatch " + shape_to_string(a.shape()) +
                                                " vs " + shape_to_string(b.shape()));
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    size_t n = a.numel();
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i) out.at(i) = a.at(i) * b.at(i);
    };
    auto bwd = [=]() mutable {
        auto go = out.grad();
        if (a.requires_grad()) {
            auto ga = a.grad();
            for (size_t i = 0; i < n; ++i) ga[i] += go[i] * b.at(i);
        }
        if (b.requires_grad()) {
            auto gb = b.grad();
            for (size_t i = 0; i < n; ++i) gb[i] += go[i] * a.at(i);
        }
    };
    return detail::record_op(g, "mul", {a, b}, out, fwd, bwd);
}

// (n,k) + (k), the bias broadcast over rows.
template <typename T>
Tensor<T> add_row_broadcast(Graph<T>& g, Tensor<T> m, Tensor<T> bias) {
    detail::require(m.rank() == 2 && bias.rank() == 1 && m.extent(1) == bias.extent(0),
                    "add_row_broadcast: shapes " + shape_to_string(m.shape()) + " + " +
                        shape_to_string(bias.shape()));
    size_t n = m.extent(0), k = m.extent(1);
    Tensor<T> out = Tensor<T>::zeros({n, k});
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < k; ++j) out.at(i, j) = m.at(i, j) + bias.at(j);
    };
    auto bwd = [=]() mutable {
        auto go = out.grad();
        if (m.requires_grad()) {
            auto gm = m.grad();
            for (size_t i = 0; i < n * k; ++i) gm[i] += go[i];
        }
        if (bias.requires_grad()) {
            auto gb = bias.grad();
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < k; ++j) gb[j] += go[i * k + j];
        }
    };
    return detail::record_op(g, "add_row_broadcast", {m, bias}, out, fwd, bwd);
}

template <typename T>
Tensor<T> scale(Graph<T>& g, Tensor<T> a, T c) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    size_t n = a.numel();
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i) out.at(i) = c * a.at(i);
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        for (size_t i = 0; i < n; ++i) ga[i] += c * go[i];
    };
    return detail::record_op(g, "scale", {a}, out, fwd, bwd);
}

template <typename T>
Tensor<T> sum_all(Graph<T>& g, Tensor<T> a) {
    Tensor<T> out = Tensor<T>::zeros({});
    size_t n = a.numel();
    auto fwd = [=]() mutable {
        T s = 0;
        for (size_t i = 0; i < n; ++i) s += a.at(i);
        out.at(0) = s;
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        T go = out.grad()[0];
        auto ga = a.grad();
        for (size_t i = 0; i < n; ++i) ga[i] += go;
    };
    return detail::record_op(g, "sum_all", {a}, out, fwd, bwd);
}

namespace detail {
// (outer count, line length, stride, outer step) for a 1-D walk along `axis`.
struct AxisWalk {
    size_t outer, len, stride;
    size_t base(size_t o, size_t len_, size_t stride_) const {
        // rank-2, axis==1: o-th row; axis==0: o-th column.
        return stride_ == 1 ? o * len_ : o;
    }
};

template <typename T>
AxisWalk axis_walk(const Tensor<T>& a, int axis) {
    if (a.rank() == 1) {
        require(axis == 0, "softmax: axis out of range for rank-1 tensor");
        return {1, a.extent(0), 1};
    }
    require(a.rank() == 2 && (axis == 0 || axis == 1), "softmax: expected rank 1 or 2");
    if (axis == 1) return {a.extent(0), a.extent(1), 1};
    return {a.extent(1), a.extent(0), a.extent(1)};
}
}  // namespace detail

template <typename T>
Tensor<T> softmax(Graph<T>& g, Tensor<T> a, int axis) {
    a.check_finite("softmax(input)");
    auto w = detail::axis_walk(a, axis);
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto fwd = [=]() mutable {
        for (size_t o = 0; o < w.outer; ++o) {
            size_t base = w.base(o, w.len, w.stride);
            kernels::softmax_line(a.ptr() + base, out.ptr() + base, w.len, w.stride);
        }
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        for (size_t o = 0; o < w.outer; ++o) {
            size_t base = w.base(o, w.len, w.stride);
            T dot = 0;
            for (size_t i = 0; i < w.len; ++i)
                dot += go[base + i * w.stride] * out.at(base + i * w.stride);
            for (size_t i = 0; i < w.len; ++i) {
                size_t idx = base + i * w.stride;
                ga[idx] += out.at(idx) * (go[idx] - dot);
            }
        }
    };
    return detail::record_op(g, "softmax", {a}, out, fwd, bwd);
}

// Exact Gaussian-CDF formulation: x * Phi(x).
template <typename T>
Tensor<T> gelu(Graph<T>& g, Tensor<T> a) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    size_t n = a.numel();
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i) {
            T x = a.at(i);
            out.at(i) = T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
        }
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        const T inv_sqrt_2pi = T(0.3989422804014326779);
        for (size_t i = 0; i < n; ++i) {
            T x = a.at(i);
            T cdf = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
            T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
            ga[i] += go[i] * (cdf + x * pdf);
        }
    };
    return detail::record_op(g, "gelu", {a}, out, fwd, bwd);
}

template <typename T>
Tensor<T> tanh_act(Graph<T>& g, Tensor<T> a) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    size_t n = a.numel();
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i) out.at(i) = std::tanh(a.at(i));
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        for (size_t i = 0; i < n; ++i) ga[i] += go[i] * (T(1) - out.at(i) * out.at(i));
    };
    return detail::record_op(g, "tanh", {a}, out, fwd, bwd);
}

// Normalization over the last axis; x is (n,d) or (d), gain/bias are (d).
template <typename T>
Tensor<T> layer_norm(Graph<T>& g, Tensor<T> x, Tensor<T> gain, Tensor<T> bias, T eps) {
    detail::require(x.rank() == 1 || x.rank() == 2, "layer_norm: expected rank 1 or 2");
    size_t d = x.rank() == 2 ? x.extent(1) : x.extent(0);
    size_t rows = x.rank() == 2 ? x.extent(0) : 1;
    detail::require(gain.rank() == 1 && gain.extent(0) == d && bias.rank() == 1 &&
                        bias.extent(0) == d,
                    "layer_norm: gain/bias must be (" + std::to_string(d) + ")");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto norm = std::make_shared<std::vector<T>>(rows * d);  // (x-mu)/sigma, cached for backward
    auto inv_sigma = std::make_shared<std::vector<T>>(rows);
    auto fwd = [=]() mutable {
        for (size_t r = 0; r < rows; ++r) {
            const T* xr = x.ptr() + r * d;
            T mu = 0;
            for (size_t j = 0; j < d; ++j) mu += xr[j];
            mu /= T(d);
            T var = 0;
            for (size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
            var /= T(d);
            T inv = T(1) / std::sqrt(var + eps);
            (*inv_sigma)[r] = inv;
            for (size_t j = 0; j < d; ++j) {
                T y = (xr[j] - mu) * inv;
                (*norm)[r * d + j] = y;
                out.at(r * d + j) = gain.at(j) * y + bias.at(j);
            }
        }
    };
    auto bwd = [=]() mutable {
        auto go = out.grad();
        for (size_t r = 0; r < rows; ++r) {
            const T* yr = norm->data() + r * d;
            const T* gor = go.data() + r * d;
            if (gain.requires_grad()) {
                auto gg = gain.grad();
                for (size_t j = 0; j < d; ++j) gg[j] += gor[j] * yr[j];
            }
            if (bias.requires_grad()) {
                auto gb = bias.grad();
                for (size_t j = 0; j < d; ++j) gb[j] += gor[j];
            }
            if (x.requires_grad()) {
                T m1 = 0, m2 = 0;
                for (size_t j = 0; j < d; ++j) {
                    T gy = gor[j] * gain.at(j);
                    m1 += gy;
                    m2 += gy * yr[j];
                }
                m1 /= T(d);
                m2 /= T(d);
                auto gx = x.grad();
                T inv = (*inv_sigma)[r];
                for (size_t j = 0; j < d; ++j) {
                    T gy = gor[j] * gain.at(j);
                    gx[r * d + j] += (gy - m1 - yr[j] * m2) * inv;
                }
            }
        }
    };
    return detail::record_op(g, "layer_norm", {x, gain, bias}, out, fwd, bwd);
}

// Row gather; doubles as the embedding lookup. Gradient scatter-adds rows.
template <typename T>
Tensor<T> embedding_lookup(Graph<T>& g, Tensor<T> table, std::span<const int> ids) {
    detail::require(table.rank() == 2, "embedding_lookup: table must be rank-2");
    size_t v = table.extent(0), d = table.extent(1);
    for (int id : ids)
        if (id < 0 || static_cast<size_t>(id) >= v)
            throw ValueError("embedding_lookup: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
    std::vector<int> idv(ids.begin(), ids.end());
    size_t n = idv.size();
    Tensor<T> out = Tensor<T>::zeros({n, d});
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i)
            std::memcpy(out.ptr() + i * d, table.ptr() + size_t(idv[i]) * d, d * sizeof(T));
    };
    auto bwd = [=]() mutable {
        if (!table.requires_grad()) return;
        auto gt = table.grad();
        auto go = out.grad();
        for (size_t i = 0; i < n; ++i) {
            T* dst = gt.data() + size_t(idv[i]) * d;
            const T* src = go.data() + i * d;
            for (size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    };
    return detail::record_op(g, "embedding_lookup", {table}, out, fwd, bwd);
}

template <typename T>
Tensor<T> col_slice(Graph<T>& g, Tensor<T> a, size_t start, size_t width) {
    detail::require(a.rank() == 2 && start + width <= a.extent(1),
                    "col_slice: [" + std::to_string(start) + "," + std::to_string(start + width) +
                        ") out of " + shape_to_string(a.shape()));
    size_t n = a.extent(0), d = a.extent(1);
    Tensor<T> out = Tensor<T>::zeros({n, width});
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i)
            std::memcpy(out.ptr() + i * width, a.ptr() + i * d + start, width * sizeof(T));
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < width; ++j) ga[i * d + start + j] += go[i * width + j];
    };
    return detail::record_op(g, "col_slice", {a}, out, fwd, bwd);
}

template <typename T>
Tensor<T> concat_cols(Graph<T>& g, std::vector<Tensor<T>> parts) {
    detail::require(!parts.empty(), "concat_cols: no inputs");
    size_t n = parts[0].extent(0), total = 0;
    for (auto& p : parts) {
        detail::require(p.rank() == 2 && p.extent(0) == n, "concat_cols: row counts disagree");
        total += p.extent(1);
    }
    Tensor<T> out = Tensor<T>::zeros({n, total});
    auto fwd = [=]() mutable {
        size_t off = 0;
        for (auto& p : parts) {
            size_t w = p.extent(1);
            for (size_t i = 0; i < n; ++i)
                std::memcpy(out.ptr() + i * total + off, p.ptr() + i * w, w * sizeof(T));
            off += w;
        }
    };
    auto bwd = [=]() mutable {
        auto go = out.grad();
        size_t off = 0;
        for (auto& p : parts) {
            size_t w = p.extent(1);
            if (p.requires_grad()) {
                auto gp = p.grad();
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < w; ++j) gp[i * w + j] += go[i * total + off + j];
            }
            off += w;
        }
    };
    return detail::record_op(g, "concat_cols", parts, out, fwd, bwd);
}

// Stacks B row vectors, each (d) or (1,d), into (B,d).
template <typename T>
Tensor<T> concat_rows(Graph<T>& g, std::vector<Tensor<T>> parts) {
    detail::require(!parts.empty(), "concat_rows: no inputs");
    auto row_width = [](const Tensor<T>& t) -> size_t {
        if (t.rank() == 1) return t.extent(0);
        if (t.rank() == 2 && t.extent(0) == 1) return t.extent(1);
        throw ShapeError("concat_rows: parts must be (d) or (1,d)");
    };
    size_t d = row_width(parts[0]);
    for (auto& p : parts)
        detail::require(row_width(p) == d, "concat_rows: widths disagree");
    size_t b = parts.size();
    Tensor<T> out = Tensor<T>::zeros({b, d});
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < b; ++i)
            std::memcpy(out.ptr() + i * d, parts[i].ptr(), d * sizeof(T));
    };
    auto bwd = [=]() mutable {
        auto go = out.grad();
        for (size_t i = 0; i < b; ++i) {
            if (!parts[i].requires_grad()) continue;
            auto gp = parts[i].grad();
            for (size_t j = 0; j < d; ++j) gp[j] += go[i * d + j];
        }
    };
    return detail::record_op(g, "concat_rows", parts, out, fwd, bwd);
}

// Inverted dropout. The mask is drawn once at op creation and replayed as-is,
// so the gradient mask always matches the forward mask. p == 0 is the identity.
template <typename T>
Tensor<T> dropout(Graph<T>& g, Tensor<T> a, T p, Rng& rng) {
    if (!(p >= T(0) && p < T(1))) throw ValueError("dropout: p must be in [0,1)");
    if (p == T(0)) return a;
    size_t n = a.numel();
    auto mask = std::make_shared<std::vector<uint8_t>>(n);
    for (size_t i = 0; i < n; ++i) (*mask)[i] = rng.bernoulli(1.0 - double(p)) ? 1 : 0;
    T inv_keep = T(1) / (T(1) - p);
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i) out.at(i) = (*mask)[i] ? a.at(i) * inv_keep : T(0);
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        for (size_t i = 0; i < n; ++i)
            if ((*mask)[i]) ga[i] += go[i] * inv_keep;
    };
    return detail::record_op(g, "dropout", {a}, out, fwd, bwd);
}

// Each row scaled to unit L2 norm. Zero-norm rows are degenerate inputs.
template <typename T>
Tensor<T> row_l2_normalize(Graph<T>& g, Tensor<T> a) {
    detail::require(a.rank() == 2, "row_l2_normalize: expected rank-2");
    size_t n = a.extent(0), d = a.extent(1);
    Tensor<T> out = Tensor<T>::zeros({n, d});
    auto inv_norm = std::make_shared<std::vector<T>>(n);
    auto fwd = [=]() mutable {
        for (size_t i = 0; i < n; ++i) {
            const T* xr = a.ptr() + i * d;
            T sq = 0;
            for (size_t j = 0; j < d; ++j) sq += xr[j] * xr[j];
            if (sq == T(0))
                throw ValueError("row_l2_normalize: zero-norm row " + std::to_string(i));
            T inv = T(1) / std::sqrt(sq);
            (*inv_norm)[i] = inv;
            for (size_t j = 0; j < d; ++j) out.at(i, j) = xr[j] * inv;
        }
    };
    auto bwd = [=]() mutable {
        if (!a.requires_grad()) return;
        auto ga = a.grad();
        auto go = out.grad();
        for (size_t i = 0; i < n; ++i) {
            const T* yr = out.ptr() + i * d;
            const T* gor = go.data() + i * d;
            T dot = 0;
            for (size_t j = 0; j < d; ++j) dot += gor[j] * yr[j];
            T inv = (*inv_norm)[i];
            for (size_t j = 0; j < d; ++j) ga[i * d + j] += (gor[j] - yr[j] * dot) * inv;
        }
    };
    return detail::record_op(g, "row_l2_normalize", {a}, out, fwd, bwd);
}

template <typename T>
Tensor<T> cosine_sim(Graph<T>& g, Tensor<T> u, Tensor<T> v) {
    detail::require(u.rank() == 1 && v.rank() == 1 && u.extent(0) == v.extent(0),
                    "cosine_sim: expected equal-length vectors, got " +
                        shape_to_string(u.shape()) + " and " + shape_to_string(v.shape()));
    size_t d = u.extent(0);
    Tensor<T> out = Tensor<T>::zeros({});
    auto cache = std::make_shared<std::array<T, 3>>();  // |u|, |v|, cos
    auto fwd = [=]() mutable {
        T uu = 0, vv = 0, uv = 0;
        for (size_t j = 0; j < d; ++j) {
            uu += u.at(j) * u.at(j);
            vv += v.at(j) * v.at(j);
            uv += u.at(j) * v.at(j);
        }
        if (uu == T(0) || vv == T(0)) throw ValueError("cosine_sim: zero-norm input vector");
        T nu = std::sqrt(uu), nv = std::sqrt(vv);
        (*cache) = {nu, nv, uv / (nu * nv)};
        out.at(0) = (*cache)[2];
    };
    auto bwd = [=]() mutable {
        T go = out.grad()[0];
        T nu = (*cache)[0], nv = (*cache)[1], c = (*cache)[2];
        if (u.requires_grad()) {
            auto gu = u.grad();
            for (size_t j = 0; j < d; ++j)
                gu[j] += go * (v.at(j) / (nu * nv) - c * u.at(j) / (nu * nu));
        }
        if (v.requires_grad()) {
            auto gv = v.grad();
            for (size_t j = 0; j < d; ++j)
                gv[j] += go * (u.at(j) / (nu * nv) - c * v.at(j) / (nv * nv));
        }
    };
    return detail::record_op(g, "cosine_sim", {u, v}, out, fwd, bwd);
}

// Weighted softmax cross-entropy over rows of (n,K) logits. Rows with zero
// weight are skipped entirely (their targets may be anything). `mean` divides
// by the weight total, otherwise the raw weighted sum is returned.
template <typename T>
Tensor<T> cross_entropy(Graph<T>& g, Tensor<T> logits, std::span<const int> targets,
                        std::type_identity_t<std::span<const T>> weights, bool mean) {
    detail::require(logits.rank() == 2, "cross_entropy: logits must be rank-2");
    size_t n = logits.extent(0), k = logits.extent(1);
    detail::require(targets.size() == n && weights.size() == n,
                    "cross_entropy: targets/weights must have one entry per row");
    std::vector<int> tv(targets.begin(), targets.end());
    std::vector<T> wv(weights.begin(), weights.end());
    T wsum = 0;
    for (size_t i = 0; i < n; ++i) {
        if (wv[i] < T(0)) throw ValueError("cross_entropy: negative weight");
        if (wv[i] > T(0) && (tv[i] < 0 || static_cast<size_t>(tv[i]) >= k))
            throw ValueError("cross_entropy: target out of range in weighted row " +
                             std::to_string(i));
        wsum += wv[i];
    }
    if (wsum <= T(0)) throw ValueError("cross_entropy: zero selected positions");
    T denom = mean ? wsum : T(1);

    Tensor<T> out = Tensor<T>::zeros({});
    auto probs = std::make_shared<std::vector<T>>(n * k);  // rows with w>0 only
    auto fwd = [=]() mutable {
        T total = 0;
        for (size_t i = 0; i < n; ++i) {
            if (wv[i] == T(0)) continue;
            const T* row = logits.ptr() + i * k;
            kernels::softmax_line(row, probs->data() + i * k, k, 1);
            T lse = kernels::log_sum_exp(row, k);
            total += wv[i] * (lse - row[tv[i]]);
        }
        out.at(0) = total / denom;
    };
    auto bwd = [=]() mutable {
        if (!logits.requires_grad()) return;
        T go = out.grad()[0];
        auto gl = logits.grad();
        for (size_t i = 0; i < n; ++i) {
            if (wv[i] == T(0)) continue;
            T c = go * wv[i] / denom;
            const T* p = probs->data() + i * k;
            T* grow = gl.data() + i * k;
            for (size_t j = 0; j < k; ++j) grow[j] += c * p[j];
            grow[tv[i]] -= c;
        }
    };
    return detail::record_op(g, "cross_entropy", {logits}, out, fwd, bwd);
}

}  // namespace tacl
