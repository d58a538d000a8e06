#pragma once

#include <map>
#include <string>
#include <vector>

#include "tacl/tensor.hpp"

namespace tacl {

// Named-tensor container, used by checkpoints.
//
// Layout (all integers little-endian):
//   u32 format_version (currently 1)
//   u32 tensor_count
//   per tensor:
//     u32 name_len, name bytes (UTF-8)
//     u32 rank
//     u64 extents[rank]
//     f64 payload[product(extents)], raw little-endian
//
// Payloads are always stored as 64-bit floats. float32 tensors widen on save
// and narrow on load; the round trip is bit-exact because every float32 is
// representable as a float64.

struct NamedTensor {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double> values;
};

inline constexpr uint32_t kTensorContainerVersion = 1;

void save_named_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_named_tensors(const std::string& path);

template <typename T>
std::vector<NamedTensor> to_named_tensors(const std::map<std::string, Tensor<T>>& tensors) {
    std::vector<NamedTensor> out;
    out.reserve(tensors.size());
    for (const auto& [name, t] : tensors) {
        NamedTensor nt;
        nt.name = name;
        nt.shape = t.shape();
        nt.values.assign(t.data().begin(), t.data().end());
        out.push_back(std::move(nt));
    }
    return out;
}

template <typename T>
std::map<std::string, Tensor<T>> from_named_tensors(const std::vector<NamedTensor>& tensors,
                                                    bool requires_grad) {
    std::map<std::string, Tensor<T>> out;
    for (const auto& nt : tensors) {
        std::vector<T> v(nt.values.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(nt.values[i]);
        out.emplace(nt.name, Tensor<T>::from_data(nt.shape, std::move(v), requires_grad));
    }
    return out;
}

}  // namespace tacl
