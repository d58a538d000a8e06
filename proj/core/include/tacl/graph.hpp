#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tacl/tensor.hpp"

namespace tacl {

// Record of one executed operation: which tensors went in, which came out,
// and closures that recompute the output (replay) or accumulate input
// gradients given the output gradient (backward).
template <typename T>
struct OpRecord {
    std::string op;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> forward;
    std::function<void()> backward;
};

// Set of tensors that received a gradient in one backward pass.
class GradMap {
public:
    void insert(const void* id) { ids_.insert(id); }
    template <typename T>
    bool contains(const Tensor<T>& t) const {
        return ids_.count(t.id()) > 0;
    }
    size_t size() const { return ids_.size(); }

private:
    std::unordered_set<const void*> ids_;
};

// Eager tape. Ops execute immediately and append a record; the record list
// is in topological order by construction. backward() walks it in reverse
// from the loss, accumulating exactly one gradient per reachable tensor.
template <typename T>
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    size_t size() const { return records_.size(); }
    const OpRecord<T>& record(size_t i) const { return records_[i]; }

    void add_record(OpRecord<T> rec) {
        producer_[rec.output.id()] = records_.size();
        records_.push_back(std::move(rec));
        backward_done_ = false;
    }

    bool produced_here(const Tensor<T>& t) const { return producer_.count(t.id()) > 0; }

    // Re-executes every recorded op in order. Deterministic ops (dropout
    // replays its stored mask) make this reproduce all outputs exactly.
    void replay() {
        for (auto& r : records_)
            if (r.forward) r.forward();
    }

    GradMap backward(const Tensor<T>& loss) {
        if (!loss.defined() || loss.numel() != 1)
            throw ShapeError("backward: loss must be a scalar tensor");
        auto it = producer_.find(loss.id());
        if (it == producer_.end())
            throw ValueError("backward: loss is detached from this graph");
        if (backward_done_)
            throw ValueError("backward: called twice without a new forward");

        size_t loss_idx = it->second;
        std::vector<char> reachable(records_.size(), 0);
        reachable[loss_idx] = 1;
        for (size_t i = loss_idx + 1; i-- > 0;) {
            if (!reachable[i]) continue;
            for (const auto& in : records_[i].inputs) {
                auto p = producer_.find(in.id());
                if (p != producer_.end()) reachable[p->second] = 1;
            }
        }

        // Fresh, zeroed buffers for every tensor touched by this pass.
        GradMap touched;
        std::unordered_set<const void*> zeroed;
        auto zero_once = [&](Tensor<T>& t) {
            if (zeroed.insert(t.id()).second) t.zero_grad();
        };
        for (size_t i = 0; i <= loss_idx; ++i) {
            if (!reachable[i]) continue;
            zero_once(records_[i].output);
            for (auto& in : records_[i].inputs)
                if (in.requires_grad()) zero_once(in);
        }

        Tensor<T> loss_mut = records_[loss_idx].output;
        loss_mut.grad()[0] = T(1);

        for (size_t i = loss_idx + 1; i-- > 0;) {
            if (!reachable[i] || !records_[i].backward) continue;
            records_[i].backward();
        }

        for (size_t i = 0; i <= loss_idx; ++i) {
            if (!reachable[i]) continue;
            if (records_[i].output.requires_grad()) touched.insert(records_[i].output.id());
            for (const auto& in : records_[i].inputs)
                if (in.requires_grad()) touched.insert(in.id());
        }
        backward_done_ = true;
        return touched;
    }

private:
    bool recording_;
    bool backward_done_ = false;
    std::vector<OpRecord<T>> records_;
    std::unordered_map<const void*, size_t> producer_;
};

}  // namespace tacl
