#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vwapx/rng.hpp"
#include "vwapx/tensor.hpp"

namespace vwapx::nn {

// Flat registry of named parameter tensors with gradient accumulators and
// Adam moment buffers. Iteration order is the name order (std::map), which
// keeps initialization and updates deterministic.
struct ParamStore {
    struct Entry {
        Tensor value;
        Tensor grad;
        Tensor m;
        Tensor v;
    };

    std::map<std::string, Entry> entries;
    int64_t adam_step_count = 0;

    Tensor& create(const std::string& name, Tensor init) {
        if (entries.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
        Entry e;
        e.grad = Tensor(init.rows(), init.cols(), 0.0);
        e.m = Tensor(init.rows(), init.cols(), 0.0);
        e.v = Tensor(init.rows(), init.cols(), 0.0);
        e.value = std::move(init);
        return entries.emplace(name, std::move(e)).first->second.value;
    }

    Entry& get(const std::string& name) {
        auto it = entries.find(name);
        if (it == entries.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
        return it->second;
    }
    const Entry& get(const std::string& name) const {
        auto it = entries.find(name);
        if (it == entries.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return entries.count(name) != 0; }

    void zero_grad() {
        for (auto& [name, e] : entries) e.grad.fill(0.0);
    }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& [name, e] : entries) n += e.value.size();
        return n;
    }
};

// Linear/LSTM weight init: uniform in +-1/sqrt(fan_in); biases zero.
inline Tensor uniform_init(int64_t rows, int64_t cols, int64_t fan_in, Rng& rng) {
    Tensor t(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

// Creates "<prefix>.W" [in x out] and "<prefix>.b" [1 x out].
inline void init_linear(ParamStore& store, const std::string& prefix, int64_t in, int64_t out,
                        Rng& rng) {
    store.create(prefix + ".W", uniform_init(in, out, in, rng));
    store.create(prefix + ".b", Tensor(1, out, 0.0));
}

double global_grad_norm(const ParamStore& store);
void clip_grad_norm(ParamStore& store, double max_norm);

// One Adam update over every entry in the store (bias-corrected moments).
void adam_step(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// lr_start + (lr_end - lr_start) * min(step/total, 1)
double linear_anneal(double lr_start, double lr_end, int64_t step, int64_t total);

} // namespace vwapx::nn
