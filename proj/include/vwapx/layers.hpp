#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vwapx/graph.hpp"
#include "vwapx/optim.hpp"

namespace vwapx::nn {

// y = x * W + b, x [m,in], W [in,out], b [1,out]
Value linear(Graph& g, Value x, Value W, Value b);

// softmax along axis 1 (rows, default) or axis 0 (columns).
Value softmax(Graph& g, Value x, int axis = 1);

Value layer_norm(Graph& g, Value x, Value gain, Value bias, double eps = 1e-5);

struct LstmState {
    Value h;
    Value c;
};

struct LstmWeights {
    Value Wx; // [input, 4H] gate order: i, f, g, o
    Value Wh; // [H, 4H]
    Value b;  // [1, 4H]
};

// One LSTM cell step for a batch of rows: x [B,input], h/c [B,H].
LstmState lstm_cell(Graph& g, Value x, LstmState state, const LstmWeights& w);

struct MhaWeights {
    Value Wq, bq;
    Value Wk, bk;
    Value Wv, bv;
    Value Wo, bo;
};

// Scaled dot-product multi-head attention. q [Lq,d], k/v [Lk,d]; mask, when
// present, is [Lq,Lk] added to the scores (0 = keep, large negative = block).
Value multi_head_attention(Graph& g, Value q, Value k, Value v, const MhaWeights& w, int heads = 4,
                           const Tensor* mask = nullptr);

struct PffnWeights {
    Value W1, b1; // [d, inner]
    Value W2, b2; // [inner, d]
};

// Position-wise feed-forward: relu(x W1 + b1) W2 + b2.
Value pffn(Graph& g, Value x, const PffnWeights& w);

// ---- parameter bundles ------------------------------------------------------

inline void init_lstm(ParamStore& store, const std::string& prefix, int64_t input, int64_t hidden,
                      Rng& rng) {
    store.create(prefix + ".Wx", uniform_init(input, 4 * hidden, input, rng));
    store.create(prefix + ".Wh", uniform_init(hidden, 4 * hidden, hidden, rng));
    store.create(prefix + ".b", Tensor(1, 4 * hidden, 0.0));
}

inline LstmWeights lstm_weights(Graph& g, ParamStore& store, const std::string& prefix) {
    return {g.param(store, prefix + ".Wx"), g.param(store, prefix + ".Wh"),
            g.param(store, prefix + ".b")};
}

inline Value linear_named(Graph& g, ParamStore& store, const std::string& prefix, Value x) {
    return linear(g, x, g.param(store, prefix + ".W"), g.param(store, prefix + ".b"));
}

inline void init_mha(ParamStore& store, const std::string& prefix, int64_t d, Rng& rng) {
    init_linear(store, prefix + ".q", d, d, rng);
    init_linear(store, prefix + ".k", d, d, rng);
    init_linear(store, prefix + ".v", d, d, rng);
    init_linear(store, prefix + ".o", d, d, rng);
}

inline MhaWeights mha_weights(Graph& g, ParamStore& store, const std::string& prefix) {
    return {g.param(store, prefix + ".q.W"), g.param(store, prefix + ".q.b"),
            g.param(store, prefix + ".k.W"), g.param(store, prefix + ".k.b"),
            g.param(store, prefix + ".v.W"), g.param(store, prefix + ".v.b"),
            g.param(store, prefix + ".o.W"), g.param(store, prefix + ".o.b")};
}

inline void init_pffn(ParamStore& store, const std::string& prefix, int64_t d, int64_t inner,
                      Rng& rng) {
    init_linear(store, prefix + ".1", d, inner, rng);
    init_linear(store, prefix + ".2", inner, d, rng);
}

inline PffnWeights pffn_weights(Graph& g, ParamStore& store, const std::string& prefix) {
    return {g.param(store, prefix + ".1.W"), g.param(store, prefix + ".1.b"),
            g.param(store, prefix + ".2.W"), g.param(store, prefix + ".2.b")};
}

inline void init_layer_norm(ParamStore& store, const std::string& prefix, int64_t d) {
    store.create(prefix + ".g", Tensor(1, d, 1.0));
    store.create(prefix + ".b", Tensor(1, d, 0.0));
}

inline Value layer_norm_named(Graph& g, ParamStore& store, const std::string& prefix, Value x) {
    return layer_norm(g, x, g.param(store, prefix + ".g"), g.param(store, prefix + ".b"));
}

// Sinusoidal positional encoding, rows = positions.
Tensor positional_encoding(int64_t len, int64_t d);

// Lower-triangular (causal) additive attention mask of size n x n.
Tensor causal_mask(int64_t n);

} // namespace vwapx::nn
