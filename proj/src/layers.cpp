#include "vwapx/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace vwapx::nn {

Value linear(Graph& g, Value x, Value W, Value b) {
    return g.add(g.matmul(x, W), b);
}

Value softmax(Graph& g, Value x, int axis) {
    if (axis == 1) return g.softmax_rows(x);
    if (axis == 0) return g.transpose(g.softmax_rows(g.transpose(x)));
    throw std::invalid_argument("softmax: axis must be 0 or 1");
}

Value layer_norm(Graph& g, Value x, Value gain, Value bias, double eps) {
    return g.layer_norm_rows(x, gain, bias, eps);
}

LstmState lstm_cell(Graph& g, Value x, LstmState state, const LstmWeights& w) {
    const int64_t hidden = state.h.val().cols();
    if (w.Wx.val().cols() != 4 * hidden)
        throw std::invalid_argument("lstm_cell: weight width != 4*hidden");
    Value gates = g.add(g.add(g.matmul(x, w.Wx), g.matmul(state.h, w.Wh)), w.b);
    Value i = g.sigmoid_(g.slice_cols(gates, 0, hidden));
    Value f = g.sigmoid_(g.slice_cols(gates, hidden, 2 * hidden));
    Value gg = g.tanh_(g.slice_cols(gates, 2 * hidden, 3 * hidden));
    Value o = g.sigmoid_(g.slice_cols(gates, 3 * hidden, 4 * hidden));
    Value c_next = g.add(g.mul(f, state.c), g.mul(i, gg));
    Value h_next = g.mul(o, g.tanh_(c_next));
    return {h_next, c_next};
}

Value multi_head_attention(Graph& g, Value q, Value k, Value v, const MhaWeights& w, int heads,
                           const Tensor* mask) {
    const int64_t d = q.val().cols();
    if (heads <= 0 || d % heads != 0)
        throw std::invalid_argument("multi_head_attention: model dim not divisible by heads");
    if (k.val().cols() != d || v.val().cols() != d)
        throw std::invalid_argument("multi_head_attention: q/k/v width mismatch");
    if (k.val().rows() != v.val().rows())
        throw std::invalid_argument("multi_head_attention: k/v length mismatch");
    const int64_t dh = d / heads;
    Value Q = linear(g, q, w.Wq, w.bq);
    Value K = linear(g, k, w.Wk, w.bk);
    Value V = linear(g, v, w.Wv, w.bv);
    Value mask_v;
    if (mask != nullptr) {
        if (mask->rows() != q.val().rows() || mask->cols() != k.val().rows())
            throw std::invalid_argument("multi_head_attention: mask shape mismatch");
        mask_v = g.constant(*mask);
    }
    std::vector<Value> head_outs;
    head_outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Value Qh = g.slice_cols(Q, h * dh, (h + 1) * dh);
        Value Kh = g.slice_cols(K, h * dh, (h + 1) * dh);
        Value Vh = g.slice_cols(V, h * dh, (h + 1) * dh);
        Value scores = g.scale(g.matmul_nt(Qh, Kh), 1.0 / std::sqrt(static_cast<double>(dh)));
        if (mask != nullptr) scores = g.add(scores, mask_v);
        Value attn = g.softmax_rows(scores);
        head_outs.push_back(g.matmul(attn, Vh));
    }
    Value merged = heads == 1 ? head_outs[0] : g.concat_cols(head_outs);
    return linear(g, merged, w.Wo, w.bo);
}

Value pffn(Graph& g, Value x, const PffnWeights& w) {
    return linear(g, g.relu_(linear(g, x, w.W1, w.b1)), w.W2, w.b2);
}

Tensor positional_encoding(int64_t len, int64_t d) {
    Tensor pe(len, d);
    for (int64_t pos = 0; pos < len; ++pos) {
        for (int64_t i = 0; i < d; i += 2) {
            const double angle =
                static_cast<double>(pos) /
                std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            pe.at(pos, i) = std::sin(angle);
            if (i + 1 < d) pe.at(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

Tensor causal_mask(int64_t n) {
    Tensor m(n, n, 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j) m.at(i, j) = -1e30;
    return m;
}

} // namespace vwapx::nn
