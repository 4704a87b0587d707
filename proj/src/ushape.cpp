#include "vwapx/ushape.hpp"

#include <stdexcept>
#include <string>

namespace vwapx {

using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Value;

UshapeNet::UshapeNet(UshapeConfig cfg) : cfg_(cfg) {
    if (cfg_.d_model <= cfg_.seq_len)
        throw std::invalid_argument("UshapeNet: d_model must exceed seq_len (needs L + hidden)");
    if (cfg_.heads <= 0 || cfg_.d_model % cfg_.heads != 0)
        throw std::invalid_argument("UshapeNet: heads must divide d_model");
    pe_ = nn::positional_encoding(cfg_.seq_len, cfg_.d_model);
    masks_.reserve(static_cast<size_t>(cfg_.seq_len));
    for (int n = 1; n <= cfg_.seq_len; ++n) masks_.push_back(nn::causal_mask(n));
}

void UshapeNet::init(ParamStore& store, Rng& rng) const {
    for (int l = 0; l < cfg_.seq_len; ++l)
        nn::init_linear(store, "encoder/emb" + std::to_string(l), cfg_.n_hist, cfg_.d_model, rng);
    nn::init_mha(store, "encoder/attn", cfg_.d_model, rng);
    nn::init_layer_norm(store, "encoder/ln1", cfg_.d_model);
    nn::init_layer_norm(store, "encoder/ln2", cfg_.d_model);
    nn::init_pffn(store, "encoder/pffn", cfg_.d_model, cfg_.pffn_dim, rng);

    nn::init_linear(store, "decoder/premarket", cfg_.premarket_dim, cfg_.d_model, rng);
    nn::init_mha(store, "decoder/self", cfg_.d_model, rng);
    nn::init_mha(store, "decoder/cross", cfg_.d_model, rng);
    nn::init_layer_norm(store, "decoder/ln1", cfg_.d_model);
    nn::init_layer_norm(store, "decoder/ln2", cfg_.d_model);
    nn::init_layer_norm(store, "decoder/ln3", cfg_.d_model);
    nn::init_pffn(store, "decoder/pffn", cfg_.d_model, cfg_.pffn_dim, rng);
    for (int l = 0; l < cfg_.seq_len; ++l)
        nn::init_linear(store, "decoder/out" + std::to_string(l), cfg_.d_model,
                        cfg_.seq_len - l, rng);
}

Value UshapeNet::encode(Graph& g, ParamStore& store, const Tensor& e_in) const {
    if (e_in.rows() != cfg_.seq_len || e_in.cols() != cfg_.n_hist)
        throw std::invalid_argument("encode: E_in must be [L, N], got " + e_in.shape_str());
    Value input = g.constant(e_in);
    std::vector<Value> rows;
    rows.reserve(static_cast<size_t>(cfg_.seq_len));
    for (int l = 0; l < cfg_.seq_len; ++l) {
        Value r = g.slice_rows(input, l, l + 1);
        rows.push_back(nn::linear_named(g, store, "encoder/emb" + std::to_string(l), r));
    }
    Value x = g.add(g.concat_rows(rows), g.constant(pe_));
    Value attn =
        nn::multi_head_attention(g, x, x, x, nn::mha_weights(g, store, "encoder/attn"),
                                 cfg_.heads, nullptr);
    Value y = nn::layer_norm_named(g, store, "encoder/ln1", g.add(x, attn));
    Value ff = nn::pffn(g, y, nn::pffn_weights(g, store, "encoder/pffn"));
    return nn::layer_norm_named(g, store, "encoder/ln2", g.add(y, ff));
}

Value UshapeNet::build_d0(Graph& g, ParamStore& store, const Tensor& premarket) const {
    if (premarket.rows() != 1 || premarket.cols() != cfg_.premarket_dim)
        throw std::invalid_argument("build_d0: premarket must be [1, " +
                                    std::to_string(cfg_.premarket_dim) + "]");
    return nn::linear_named(g, store, "decoder/premarket", g.constant(premarket));
}

UshapeNet::Decoder::Decoder(Graph& g, ParamStore& store, const UshapeNet& net, Value e_out,
                            Value d0)
    : g_(&g), store_(&store), net_(&net), e_out_(e_out) {
    if (d0.val().rows() != 1 || d0.val().cols() != net.cfg_.d_model)
        throw std::invalid_argument("Decoder: D_in[0] must be [1, d_model]");
    rows_.push_back(d0);
    remaining_ = g.constant_scalar(1.0);
}

UshapeNet::DecodeStep UshapeNet::Decoder::step(int l) {
    if (l != next_) throw std::logic_error("Decoder: steps must be taken in order");
    if (awaiting_hidden_) throw std::logic_error("Decoder: push_hidden before the next step");
    const UshapeConfig& cfg = net_->cfg_;
    if (l >= cfg.seq_len) throw std::out_of_range("Decoder: step beyond L");
    Graph& g = *g_;

    Value x = rows_.size() == 1 ? rows_[0] : g.concat_rows(rows_);
    Value pe = g.constant([&] {
        Tensor t(l + 1, cfg.d_model);
        for (int i = 0; i <= l; ++i)
            for (int j = 0; j < cfg.d_model; ++j) t.at(i, j) = net_->pe_.at(i, j);
        return t;
    }());
    x = g.add(x, pe);
    const Tensor& mask = net_->masks_[static_cast<size_t>(l)];
    Value self_attn = nn::multi_head_attention(
        g, x, x, x, nn::mha_weights(g, *store_, "decoder/self"), cfg.heads, &mask);
    Value y1 = nn::layer_norm_named(g, *store_, "decoder/ln1", g.add(x, self_attn));
    Value cross = nn::multi_head_attention(g, y1, e_out_, e_out_,
                                           nn::mha_weights(g, *store_, "decoder/cross"),
                                           cfg.heads, nullptr);
    Value y2 = nn::layer_norm_named(g, *store_, "decoder/ln2", g.add(y1, cross));
    Value ff = nn::pffn(g, y2, nn::pffn_weights(g, *store_, "decoder/pffn"));
    Value z = nn::layer_norm_named(g, *store_, "decoder/ln3", g.add(y2, ff));

    Value last = g.slice_rows(z, l, l + 1);
    Value logits = nn::linear_named(g, *store_, "decoder/out" + std::to_string(l), last);
    Value soft = g.softmax_rows(logits); // [1, L - l]
    Value d_out = soft;
    if (l > 0) d_out = g.concat_cols({g.constant(Tensor(1, l, 0.0)), soft});
    Value frac = g.slice_cols(soft, 0, 1);
    Value u = g.mul(remaining_, frac);
    remaining_ = g.sub(remaining_, u);
    u_preds_.push_back(u);
    d_outs_.push_back(d_out);
    next_ = l + 1;
    awaiting_hidden_ = next_ < cfg.seq_len;
    return {u, d_out};
}

void UshapeNet::Decoder::push_hidden(const Tensor& h_last) {
    if (!awaiting_hidden_) throw std::logic_error("Decoder: no pending hidden slot");
    const UshapeConfig& cfg = net_->cfg_;
    if (h_last.rows() != 1 || h_last.cols() != cfg.hidden())
        throw std::invalid_argument("Decoder: hidden must be [1, d_model - L], got " +
                                    h_last.shape_str());
    // D_in[l+1] = concat(d_out[l], h^l_{T-1}); the hidden enters detached.
    rows_.push_back(g_->concat_cols({d_outs_.back(), g_->constant(h_last)}));
    awaiting_hidden_ = false;
}

Value UshapeNet::Decoder::u_pred_row() const {
    if (static_cast<int>(u_preds_.size()) != net_->cfg_.seq_len)
        throw std::logic_error("Decoder: decode incomplete");
    return g_->concat_cols(u_preds_);
}

Value tf_loss(Graph& g, Value u_pred_row, std::span<const double> u_true,
              std::span<const double> interval_price, double vwap, double c1, double c2) {
    const int64_t L = u_pred_row.val().cols();
    if (u_pred_row.val().rows() != 1 || static_cast<int64_t>(u_true.size()) != L ||
        static_cast<int64_t>(interval_price.size()) != L)
        throw std::invalid_argument("tf_loss: length mismatch");
    if (!(vwap > 0.0)) throw std::invalid_argument("tf_loss: VWAP must be positive");
    Value truth = g.constant(Tensor::row({u_true.begin(), u_true.end()}));
    Value mse = g.scale(g.sum_all(g.square_(g.sub(truth, u_pred_row))),
                        c1 / static_cast<double>(L));
    Value prices = g.constant(Tensor::row({interval_price.begin(), interval_price.end()}));
    Value mp = g.sum_all(g.mul(u_pred_row, prices));
    Value dev = g.scale(g.abs_(g.add_const(mp, -vwap)), c2 / vwap);
    return g.add(mse, dev);
}

} // namespace vwapx
