#pragma once

#include <string>
#include <vector>

#include "vwapx/graph.hpp"
#include "vwapx/layers.hpp"
#include "vwapx/market_data.hpp"
#include "vwapx/rng.hpp"

namespace vwapx {

struct UshapeConfig {
    int seq_len = kIntervals; // L
    int n_hist = 20;          // N historical ratios per interval vector
    int d_model = 148;        // L + LSTM hidden (19 + 129)
    int pffn_dim = 128;
    int heads = 4;
    int premarket_dim = 10;
    int hidden() const { return d_model - seq_len; } // width of h^l_{T-1}
};

// One-layer Transformer encoder/decoder predicting the L interval volume
// ratios progressively. Interval-specific embedding and output linears.
class UshapeNet {
public:
    explicit UshapeNet(UshapeConfig cfg);
    const UshapeConfig& config() const { return cfg_; }

    // Creates parameters under "encoder/" and "decoder/".
    void init(nn::ParamStore& store, Rng& rng) const;

    // e_in rows are per-interval vectors of n_hist historical ratios; output
    // is the encoded sequence [L, d_model].
    nn::Value encode(nn::Graph& g, nn::ParamStore& store, const nn::Tensor& e_in) const;

    // Premarket embedding: D_in[0], shape [1, d_model].
    nn::Value build_d0(nn::Graph& g, nn::ParamStore& store, const nn::Tensor& premarket) const;

    struct DecodeStep {
        nn::Value u_pred; // [1,1]
        nn::Value d_out;  // [1, L], first l entries exactly zero
    };

    // Progressive decoder over one day. Steps must be taken in order; after
    // step l (< L-1) the episode's last hidden vector is appended to form
    // D_in[l+1] = concat(d_out[l], h^l).
    class Decoder {
    public:
        Decoder(nn::Graph& g, nn::ParamStore& store, const UshapeNet& net, nn::Value e_out,
                nn::Value d0);
        DecodeStep step(int l);
        void push_hidden(const nn::Tensor& h_last); // [1, hidden]
        nn::Value u_pred_row() const;               // [1, L] after all steps
        const std::vector<nn::Value>& u_preds() const { return u_preds_; }
        const std::vector<nn::Value>& d_outs() const { return d_outs_; }

    private:
        nn::Graph* g_;
        nn::ParamStore* store_;
        const UshapeNet* net_;
        nn::Value e_out_;
        std::vector<nn::Value> rows_; // D_in rows, each [1, d_model]
        nn::Value remaining_;         // 1 - sum of previous u_preds
        std::vector<nn::Value> u_preds_;
        std::vector<nn::Value> d_outs_;
        int next_ = 0;
        bool awaiting_hidden_ = false;
    };

private:
    UshapeConfig cfg_;
    nn::Tensor pe_;       // positional encoding, [L, d_model]
    std::vector<nn::Tensor> masks_; // causal masks per prefix length
    friend class Decoder;
};

// J_TF = (c1/L) sum_l (u_true - u_pred)^2 + c2 |MP(u) - VWAP| / VWAP where
// MP(u) = sum_l u_pred[l] * interval_price[l] (realized fill fractions held
// fixed). u_true and interval_price have L entries; VWAP must be positive.
nn::Value tf_loss(nn::Graph& g, nn::Value u_pred_row, std::span<const double> u_true,
                  std::span<const double> interval_price, double vwap, double c1, double c2);

} // namespace vwapx
