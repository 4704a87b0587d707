#include "vwapx/policy.hpp"

#include <algorithm>
#include <stdexcept>

namespace vwapx {

using nn::Graph;
using nn::LstmState;
using nn::ParamStore;
using nn::Tensor;
using nn::Value;

std::array<double, kStateDim> state_features(const DayView& view, const EnvState& state,
                                             int64_t O_l) {
    std::array<double, kStateDim> f{};
    const double p0 = view.first_mid();
    const double vnorm = static_cast<double>(std::max<int64_t>(O_l, 1));
    for (int i = 0; i < 2 * kBookLevels; ++i) {
        f[static_cast<size_t>(i)] = state.prices[static_cast<size_t>(i)] / p0;
        f[static_cast<size_t>(2 * kBookLevels + i)] =
            static_cast<double>(state.volumes[static_cast<size_t>(i)]) / vnorm;
    }
    f[20] = static_cast<double>(state.t) / static_cast<double>(kSubintervals);
    f[21] = static_cast<double>(state.remaining) / vnorm;
    return f;
}

void PolicyNet::init(ParamStore& store, Rng& rng) const {
    nn::init_linear(store, "policy/in1", cfg_.state_dim, cfg_.feat_dim, rng);
    nn::init_linear(store, "policy/in2", cfg_.feat_dim, cfg_.feat_dim, rng);
    nn::init_lstm(store, "policy/lstm", cfg_.feat_dim + 2, cfg_.hidden, rng);
    nn::init_linear(store, "policy/pi", cfg_.hidden, cfg_.actions, rng);
    nn::init_linear(store, "policy/v", cfg_.hidden, 1, rng);
}

LstmState PolicyNet::initial_state(Graph& g, int64_t batch) const {
    return {g.constant(Tensor(batch, cfg_.hidden, 0.0)),
            g.constant(Tensor(batch, cfg_.hidden, 0.0))};
}

PolicyNet::StepValues PolicyNet::forward_step(Graph& g, ParamStore& store, Value x, Value prev,
                                              LstmState rec) const {
    if (x.val().cols() != cfg_.state_dim)
        throw std::invalid_argument("PolicyNet: state width != state_dim");
    if (prev.val().cols() != 2 || prev.val().rows() != x.val().rows())
        throw std::invalid_argument("PolicyNet: prev action/reward must be [B,2]");
    Value h1 = g.tanh_(nn::linear_named(g, store, "policy/in1", x));
    Value h2 = g.tanh_(nn::linear_named(g, store, "policy/in2", h1));
    Value lstm_in = g.concat_cols({h2, prev});
    LstmState next = nn::lstm_cell(g, lstm_in, rec, nn::lstm_weights(g, store, "policy/lstm"));
    Value logits = nn::linear_named(g, store, "policy/pi", next.h);
    Value log_probs = g.log_softmax_rows(logits);
    Value probs = g.exp_(log_probs);
    Value value = nn::linear_named(g, store, "policy/v", next.h);
    return {log_probs, probs, value, next};
}

PolicyNet::EvalOut PolicyNet::evaluate_actions(Graph& g, ParamStore& store,
                                               const EvalSequences& seq) const {
    if (seq.states.size() != seq.prev.size() || seq.states.size() != seq.actions.size())
        throw std::invalid_argument("evaluate_actions: sequence length mismatch");
    if (seq.states.empty()) throw std::invalid_argument("evaluate_actions: empty sequences");
    const int64_t batch = seq.states[0].rows();
    EvalOut out;
    LstmState rec = initial_state(g, batch);
    for (size_t t = 0; t < seq.states.size(); ++t) {
        if (seq.states[t].rows() != batch ||
            static_cast<int64_t>(seq.actions[t].size()) != batch)
            throw std::invalid_argument("evaluate_actions: ragged batch");
        Value x = g.constant(seq.states[t]);
        Value prev = g.constant(seq.prev[t]);
        StepValues sv = forward_step(g, store, x, prev, rec);
        rec = sv.rec;
        out.log_probs.push_back(g.gather_cols(sv.log_probs, seq.actions[t]));
        out.values.push_back(sv.value);
        // S[pi](s) = -sum_a pi log pi
        out.entropies.push_back(g.scale(g.row_sum(g.mul(sv.probs, sv.log_probs)), -1.0));
    }
    return out;
}

SampledAction sample_action(const Tensor& probs, const Tensor& log_probs, Rng& rng) {
    if (probs.rows() != 1 || probs.cols() != ActionValue::kCount)
        throw std::invalid_argument("sample_action: want a 1x21 distribution");
    const double u = rng.uniform();
    double acc = 0.0;
    int idx = ActionValue::kCount - 1;
    for (int i = 0; i < ActionValue::kCount; ++i) {
        acc += probs[i];
        if (u < acc) {
            idx = i;
            break;
        }
    }
    return {ActionValue::from_index(idx), log_probs[idx]};
}

SampledAction greedy_action(const Tensor& probs, const Tensor& log_probs) {
    if (probs.rows() != 1 || probs.cols() != ActionValue::kCount)
        throw std::invalid_argument("greedy_action: want a 1x21 distribution");
    int idx = 0;
    for (int i = 1; i < ActionValue::kCount; ++i)
        if (probs[i] > probs[idx]) idx = i;
    return {ActionValue::from_index(idx), log_probs[idx]};
}

} // namespace vwapx
