#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vwapx/exec_env.hpp"
#include "vwapx/graph.hpp"
#include "vwapx/layers.hpp"
#include "vwapx/rng.hpp"

namespace vwapx {

inline constexpr int kStateDim = 22;

// Normalized policy inputs: prices / day first mid, volumes and remaining
// volume / max(O_l, 1), elapsed time / T.
std::array<double, kStateDim> state_features(const DayView& view, const EnvState& state,
                                             int64_t O_l);

struct PolicyConfig {
    int state_dim = kStateDim;
    int feat_dim = 128; // the two input linears
    int hidden = 128;   // 128 for HUL/PPO, 129 for TUL (Table-4 H)
    int actions = ActionValue::kCount;
};

// Actor-critic LSTM: state -> two tanh linears -> concat(prev action, prev
// reward) -> LSTM cell -> policy softmax (21) and scalar value heads.
class PolicyNet {
public:
    explicit PolicyNet(PolicyConfig cfg) : cfg_(cfg) {}
    const PolicyConfig& config() const { return cfg_; }

    // Creates parameters under "policy/" in a deterministic order.
    void init(nn::ParamStore& store, Rng& rng) const;

    struct StepValues {
        nn::Value log_probs; // [B, actions]
        nn::Value probs;     // exp(log_probs)
        nn::Value value;     // [B, 1]
        nn::LstmState rec;
    };

    nn::LstmState initial_state(nn::Graph& g, int64_t batch) const;

    // One recurrent step. x [B, state_dim], prev [B, 2] = (a_{t-1}, r_{t-1}).
    StepValues forward_step(nn::Graph& g, nn::ParamStore& store, nn::Value x, nn::Value prev,
                            nn::LstmState rec) const;

    struct EvalSequences {
        std::vector<nn::Tensor> states;             // T entries of [B, state_dim]
        std::vector<nn::Tensor> prev;               // T entries of [B, 2]
        std::vector<std::vector<int64_t>> actions;  // T entries of B indices
    };

    struct EvalOut {
        std::vector<nn::Value> log_probs; // chosen-action log pi, [B,1] per step
        std::vector<nn::Value> values;    // [B,1] per step
        std::vector<nn::Value> entropies; // [B,1] per step
    };

    // Recomputes the forward pass under current parameters for PPO's ratio,
    // value, and entropy terms.
    EvalOut evaluate_actions(nn::Graph& g, nn::ParamStore& store, const EvalSequences& seq) const;

private:
    PolicyConfig cfg_;
};

// Categorical sample from a 21-way distribution; returns the action and
// log pi[action] as recorded (the log-softmax entry, not log of the prob).
struct SampledAction {
    ActionValue action;
    double log_prob = 0.0;
};
SampledAction sample_action(const nn::Tensor& probs, const nn::Tensor& log_probs, Rng& rng);

// Greedy variant: argmax probability, ties to the lower index.
SampledAction greedy_action(const nn::Tensor& probs, const nn::Tensor& log_probs);

} // namespace vwapx
