#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vwapx/checkpoint.hpp"
#include "vwapx/dataset.hpp"
#include "vwapx/policy.hpp"
#include "vwapx/ushape.hpp"

namespace vwapx {

enum class Mode { Tul, Hul, HuPpo, PpoEqual, Naive, Oracle };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);
// Modes with trainable parameters (tul, hul, ppo); the rest are rule-based.
bool mode_trainable(Mode mode);
// Whether the mode runs the LSTM policy at gather time.
bool mode_uses_policy(Mode mode);

struct TrainConfig {
    Mode mode = Mode::Tul;
    int64_t outer_iterations = 10000;
    int inner_epochs = 10;
    int batch_size = 10; // trajectories per PPO minibatch
    double clip_eps = 0.2;
    double gamma = 1.0;
    double c1 = 0.5, c2 = 0.5; // J_TF coefficients
    double c3 = 1.0, c4 = 0.01; // J_PPO coefficients
    int days_per_iter = 0;      // 0 = per-mode default (12 for tul, 8 otherwise)
    double lr_policy_start = 5e-5, lr_policy_end = 1e-5;
    double lr_tf_start = 1e-3, lr_tf_end = 2e-4;
    double grad_clip = 0.5;
    int policy_feat_dim = 128;
    int policy_hidden = 0; // 0 = per-mode default (129 for tul, 128 otherwise)
    int tf_pffn_dim = 128;
    int tf_heads = 4;
    int n_hist = 20; // N historical ratios per encoder vector
    uint64_t seed = 1;
    int64_t checkpoint_every = 1000;
    int threads = 0; // 0 = hardware concurrency
    std::string resume_checkpoint;

    int resolved_days() const;
    int resolved_hidden() const;
    int resolved_threads() const;
    void validate() const;
};

// Networks plus parameter stores for one run. The transformer store stays
// empty for non-TUL modes.
struct Models {
    PolicyNet policy;
    std::optional<UshapeNet> ushape;
    nn::ParamStore policy_store;
    nn::ParamStore tf_store;

    static Models create(const TrainConfig& config);
    static Models from_checkpoint(const nn::Checkpoint& ckpt);
    void save(nn::Checkpoint& ckpt) const;
};

struct StepRecord {
    std::array<double, kStateDim> features{};
    double prev_action = 0.0; // multiplier
    double prev_reward = 0.0;
    int action = 0; // index
    double log_prob = 0.0;
    double value = 0.0;
    int reward = 0;
    int64_t executed = 0;
    double fill_price = 0.0;
};

struct IntervalTraj {
    int interval = 0;
    int64_t order = 0; // O^l
    std::array<StepRecord, kSubintervals> steps{};
    nn::Tensor h_last;            // [1, H], recorded for the decoder (TUL)
    double interval_price = 0.0;  // realized fill-price average Pbar_l
};

struct DayTraj {
    int day_index = 0;
    int64_t total_order = 0; // O
    std::vector<IntervalTraj> intervals;
    std::array<double, kIntervals> u_used{}; // level-1 weights actually applied
    std::array<double, kIntervals> u_true{};
    double vwap_day = 0.0;
    double mp_day = 0.0;
    double vaa_day = 0.0;
    nn::Tensor premarket_norm; // [1, 10]
    double mean_reward = 0.0;
};

struct GatherOptions {
    Mode mode = Mode::Tul;
    bool greedy = false;                 // eval-time argmax instead of sampling
    const nn::Tensor* e_in = nullptr;    // TUL: [L, N] encoder input
    const std::array<double, kIntervals>* hist_avg = nullptr; // hul / hu-ppo
};

// Runs Algorithm-2 episode gathering for one day. Deterministic in rng.
DayTraj gather_episodes(const Dataset& data, int day_index, const VolumeStats& stats,
                        Models& models, const GatherOptions& options, Rng& rng);

// Progressive integer allocation of O over intervals: carry-corrected rounding
// with the last interval absorbing the remainder; the result sums to O.
std::array<int64_t, kIntervals> allocate_interval_orders(int64_t O,
                                                         std::span<const double> weights);

// gamma-discounted suffix sums of rewards and advantages V_targ - V.
void compute_returns_advantages(const IntervalTraj& traj, double gamma,
                                std::array<double, kSubintervals>& v_targ,
                                std::array<double, kSubintervals>& advantage);

struct PpoBatch {
    PolicyNet::EvalSequences seq;
    std::vector<nn::Tensor> old_log_probs; // T entries of [B,1]
    std::vector<nn::Tensor> advantages;    // T entries of [B,1]
    std::vector<nn::Tensor> v_targets;     // T entries of [B,1]
};

PpoBatch make_ppo_batch(std::span<const IntervalTraj* const> trajs, double gamma);

struct PpoParts {
    nn::Value objective; // J_PPO (to maximize)
    nn::Value j_clip;
    nn::Value j_vf;
    nn::Value entropy;
};

// J_PPO = J_CLIP - c3 J_VF + c4 * mean entropy over the minibatch's steps.
PpoParts ppo_loss(nn::Graph& g, nn::ParamStore& store, const PolicyNet& policy,
                  const PpoBatch& batch, const TrainConfig& config);

struct IterationLog {
    int64_t iteration = 0;
    double mean_reward = 0.0;
    double j_tf = 0.0;
    double j_clip = 0.0;
    double j_vf = 0.0;
    double entropy = 0.0;
    double lr_policy = 0.0;
    double lr_tf = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    int64_t iterations = 0;
};

// Algorithm-1 outer loop. Writes train_log.csv (one line per outer iteration)
// and periodic checkpoints with full RNG state into out_dir.
TrainResult train(const TrainConfig& config, const Dataset& data, const std::string& out_dir,
                  std::ostream* info = nullptr);

// Checkpoint helpers shared by train/eval.
void save_train_checkpoint(const std::string& path, const Models& models, const TrainConfig& cfg,
                           int64_t iteration, const Rng& rng);
struct LoadedCheckpoint {
    Models models;
    Mode mode = Mode::Tul;
    int64_t iteration = 0;
    std::string rng_state;
};
LoadedCheckpoint load_train_checkpoint(const std::string& path);

} // namespace vwapx
