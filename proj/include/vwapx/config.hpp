#pragma once

#include <cstdint>
#include <string>

#include "vwapx/dataset.hpp"
#include "vwapx/eval_report.hpp"
#include "vwapx/trainer.hpp"

namespace vwapx {

// Effective run configuration: every knob of every subcommand with its
// default. Parsed from a key=value file ('#' comments); unknown keys are
// rejected; emit() -> parse() -> emit() is byte-identical.
struct RunConfig {
    uint64_t seed = 1;
    int threads = 0; // 0 = hardware concurrency
    std::string mode = "tul";
    std::string data_dir;
    std::string out_dir = "out";

    // synth
    int synth_days_warmup = kVolumeWindowDays;
    int synth_days_train = 60;
    int synth_days_test = 20;
    std::string synth_start_date = "2021-01-04";
    double synth_base_price = 70000.0;
    double synth_tick_size = 100.0;
    double synth_daily_volume = 17e6;
    double synth_volume_sigma = 0.15;
    double synth_u_amplitude = 2.0;
    double synth_u_noise = 0.1;
    double synth_price_vol = 0.015;
    double synth_slot_noise = 0.15;
    int synth_spread_ticks = 1;
    double synth_depth_scale = 3000.0;

    // train
    int64_t train_outer_iterations = 10000;
    int train_inner_epochs = 10;
    int train_batch_size = 10;
    double train_clip_eps = 0.2;
    double train_gamma = 1.0;
    double train_c1 = 0.5;
    double train_c2 = 0.5;
    double train_c3 = 1.0;
    double train_c4 = 0.01;
    int train_days_per_iter = 0;
    double train_lr_policy_start = 5e-5;
    double train_lr_policy_end = 1e-5;
    double train_lr_tf_start = 1e-3;
    double train_lr_tf_end = 2e-4;
    double train_grad_clip = 0.5;
    int train_policy_feat_dim = 128;
    int train_policy_hidden = 0;
    int train_tf_pffn_dim = 128;
    int train_tf_heads = 4;
    int train_n_hist = 20;
    int64_t train_checkpoint_every = 1000;
    std::string train_resume;

    // eval
    bool eval_greedy = false;
    std::string eval_checkpoint;
    double eval_hist_bin_bps = 5.0;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text, const std::string& origin = "<string>");
    std::string emit() const;

    SynthDatasetConfig synth_config() const;
    TrainConfig train_config() const;
    EvalConfig eval_config() const;
};

} // namespace vwapx
