#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "vwapx/dataset.hpp"
#include "vwapx/trainer.hpp"

namespace vwapx {

struct EvalConfig {
    Mode mode = Mode::Oracle;
    bool greedy = false; // argmax actions instead of sampling
    uint64_t seed = 1;
    int threads = 0;
    std::string checkpoint; // required for tul/hul/ppo
    double hist_bin_bps = 5.0;

    int resolved_threads() const;
};

struct EvalDayRow {
    int index = 0;
    std::string date;
    int64_t total_order = 0;
    double mp_day = 0.0;
    double vwap_day = 0.0;
    double vaa_bps = 0.0;
};

struct EvalSummary {
    std::vector<EvalDayRow> rows;
    double mean_bps = 0.0;
    double std_bps = 0.0;          // population divisor
    double pct_within_10bps = 0.0; // boundary included
};

struct EvalResult {
    EvalSummary summary;
    std::vector<std::string> dates;
    std::vector<std::array<double, kIntervals>> u_true;
    std::vector<std::array<double, kIntervals>> u_pred; // level-1 weights used
};

// Runs the mode over every test day of the dataset. Deterministic in
// (checkpoint, tapes, seed); days evaluate independently (threads-capped).
EvalResult evaluate(const Dataset& data, const EvalConfig& config);
EvalResult evaluate(const Dataset& data, const EvalConfig& config, Models& models);

// Aggregate statistics from per-day VAAs (bps).
EvalSummary summarize(std::vector<EvalDayRow> rows);

// Deterministic binning [0,w), [w,2w), ...; counts up to the largest value.
std::vector<int64_t> histogram(std::span<const double> values_bps, double bin_width_bps);

struct UshapeReport {
    std::array<double, kIntervals> mean_true{};
    std::array<double, kIntervals> mean_pred{};
    std::array<double, kIntervals> mae{}; // mean |pred - true| per interval
};

UshapeReport ushape_report(std::span<const std::array<double, kIntervals>> u_true,
                           std::span<const std::array<double, kIntervals>> u_pred);

// summary.csv, vaa_histogram.{csv,svg}, ushape_avg.{csv,svg},
// ushape_day_<date>.svg under dir. Returns the summary.csv path.
std::string write_eval_artifacts(const std::string& dir, const EvalResult& result,
                                 double bin_width_bps);

} // namespace vwapx
