#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vwapx/market_data.hpp"

namespace vwapx {

// Discrete action a = index/10 in {0, 0.1, ..., 2}.
struct ActionValue {
    int index = 0;
    static constexpr int kCount = 21;
    double multiplier() const { return static_cast<double>(index) / 10.0; }
    static ActionValue from_index(int i);
    static ActionValue from_multiplier(double m);
};

// MDP state: the 20 public book features from the last snapshot preceding the
// current subinterval, plus (elapsed time, remaining volume).
struct EnvState {
    std::array<double, 2 * kBookLevels> prices{};  // bp1..bp5, ap1..ap5
    std::array<int64_t, 2 * kBookLevels> volumes{}; // bv1..bv5, av1..av5
    int t = 0;
    int64_t remaining = 0;
};

// How a subinterval order is filled against the tape.
enum class FillMode {
    SubintervalVwap, // spread evenly over the 12 execution steps; price = market VWAP
    FirstSlot,       // executed entirely in the first 5-second step; price = that slot's
};

struct StepResult {
    EnvState next;
    int reward = 0;
    int64_t executed = 0;
    double fill_price = 0.0;
    bool done = false;
};

struct IntervalStepRecord {
    EnvState state;
    ActionValue action;
    int reward = 0;
    int64_t executed = 0;
    double fill_price = 0.0;
};

struct IntervalEpisode {
    int interval = 0;
    int64_t total_order = 0;
    std::vector<IntervalStepRecord> steps;
};

struct DayAccounting {
    double mp_day = 0.0;
    double vwap_day = 0.0;
    double vaa = 0.0; // dimensionless; reports multiply by 1e4 for bps
};

// Per-day quantities the environment reads repeatedly (per-subinterval market
// volumes/VWAPs, state book snapshots, day totals). Immutable after build.
class DayView {
public:
    explicit DayView(const DayTape& tape);

    const DayTape& tape() const { return *tape_; }
    int64_t interval_volume(int l) const { return interval_volume_[static_cast<size_t>(l)]; }
    int64_t subinterval_volume(int l, int t) const { return sub_volume_[idx(l, t)]; }
    double subinterval_vwap(int l, int t) const { return sub_vwap_[idx(l, t)]; }
    double first_slot_vwap(int l, int t) const { return first_vwap_[idx(l, t)]; }
    double fill_price(int l, int t, FillMode mode) const {
        return mode == FillMode::SubintervalVwap ? subinterval_vwap(l, t)
                                                 : first_slot_vwap(l, t);
    }
    // Volume-weighted interval price (mean of subinterval VWAPs when the
    // interval traded nothing).
    double interval_vwap(int l) const;
    // Book snapshot backing the state at (l, t): the last slot strictly before
    // the subinterval's window, except (0, 0) which uses the opening slot.
    const LobSnapshot& state_lob(int l, int t) const;
    double first_mid() const { return first_mid_; }
    int64_t day_volume() const { return day_volume_; }
    const std::array<double, kIntervals>& ratios() const { return ratios_; }

private:
    static size_t idx(int l, int t);
    const DayTape* tape_;
    std::array<int64_t, kIntervals> interval_volume_{};
    std::vector<int64_t> sub_volume_;
    std::vector<double> sub_vwap_;
    std::vector<double> first_vwap_;
    std::array<double, kIntervals> ratios_{};
    double first_mid_ = 0.0;
    int64_t day_volume_ = 0;
};

// ---- operations --------------------------------------------------------------

// State at t=0 of interval l with remaining = O_l.
EnvState reset_interval(const DayView& view, int l, int64_t O_l);

// Last step takes the remainder; earlier steps are capped at the remainder.
int64_t restrict_order(int t, int64_t proposed, int64_t remaining);

// Market-proportional targets for interval l, largest-remainder rounded so
// they sum to O_l exactly. Errors on zero interval market volume.
std::array<int64_t, kSubintervals> target_orders(const DayView& view, int l, int64_t O_l);
int64_t target_order(const DayView& view, int l, int t, int64_t O_l);

// Eq-style three-branch reward on M = |executed - target|/target. A zero
// target yields +1 for zero executed and -1 otherwise.
int reward_fn(int64_t executed, int64_t target);

// One-episode simulator for interval l. Strictly sequential.
class IntervalEnv {
public:
    IntervalEnv(const DayView& view, int l, int64_t O_l,
                FillMode fill = FillMode::SubintervalVwap);

    const EnvState& state() const { return state_; }
    bool done() const { return t_ >= kSubintervals; }
    int interval() const { return l_; }
    int64_t total_order() const { return O_l_; }

    // proposed = round(a * O_l / T); executed through restrict_order; the fill
    // price follows the view's FillMode; reward compares against the target.
    StepResult step(ActionValue action);

    // Rule-based path: place an exact share count (still restricted). The
    // recorded action is the nearest multiplier.
    StepResult step_exact(int64_t shares);

    const IntervalEpisode& episode() const { return episode_; }

private:
    StepResult advance(ActionValue action, int64_t proposed);

    const DayView* view_;
    int l_;
    int64_t O_l_;
    FillMode fill_;
    int t_ = 0;
    EnvState state_;
    std::array<int64_t, kSubintervals> targets_{};
    bool have_targets_ = false;
    IntervalEpisode episode_;
};

// VWAP_day = sum_l sum_t (O*[l][t]/O) * p^l_t. Errors when O = 0.
double day_vwap(const DayView& view,
                const std::array<std::array<int64_t, kSubintervals>, kIntervals>& targets,
                FillMode fill = FillMode::SubintervalVwap);

// Day targets for a total order O: O split over intervals by market volume,
// then each interval split by target_orders.
std::array<std::array<int64_t, kSubintervals>, kIntervals> day_targets(const DayView& view,
                                                                       int64_t O);

// Order-weighted average fill price over 19 completed episodes; validates the
// full-liquidation invariant sum O^l_t = O.
double model_price(std::span<const IntervalEpisode> episodes, int64_t O);

// |MP - VWAP| / VWAP.
double vaa(double mp, double vwap);

} // namespace vwapx
