#include "vwapx/exec_env.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vwapx {

ActionValue ActionValue::from_index(int i) {
    if (i < 0 || i >= kCount)
        throw std::out_of_range("ActionValue: index " + std::to_string(i) + " not in [0,20]");
    return ActionValue{i};
}

ActionValue ActionValue::from_multiplier(double m) {
    const int i = static_cast<int>(std::llround(m * 10.0));
    if (i < 0 || i >= kCount || std::fabs(m * 10.0 - i) > 1e-9)
        throw std::out_of_range("ActionValue: multiplier not on the 0.1 grid in [0,2]");
    return ActionValue{i};
}

size_t DayView::idx(int l, int t) {
    return static_cast<size_t>(l) * kSubintervals + static_cast<size_t>(t);
}

DayView::DayView(const DayTape& tape) : tape_(&tape) {
    if (tape.slots.size() != kSlotsPerDay)
        throw std::runtime_error("DayView: tape has wrong slot count");
    sub_volume_.assign(kIntervals * kSubintervals, 0);
    sub_vwap_.assign(kIntervals * kSubintervals, 0.0);
    first_vwap_.assign(kIntervals * kSubintervals, 0.0);
    for (int l = 0; l < kIntervals; ++l) {
        int64_t iv = 0;
        for (int t = 0; t < kSubintervals; ++t) {
            int64_t vol = 0;
            double notional = 0.0;
            double vwap_sum = 0.0;
            const int base = l * kSlotsPerInterval + t * kExecSteps;
            for (int k = 0; k < kExecSteps; ++k) {
                const Slot& s = tape.slots[static_cast<size_t>(base + k)];
                vol += s.traded_volume;
                notional += static_cast<double>(s.traded_volume) * s.traded_vwap;
                vwap_sum += s.traded_vwap;
            }
            sub_volume_[idx(l, t)] = vol;
            sub_vwap_[idx(l, t)] = vol > 0 ? notional / static_cast<double>(vol)
                                           : vwap_sum / static_cast<double>(kExecSteps);
            first_vwap_[idx(l, t)] = tape.slots[static_cast<size_t>(base)].traded_vwap;
            iv += vol;
        }
        interval_volume_[static_cast<size_t>(l)] = iv;
        day_volume_ += iv;
    }
    ratios_ = interval_ratios(tape);
    const LobSnapshot& first = tape.slots[0].lob;
    first_mid_ = 0.5 * (first.bid_prices[0] + first.ask_prices[0]);
}

double DayView::interval_vwap(int l) const {
    if (l < 0 || l >= kIntervals) throw std::out_of_range("DayView::interval_vwap");
    double notional = 0.0, mean = 0.0;
    const int64_t vol = interval_volume(l);
    for (int t = 0; t < kSubintervals; ++t) {
        notional += static_cast<double>(subinterval_volume(l, t)) * subinterval_vwap(l, t);
        mean += subinterval_vwap(l, t);
    }
    return vol > 0 ? notional / static_cast<double>(vol)
                   : mean / static_cast<double>(kSubintervals);
}

const LobSnapshot& DayView::state_lob(int l, int t) const {
    if (l < 0 || l >= kIntervals || t < 0 || t >= kSubintervals)
        throw std::out_of_range("DayView::state_lob: (l,t) out of range");
    const int slot = l * kSlotsPerInterval + t * kExecSteps;
    // The day-opening state has no preceding slot; it reads the opening book.
    const int src = slot == 0 ? 0 : slot - 1;
    return tape_->slots[static_cast<size_t>(src)].lob;
}

namespace {

EnvState make_state(const DayView& view, int l, int t, int64_t remaining) {
    EnvState s;
    const LobSnapshot& lob = view.state_lob(l, t);
    for (int i = 0; i < kBookLevels; ++i) {
        s.prices[static_cast<size_t>(i)] = lob.bid_prices[i];
        s.prices[static_cast<size_t>(kBookLevels + i)] = lob.ask_prices[i];
        s.volumes[static_cast<size_t>(i)] = lob.bid_volumes[i];
        s.volumes[static_cast<size_t>(kBookLevels + i)] = lob.ask_volumes[i];
    }
    s.t = t;
    s.remaining = remaining;
    return s;
}

} // namespace

EnvState reset_interval(const DayView& view, int l, int64_t O_l) {
    if (l < 0 || l >= kIntervals)
        throw std::out_of_range("reset_interval: interval " + std::to_string(l));
    if (O_l < 0) throw std::invalid_argument("reset_interval: negative order");
    return make_state(view, l, 0, O_l);
}

int64_t restrict_order(int t, int64_t proposed, int64_t remaining) {
    if (remaining < 0) throw std::invalid_argument("restrict_order: negative remaining");
    if (t < 0 || t >= kSubintervals) throw std::out_of_range("restrict_order: bad t");
    if (t == kSubintervals - 1) return remaining;
    return std::min(std::max<int64_t>(proposed, 0), remaining);
}

std::array<int64_t, kSubintervals> target_orders(const DayView& view, int l, int64_t O_l) {
    if (l < 0 || l >= kIntervals) throw std::out_of_range("target_orders: bad interval");
    if (view.interval_volume(l) <= 0)
        throw std::runtime_error("target_orders: zero market volume in interval " +
                                 std::to_string(l));
    std::array<double, kSubintervals> w{};
    for (int t = 0; t < kSubintervals; ++t)
        w[static_cast<size_t>(t)] = static_cast<double>(view.subinterval_volume(l, t));
    const auto v = apportion(O_l, w);
    std::array<int64_t, kSubintervals> out{};
    for (int t = 0; t < kSubintervals; ++t) out[static_cast<size_t>(t)] = v[static_cast<size_t>(t)];
    return out;
}

int64_t target_order(const DayView& view, int l, int t, int64_t O_l) {
    if (t < 0 || t >= kSubintervals) throw std::out_of_range("target_order: bad t");
    return target_orders(view, l, O_l)[static_cast<size_t>(t)];
}

int reward_fn(int64_t executed, int64_t target) {
    if (target == 0) return executed == 0 ? 1 : -1;
    const double m = std::fabs(static_cast<double>(executed - target)) /
                     static_cast<double>(target);
    if (m < 0.01) return 1;
    if (m < 0.05) return 0;
    return -1;
}

IntervalEnv::IntervalEnv(const DayView& view, int l, int64_t O_l, FillMode fill)
    : view_(&view), l_(l), O_l_(O_l), fill_(fill) {
    state_ = reset_interval(view, l, O_l);
    episode_.interval = l;
    episode_.total_order = O_l;
    episode_.steps.reserve(kSubintervals);
    if (view.interval_volume(l) > 0) {
        targets_ = target_orders(view, l, O_l);
        have_targets_ = true;
    }
}

StepResult IntervalEnv::step(ActionValue action) {
    const int64_t proposed =
        std::llround(action.multiplier() * static_cast<double>(O_l_) /
                     static_cast<double>(kSubintervals));
    return advance(action, proposed);
}

StepResult IntervalEnv::step_exact(int64_t shares) {
    if (shares < 0) throw std::invalid_argument("IntervalEnv::step_exact: negative shares");
    ActionValue nearest{0};
    if (O_l_ > 0) {
        const int idx = static_cast<int>(std::llround(
            static_cast<double>(shares) * kSubintervals / static_cast<double>(O_l_) * 10.0));
        nearest.index = std::clamp(idx, 0, ActionValue::kCount - 1);
    }
    return advance(nearest, shares);
}

StepResult IntervalEnv::advance(ActionValue action, int64_t proposed) {
    if (done()) throw std::logic_error("IntervalEnv::step: episode already finished");
    const int t = t_;
    const int64_t executed = restrict_order(t, proposed, state_.remaining);
    const double price = view_->fill_price(l_, t, fill_);
    const int64_t target = have_targets_ ? targets_[static_cast<size_t>(t)] : 0;
    const int reward = reward_fn(executed, target);

    episode_.steps.push_back({state_, action, reward, executed, price});
    const int64_t remaining = state_.remaining - executed;
    t_ = t + 1;
    StepResult res;
    res.reward = reward;
    res.executed = executed;
    res.fill_price = price;
    res.done = t_ >= kSubintervals;
    if (!res.done) {
        state_ = make_state(*view_, l_, t_, remaining);
        res.next = state_;
    } else {
        state_.remaining = remaining; // zero by the last-step restriction
        res.next = state_;
    }
    return res;
}

std::array<std::array<int64_t, kSubintervals>, kIntervals> day_targets(const DayView& view,
                                                                       int64_t O) {
    std::array<double, kIntervals> w{};
    for (int l = 0; l < kIntervals; ++l)
        w[static_cast<size_t>(l)] = static_cast<double>(view.interval_volume(l));
    const auto per_interval = apportion(O, w);
    std::array<std::array<int64_t, kSubintervals>, kIntervals> out{};
    for (int l = 0; l < kIntervals; ++l)
        out[static_cast<size_t>(l)] = target_orders(view, l, per_interval[static_cast<size_t>(l)]);
    return out;
}

double day_vwap(const DayView& view,
                const std::array<std::array<int64_t, kSubintervals>, kIntervals>& targets,
                FillMode fill) {
    int64_t O = 0;
    for (const auto& row : targets)
        for (int64_t v : row) O += v;
    if (O <= 0) throw std::runtime_error("day_vwap: zero total order");
    double acc = 0.0;
    for (int l = 0; l < kIntervals; ++l)
        for (int t = 0; t < kSubintervals; ++t)
            acc += static_cast<double>(targets[static_cast<size_t>(l)][static_cast<size_t>(t)]) /
                   static_cast<double>(O) * view.fill_price(l, t, fill);
    return acc;
}

double model_price(std::span<const IntervalEpisode> episodes, int64_t O) {
    if (O <= 0) throw std::runtime_error("model_price: zero total order");
    int64_t executed_total = 0;
    double acc = 0.0;
    for (const IntervalEpisode& ep : episodes) {
        int64_t ep_total = 0;
        for (const IntervalStepRecord& r : ep.steps) {
            acc += static_cast<double>(r.executed) / static_cast<double>(O) * r.fill_price;
            ep_total += r.executed;
        }
        if (ep_total != ep.total_order)
            throw std::logic_error("model_price: episode " + std::to_string(ep.interval) +
                                   " violates full liquidation");
        executed_total += ep_total;
    }
    if (executed_total != O)
        throw std::logic_error("model_price: executed total != day order");
    return acc;
}

double vaa(double mp, double vwap) {
    if (!(vwap > 0.0)) throw std::invalid_argument("vaa: VWAP must be positive");
    return std::fabs((mp - vwap) / vwap);
}

} // namespace vwapx
