#include "vwapx/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vwapx {

namespace {

[[noreturn]] void tape_error(const std::string& path, int64_t line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

void check_lob(const LobSnapshot& lob, const std::string& path, int64_t line) {
    for (int i = 1; i < kBookLevels; ++i) {
        if (!(lob.bid_prices[i] < lob.bid_prices[i - 1]))
            tape_error(path, line, "bid prices not strictly descending");
        if (!(lob.ask_prices[i] > lob.ask_prices[i - 1]))
            tape_error(path, line, "ask prices not strictly ascending");
    }
    if (!(lob.ask_prices[0] > lob.bid_prices[0]))
        tape_error(path, line, "crossed book: ask " + std::to_string(lob.ask_prices[0]) +
                                   " <= bid " + std::to_string(lob.bid_prices[0]));
    for (int i = 0; i < kBookLevels; ++i)
        if (lob.bid_volumes[i] < 0 || lob.ask_volumes[i] < 0)
            tape_error(path, line, "negative book volume");
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::logic_error("format_double failed");
    return std::string(buf, p);
}

double parse_double(std::string_view s, const std::string& path, int64_t line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        tape_error(path, line, "malformed number '" + std::string(s) + "'");
    return v;
}

int64_t parse_int(std::string_view s, const std::string& path, int64_t line) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        tape_error(path, line, "malformed integer '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    size_t pos = 0;
    while (true) {
        size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

} // namespace

void validate_tape(const DayTape& tape) {
    const std::string where = "tape(" + tape.date + ")";
    if (tape.slots.size() != kSlotsPerDay)
        throw std::runtime_error(where + ": slot count " + std::to_string(tape.slots.size()) +
                                 " != " + std::to_string(kSlotsPerDay));
    int64_t prev_ts = -1;
    for (size_t i = 0; i < tape.slots.size(); ++i) {
        const Slot& s = tape.slots[i];
        const int64_t line = static_cast<int64_t>(i) + 1;
        if (s.lob.timestamp_ms <= prev_ts)
            tape_error(where, line, "timestamps not strictly increasing");
        prev_ts = s.lob.timestamp_ms;
        check_lob(s.lob, where, line);
        if (s.traded_volume < 0) tape_error(where, line, "negative traded volume");
        if (!(s.traded_vwap > 0.0)) tape_error(where, line, "nonpositive traded vwap");
    }
    for (double v : tape.premarket)
        if (v < 0.0 || !std::isfinite(v))
            throw std::runtime_error(where + ": premarket entries must be nonnegative");
}

void write_tape(const std::string& path, const DayTape& tape) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "vwapx-tape,v1," << tape.date << "\n";
    for (const Slot& s : tape.slots) {
        os << s.lob.timestamp_ms;
        for (int i = 0; i < kBookLevels; ++i) os << ',' << format_double(s.lob.bid_prices[i]);
        for (int i = 0; i < kBookLevels; ++i) os << ',' << s.lob.bid_volumes[i];
        for (int i = 0; i < kBookLevels; ++i) os << ',' << format_double(s.lob.ask_prices[i]);
        for (int i = 0; i < kBookLevels; ++i) os << ',' << s.lob.ask_volumes[i];
        os << ',' << s.traded_volume << ',' << format_double(s.traded_vwap) << "\n";
    }
    for (size_t i = 0; i < tape.premarket.size(); ++i)
        os << (i ? "," : "") << format_double(tape.premarket[i]);
    os << "\n";
    if (!os) throw std::runtime_error("write failed: " + path);
}

DayTape ingest_tape(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open tape: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!lines.empty() && line.empty()) continue; // tolerate a trailing newline
        lines.push_back(line);
    }
    if (lines.empty()) tape_error(path, 1, "empty file");
    auto header = split_csv(lines[0]);
    if (header.size() != 3 || header[0] != "vwapx-tape" || header[1] != "v1")
        tape_error(path, 1, "bad header (want 'vwapx-tape,v1,<date>')");
    // Layout: header, slot rows, one premarket row. Count first so a short
    // file reports the slot deficit rather than a confusing field error.
    if (lines.size() < 3) tape_error(path, static_cast<int64_t>(lines.size()), "truncated tape");
    const int64_t n_slots = static_cast<int64_t>(lines.size()) - 2;
    if (n_slots != kSlotsPerDay)
        throw std::runtime_error(path + ": slot count " + std::to_string(n_slots) +
                                 " != " + std::to_string(kSlotsPerDay));
    DayTape tape;
    tape.date = std::string(header[2]);
    tape.slots.reserve(kSlotsPerDay);
    for (int64_t r = 0; r < n_slots; ++r) {
        const int64_t lineno = r + 2;
        auto f = split_csv(lines[static_cast<size_t>(r + 1)]);
        if (f.size() != 23)
            tape_error(path, lineno, "expected 23 fields, got " + std::to_string(f.size()));
        Slot s;
        s.lob.timestamp_ms = parse_int(f[0], path, lineno);
        for (int i = 0; i < kBookLevels; ++i) s.lob.bid_prices[i] = parse_double(f[1 + i], path, lineno);
        for (int i = 0; i < kBookLevels; ++i) s.lob.bid_volumes[i] = parse_int(f[6 + i], path, lineno);
        for (int i = 0; i < kBookLevels; ++i) s.lob.ask_prices[i] = parse_double(f[11 + i], path, lineno);
        for (int i = 0; i < kBookLevels; ++i) s.lob.ask_volumes[i] = parse_int(f[16 + i], path, lineno);
        s.traded_volume = parse_int(f[21], path, lineno);
        s.traded_vwap = parse_double(f[22], path, lineno);
        tape.slots.push_back(s);
    }
    const int64_t pm_line = static_cast<int64_t>(lines.size());
    auto pm = split_csv(lines.back());
    if (pm.size() != tape.premarket.size())
        tape_error(path, pm_line, "premarket row must have 10 fields");
    for (size_t i = 0; i < tape.premarket.size(); ++i)
        tape.premarket[i] = parse_double(pm[i], path, pm_line);
    // Re-validate with row positions matching the file layout (header offset 1).
    try {
        validate_tape(tape);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return tape;
}

DayTape bucketize(std::span<const Tick> ticks, const std::string& date,
                  const std::array<double, 10>& premarket) {
    if (ticks.empty()) throw std::runtime_error("bucketize: empty tick stream");
    DayTape tape;
    tape.date = date;
    tape.premarket = premarket;
    tape.slots.resize(kSlotsPerDay);
    size_t pos = 0;
    bool have_prev_lob = false;
    LobSnapshot prev_lob;
    double prev_vwap = 0.0;
    int64_t prev_ts = -1;
    for (int w = 0; w < kSlotsPerDay; ++w) {
        const int64_t w_start = kSessionStartMs + w * kSlotMs;
        const int64_t w_end = w_start + kSlotMs;
        bool have_lob = false;
        int64_t vol = 0;
        double notional = 0.0;
        Slot& slot = tape.slots[w];
        while (pos < ticks.size() && ticks[pos].timestamp_ms < w_end) {
            const Tick& t = ticks[pos];
            if (t.timestamp_ms < w_start)
                throw std::runtime_error("bucketize: tick " + std::to_string(pos) +
                                         " before session start or out of order");
            if (t.timestamp_ms < prev_ts)
                throw std::runtime_error("bucketize: ticks not sorted at index " +
                                         std::to_string(pos));
            prev_ts = t.timestamp_ms;
            slot.lob = t.lob;
            have_lob = true;
            if (t.trade_volume > 0) {
                vol += t.trade_volume;
                notional += static_cast<double>(t.trade_volume) * t.trade_price;
            }
            ++pos;
        }
        if (!have_lob) {
            if (!have_prev_lob)
                throw std::runtime_error(
                    "bucketize: no book snapshot in the first window of the day");
            slot.lob = prev_lob;
            slot.lob.timestamp_ms = w_start; // keep slot timestamps strictly increasing
        }
        slot.traded_volume = vol;
        if (vol > 0)
            slot.traded_vwap = notional / static_cast<double>(vol);
        else if (w == 0)
            slot.traded_vwap = 0.5 * (slot.lob.bid_prices[0] + slot.lob.ask_prices[0]);
        else
            slot.traded_vwap = prev_vwap;
        prev_vwap = slot.traded_vwap;
        prev_lob = slot.lob;
        have_prev_lob = true;
    }
    if (pos != ticks.size())
        throw std::runtime_error("bucketize: tick beyond session end at index " +
                                 std::to_string(pos));
    validate_tape(tape);
    return tape;
}

std::array<double, kIntervals> interval_ratios(const DayTape& tape) {
    if (tape.slots.size() != kSlotsPerDay)
        throw std::runtime_error("interval_ratios: tape has wrong slot count");
    std::array<double, kIntervals> ratios{};
    int64_t total = 0;
    for (int l = 0; l < kIntervals; ++l) {
        int64_t v = 0;
        for (int k = 0; k < kSlotsPerInterval; ++k)
            v += tape.slots[static_cast<size_t>(l * kSlotsPerInterval + k)].traded_volume;
        ratios[l] = static_cast<double>(v);
        total += v;
    }
    if (total <= 0) throw std::runtime_error("interval_ratios: zero day volume");
    for (double& r : ratios) r /= static_cast<double>(total);
    return ratios;
}

std::array<double, kIntervals> historical_average_ushape(const UShapeHistory& history) {
    if (history.empty()) throw std::runtime_error("historical_average_ushape: empty history");
    std::array<double, kIntervals> mean{};
    for (const auto& day : history)
        for (int l = 0; l < kIntervals; ++l) mean[l] += day[l];
    double sum = 0.0;
    for (double& m : mean) {
        m /= static_cast<double>(history.size());
        sum += m;
    }
    if (sum <= 0.0) throw std::runtime_error("historical_average_ushape: degenerate history");
    for (double& m : mean) m /= sum;
    return mean;
}

VolumeStats volume_stats(std::span<const int64_t> daily_totals) {
    if (daily_totals.size() != kVolumeWindowDays)
        throw std::runtime_error("volume_stats: need exactly " +
                                 std::to_string(kVolumeWindowDays) + " daily totals, got " +
                                 std::to_string(daily_totals.size()));
    double mu = 0.0;
    for (int64_t v : daily_totals) {
        if (v <= 0) throw std::runtime_error("volume_stats: nonpositive daily volume");
        mu += static_cast<double>(v);
    }
    mu /= static_cast<double>(daily_totals.size());
    double var = 0.0;
    for (int64_t v : daily_totals) {
        const double d = static_cast<double>(v) - mu;
        var += d * d;
    }
    var /= static_cast<double>(daily_totals.size()); // population divisor
    return {mu, std::sqrt(var)};
}

int64_t sample_total_order(const VolumeStats& stats, Rng& rng) {
    if (!(stats.mu > 0.0) || stats.sigma < 0.0)
        throw std::runtime_error("sample_total_order: invalid stats");
    const double mean = 2.5e-3 * stats.mu;
    const double stddev = 2.5e-3 * stats.sigma; // variance 6.25e-6 * sigma^2
    const double draw = rng.normal(mean, stddev);
    return std::max<int64_t>(1, std::llround(draw));
}

std::vector<int64_t> apportion(int64_t total, std::span<const double> weights) {
    if (total < 0) throw std::invalid_argument("apportion: negative total");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("apportion: bad weight");
        wsum += w;
    }
    if (weights.empty() || wsum <= 0.0)
        throw std::invalid_argument("apportion: weights must have positive sum");
    const size_t n = weights.size();
    std::vector<int64_t> out(n, 0);
    std::vector<std::pair<double, size_t>> frac(n);
    int64_t assigned = 0;
    for (size_t i = 0; i < n; ++i) {
        const double quota = static_cast<double>(total) * (weights[i] / wsum);
        out[i] = static_cast<int64_t>(std::floor(quota));
        frac[i] = {quota - std::floor(quota), i};
        assigned += out[i];
    }
    int64_t rem = total - assigned;
    // Highest fractional part first; ties to the lower index.
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int64_t r = 0; r < rem; ++r) out[frac[static_cast<size_t>(r) % n].second] += 1;
    return out;
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

namespace {

std::array<int64_t, kIntervals> profile_weights(const SynthConfig& cfg) {
    // Quadratic U in the interval index, rounded to integer weights so exact
    // ratios exist (see synth_generate's noise-0 contract).
    std::array<int64_t, kIntervals> w{};
    for (int l = 0; l < kIntervals; ++l) {
        const double x = (static_cast<double>(l) - 9.0) / 9.0;
        w[l] = std::llround(1000.0 * (1.0 + cfg.u_amplitude * x * x));
        if (w[l] < 1) w[l] = 1;
    }
    return w;
}

void check_config(const SynthConfig& cfg) {
    if (!(cfg.base_price > 0.0) || !(cfg.tick_size > 0.0))
        throw std::runtime_error("synth: base_price and tick_size must be positive");
    if (!(cfg.daily_volume >= 1.0)) throw std::runtime_error("synth: daily_volume must be >= 1");
    if (cfg.u_amplitude < 0.0 || cfg.u_noise < 0.0 || cfg.volume_sigma < 0.0 ||
        cfg.price_vol < 0.0 || cfg.slot_noise < 0.0)
        throw std::runtime_error("synth: noise parameters must be nonnegative");
    if (cfg.spread_ticks < 1) throw std::runtime_error("synth: spread_ticks must be >= 1");
    if (!(cfg.depth_scale > 0.0)) throw std::runtime_error("synth: depth_scale must be positive");
}

} // namespace

std::array<double, kIntervals> synth_profile(const SynthConfig& config) {
    const auto w = profile_weights(config);
    int64_t sum = 0;
    for (int64_t v : w) sum += v;
    std::array<double, kIntervals> p{};
    for (int l = 0; l < kIntervals; ++l)
        p[l] = static_cast<double>(w[l]) / static_cast<double>(sum);
    return p;
}

SynthDay synth_generate(const SynthConfig& cfg, const std::string& date, Rng& rng) {
    check_config(cfg);
    const auto weights = profile_weights(cfg);
    int64_t wsum = 0;
    for (int64_t v : weights) wsum += v;
    int64_t g = weights[0];
    for (int64_t v : weights) g = std::gcd(g, v);
    const int64_t grid = wsum / g; // day volumes on this grid split exactly

    // Day total volume (lognormal around daily_volume).
    double vol_target = cfg.daily_volume;
    if (cfg.volume_sigma > 0.0)
        vol_target *= std::exp(cfg.volume_sigma * rng.normal() -
                               0.5 * cfg.volume_sigma * cfg.volume_sigma);
    int64_t day_volume;
    if (cfg.u_noise == 0.0) {
        day_volume = std::max<int64_t>(1, std::llround(vol_target / static_cast<double>(grid))) *
                     grid;
    } else {
        day_volume = std::max<int64_t>(kSlotsPerDay, std::llround(vol_target));
    }

    // Interval volumes: profile, optionally perturbed per day.
    std::vector<int64_t> interval_volume(kIntervals);
    if (cfg.u_noise == 0.0) {
        // day_volume is a multiple of wsum/g, so every interval volume is exact
        const int64_t units = day_volume / grid;
        for (int l = 0; l < kIntervals; ++l)
            interval_volume[static_cast<size_t>(l)] = units * (weights[l] / g);
    } else {
        std::vector<double> noisy(kIntervals);
        for (int l = 0; l < kIntervals; ++l)
            noisy[static_cast<size_t>(l)] =
                static_cast<double>(weights[l]) * std::exp(cfg.u_noise * rng.normal());
        interval_volume = apportion(day_volume, noisy);
    }

    SynthDay out;
    out.tape.date = date;
    out.tape.slots.resize(kSlotsPerDay);

    // Mid-price arithmetic random walk on the tick grid's scale.
    const double step_sigma =
        cfg.price_vol * cfg.base_price / std::sqrt(static_cast<double>(kSlotsPerDay));
    const double floor_price = cfg.tick_size * static_cast<double>(kBookLevels + cfg.spread_ticks + 1);
    double mid = cfg.base_price;
    double prev_vwap = cfg.base_price;

    for (int l = 0; l < kIntervals; ++l) {
        // Per-slot volume split inside the interval.
        std::vector<double> slot_w(kSlotsPerInterval);
        for (int k = 0; k < kSlotsPerInterval; ++k)
            slot_w[static_cast<size_t>(k)] =
                cfg.slot_noise > 0.0 ? std::exp(cfg.slot_noise * rng.normal()) : 1.0;
        const auto slot_vol = apportion(interval_volume[static_cast<size_t>(l)], slot_w);

        for (int k = 0; k < kSlotsPerInterval; ++k) {
            const int idx = l * kSlotsPerInterval + k;
            Slot& s = out.tape.slots[static_cast<size_t>(idx)];
            mid += step_sigma * rng.normal();
            if (mid < floor_price) mid = floor_price + (floor_price - mid);
            const double bid1 =
                std::floor((mid - 0.5 * cfg.spread_ticks * cfg.tick_size) / cfg.tick_size) *
                cfg.tick_size;
            const double ask1 = bid1 + cfg.spread_ticks * cfg.tick_size;
            s.lob.timestamp_ms = kSessionStartMs + idx * kSlotMs;
            for (int i = 0; i < kBookLevels; ++i) {
                s.lob.bid_prices[i] = bid1 - i * cfg.tick_size;
                s.lob.ask_prices[i] = ask1 + i * cfg.tick_size;
                s.lob.bid_volumes[i] =
                    std::max<int64_t>(1, std::llround(cfg.depth_scale * std::exp(0.25 * rng.normal())));
                s.lob.ask_volumes[i] =
                    std::max<int64_t>(1, std::llround(cfg.depth_scale * std::exp(0.25 * rng.normal())));
            }
            s.traded_volume = slot_vol[static_cast<size_t>(k)];
            if (s.traded_volume > 0) {
                double px = mid + 0.2 * cfg.tick_size * rng.normal();
                if (px < 0.5 * floor_price) px = 0.5 * floor_price;
                s.traded_vwap = px;
                prev_vwap = px;
            } else {
                s.traded_vwap = prev_vwap;
            }
        }
    }
    for (double& v : out.tape.premarket)
        v = cfg.depth_scale * std::exp(0.25 * rng.normal());

    validate_tape(out.tape);
    out.true_ratios = interval_ratios(out.tape);
    return out;
}

} // namespace vwapx
