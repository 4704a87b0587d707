#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vwapx/rng.hpp"

namespace vwapx {

// Session layout: 380 trading minutes (09:00:00-15:20:00) cut into 19 intervals
// of 20 minutes, 20 one-minute subintervals each, 12 five-second slots per
// subinterval.
inline constexpr int kIntervals = 19;
inline constexpr int kSubintervals = 20;
inline constexpr int kExecSteps = 12;
inline constexpr int kSlotsPerInterval = kSubintervals * kExecSteps; // 240
inline constexpr int kSlotsPerDay = kIntervals * kSlotsPerInterval;  // 4560
inline constexpr int64_t kSessionStartMs = 9 * 3600 * 1000;
inline constexpr int64_t kSlotMs = 5000;
inline constexpr int64_t kSessionEndMs = kSessionStartMs + kSlotsPerDay * kSlotMs;
inline constexpr int kBookLevels = 5;
inline constexpr int kVolumeWindowDays = 60;

struct LobSnapshot {
    int64_t timestamp_ms = 0; // since midnight
    std::array<double, kBookLevels> bid_prices{};  // strictly descending
    std::array<double, kBookLevels> ask_prices{};  // strictly ascending
    std::array<int64_t, kBookLevels> bid_volumes{};
    std::array<int64_t, kBookLevels> ask_volumes{};
};

// One 5-second market slot: the last book snapshot of the window plus the
// window's traded volume and volume-weighted traded price. Zero-trade windows
// carry the previous window's traded_vwap.
struct Slot {
    LobSnapshot lob;
    int64_t traded_volume = 0;
    double traded_vwap = 0.0;
};

struct DayTape {
    std::string date; // ISO yyyy-mm-dd
    std::vector<Slot> slots;
    std::array<double, 10> premarket{}; // top-5 bid then top-5 ask volume averages
};

struct VolumeStats {
    double mu = 0.0;
    double sigma = 0.0;
};

// Per-day vectors of the 19 realized interval volume ratios.
using UShapeHistory = std::vector<std::array<double, kIntervals>>;

// A raw pre-bucketing market event: a book snapshot, optionally carrying a
// trade executed at (price, volume) inside the same event.
struct Tick {
    int64_t timestamp_ms = 0;
    LobSnapshot lob;
    int64_t trade_volume = 0;
    double trade_price = 0.0;
};

// ---- validation & IO --------------------------------------------------------

// Throws std::runtime_error naming the offending row on any invariant breach.
void validate_tape(const DayTape& tape);

DayTape ingest_tape(const std::string& path);
void write_tape(const std::string& path, const DayTape& tape);

// Groups a sorted tick stream into 5-second slots: last snapshot of each
// window, window traded volume, window traded VWAP (carried forward when the
// window has no trades).
DayTape bucketize(std::span<const Tick> ticks, const std::string& date,
                  const std::array<double, 10>& premarket = {});

// ---- statistics -------------------------------------------------------------

std::array<double, kIntervals> interval_ratios(const DayTape& tape);

std::array<double, kIntervals> historical_average_ushape(const UShapeHistory& history);

// Exactly kVolumeWindowDays positive daily totals; population (N) divisor.
VolumeStats volume_stats(std::span<const int64_t> daily_totals);

// O ~ N(2.5e-3*mu, 6.25e-6*sigma^2), truncated below at 1 share, rounded to
// the nearest integer share.
int64_t sample_total_order(const VolumeStats& stats, Rng& rng);

// Largest-remainder apportionment of `total` by nonnegative weights; the
// result sums to `total` exactly. Ties go to the lower index.
std::vector<int64_t> apportion(int64_t total, std::span<const double> weights);

// ---- synthetic tape generator ------------------------------------------------

struct SynthConfig {
    double base_price = 70000.0;
    double tick_size = 100.0;
    double daily_volume = 17e6;  // mean total shares per day
    double volume_sigma = 0.15;  // lognormal sigma of the day total
    double u_amplitude = 2.0;    // quadratic U-profile strength
    double u_noise = 0.1;        // lognormal sigma of per-interval day noise
    double price_vol = 0.015;    // daily relative mid-price volatility
    double slot_noise = 0.15;    // lognormal sigma of per-slot volume weights
    int spread_ticks = 1;
    double depth_scale = 3000.0; // mean book level volume
};

struct SynthDay {
    DayTape tape;
    std::array<double, kIntervals> true_ratios{}; // realized, exact
};

// Deterministic per (config, rng state). The emitted tape always passes
// validate_tape. With u_noise == 0 the day volume is snapped to the profile
// grid so the realized ratios equal the configured profile exactly.
SynthDay synth_generate(const SynthConfig& config, const std::string& date, Rng& rng);

// The configured quadratic profile (normalized integer weights).
std::array<double, kIntervals> synth_profile(const SynthConfig& config);

} // namespace vwapx
