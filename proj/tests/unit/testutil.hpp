#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "vwapx/dataset.hpp"
#include "vwapx/market_data.hpp"

namespace vwapx::testutil {

// Fresh per-process temp directory under the system tmp.
inline std::string temp_dir(const std::string& tag) {
    static int counter = 0;
    const auto base = std::filesystem::temp_directory_path() / "vwapx_tests";
    const auto dir =
        base / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir.string();
}

// Hand-built tape: constant book around `price`, per-slot volumes from a
// callback, traded price from a callback. Keeps every invariant satisfied.
template <typename VolFn, typename PriceFn>
DayTape make_tape(VolFn&& vol, PriceFn&& price, const std::string& date = "2021-03-02") {
    DayTape tape;
    tape.date = date;
    tape.slots.resize(kSlotsPerDay);
    double prev_vwap = price(0);
    for (int i = 0; i < kSlotsPerDay; ++i) {
        Slot& s = tape.slots[static_cast<size_t>(i)];
        const double p = price(i);
        s.lob.timestamp_ms = kSessionStartMs + i * kSlotMs;
        for (int k = 0; k < kBookLevels; ++k) {
            s.lob.bid_prices[k] = p - 50.0 - 100.0 * k;
            s.lob.ask_prices[k] = p + 50.0 + 100.0 * k;
            s.lob.bid_volumes[k] = 1000 + i % 7;
            s.lob.ask_volumes[k] = 1100 + i % 5;
        }
        s.traded_volume = vol(i);
        s.traded_vwap = s.traded_volume > 0 ? p : prev_vwap;
        prev_vwap = s.traded_vwap;
    }
    tape.premarket.fill(500.0);
    validate_tape(tape);
    return tape;
}

inline DayTape constant_tape(double price = 70000.0, int64_t slot_volume = 1000) {
    return make_tape([=](int) { return slot_volume; }, [=](int) { return price; });
}

inline std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

// Small on-disk dataset for trainer/eval tests.
inline std::string small_dataset(const std::string& tag, int train_days = 3, int test_days = 2,
                                 uint64_t seed = 11, double u_noise = 0.1) {
    const std::string dir = temp_dir(tag);
    SynthDatasetConfig cfg;
    cfg.synth.daily_volume = 2e6;
    cfg.synth.u_noise = u_noise;
    cfg.days_warmup = kVolumeWindowDays;
    cfg.days_train = train_days;
    cfg.days_test = test_days;
    cfg.seed = seed;
    write_synth_dataset(dir, cfg);
    return dir;
}

} // namespace vwapx::testutil
