#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vwapx/exec_env.hpp"
#include "vwapx/market_data.hpp"

namespace vwapx {

enum class DayRole { Warmup, Train, Test };

std::string to_string(DayRole role);
DayRole day_role_from_string(const std::string& s);

// Manifest-backed tape directory. Tapes load lazily and stay cached; safe for
// concurrent readers.
class Dataset {
public:
    struct DayEntry {
        int index = 0;
        std::string date;
        DayRole role = DayRole::Train;
        std::string file;
        int64_t total_volume = 0;
    };

    static Dataset load(const std::string& dir);

    const std::string& dir() const { return dir_; }
    const std::vector<DayEntry>& days() const { return days_; }
    const DayEntry& day(int index) const;
    std::vector<int> indices(DayRole role) const;

    const DayTape& tape(int index) const;
    const DayView& view(int index) const;

    // Realized interval ratios of a day (from ratios.csv when present,
    // recomputed from the tape otherwise).
    std::array<double, kIntervals> day_ratios(int index) const;

    // mu/sigma over the previous kVolumeWindowDays daily totals.
    VolumeStats stats_for(int index) const;

    // Ratio history over training days only (ordered by index).
    UShapeHistory train_ratio_history() const;

private:
    struct LoadedDay {
        DayTape tape;
        std::unique_ptr<DayView> view;
    };

    std::string dir_;
    std::vector<DayEntry> days_;
    std::vector<std::optional<std::array<double, kIntervals>>> sidecar_ratios_;
    mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
    mutable std::vector<std::shared_ptr<LoadedDay>> cache_;
};

struct SynthDatasetConfig {
    SynthConfig synth;
    int days_warmup = kVolumeWindowDays;
    int days_train = 60;
    int days_test = 20;
    std::string start_date = "2021-01-04"; // advances over weekdays only
    uint64_t seed = 1;
};

// Writes day_*.csv tapes plus manifest.csv, ratios.csv, and volumes.csv into
// dir. Deterministic in (config, seed); returns the manifest path.
std::string write_synth_dataset(const std::string& dir, const SynthDatasetConfig& config);

// Next weekday strictly after an ISO date (weekends skipped).
std::string next_trading_date(const std::string& iso_date);

} // namespace vwapx
