#include "vwapx/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vwapx {

namespace fs = std::filesystem;

std::string to_string(DayRole role) {
    switch (role) {
    case DayRole::Warmup: return "warmup";
    case DayRole::Train: return "train";
    case DayRole::Test: return "test";
    }
    throw std::logic_error("bad DayRole");
}

DayRole day_role_from_string(const std::string& s) {
    if (s == "warmup") return DayRole::Warmup;
    if (s == "train") return DayRole::Train;
    if (s == "test") return DayRole::Test;
    throw std::runtime_error("unknown day role '" + s + "'");
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

int64_t to_i64(const std::string& s, const std::string& what) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::runtime_error("bad integer for " + what + ": '" + s + "'");
    return v;
}

double to_f64(const std::string& s, const std::string& what) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::runtime_error("bad number for " + what + ": '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::logic_error("format_double failed");
    return std::string(buf, p);
}

} // namespace

Dataset Dataset::load(const std::string& dir) {
    Dataset ds;
    ds.dir_ = dir;
    const std::string manifest = (fs::path(dir) / "manifest.csv").string();
    std::ifstream is(manifest);
    if (!is) throw std::runtime_error("cannot open manifest: " + manifest);
    std::string line;
    if (!std::getline(is, line) || line != "index,date,role,file,total_volume")
        throw std::runtime_error(manifest + ": bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() != 5) throw std::runtime_error(manifest + ": bad row '" + line + "'");
        DayEntry e;
        e.index = static_cast<int>(to_i64(f[0], "index"));
        e.date = f[1];
        e.role = day_role_from_string(f[2]);
        e.file = f[3];
        e.total_volume = to_i64(f[4], "total_volume");
        if (e.index != static_cast<int>(ds.days_.size()))
            throw std::runtime_error(manifest + ": indices must be dense from 0");
        ds.days_.push_back(std::move(e));
    }
    if (ds.days_.empty()) throw std::runtime_error(manifest + ": no days");
    ds.cache_.resize(ds.days_.size());
    ds.sidecar_ratios_.resize(ds.days_.size());

    const std::string ratios = (fs::path(dir) / "ratios.csv").string();
    std::ifstream rs(ratios);
    if (rs) {
        std::getline(rs, line); // header
        while (std::getline(rs, line)) {
            if (line.empty()) continue;
            auto f = split(line, ',');
            if (f.size() != 2 + kIntervals)
                throw std::runtime_error(ratios + ": bad row '" + line + "'");
            const int idx = static_cast<int>(to_i64(f[0], "index"));
            if (idx < 0 || idx >= static_cast<int>(ds.days_.size()))
                throw std::runtime_error(ratios + ": index out of range");
            std::array<double, kIntervals> r{};
            for (int l = 0; l < kIntervals; ++l)
                r[static_cast<size_t>(l)] = to_f64(f[static_cast<size_t>(2 + l)], "ratio");
            ds.sidecar_ratios_[static_cast<size_t>(idx)] = r;
        }
    }
    return ds;
}

const Dataset::DayEntry& Dataset::day(int index) const {
    if (index < 0 || index >= static_cast<int>(days_.size()))
        throw std::out_of_range("Dataset: day index " + std::to_string(index));
    return days_[static_cast<size_t>(index)];
}

std::vector<int> Dataset::indices(DayRole role) const {
    std::vector<int> out;
    for (const auto& d : days_)
        if (d.role == role) out.push_back(d.index);
    return out;
}

const DayTape& Dataset::tape(int index) const {
    view(index); // populates the cache slot, which is never replaced afterwards
    return cache_[static_cast<size_t>(index)]->tape;
}

const DayView& Dataset::view(int index) const {
    const DayEntry& e = day(index);
    {
        std::lock_guard<std::mutex> lock(*mutex_);
        if (cache_[static_cast<size_t>(index)]) return *cache_[static_cast<size_t>(index)]->view;
    }
    // Load outside the lock; concurrent loaders of the same day are harmless,
    // the first one wins.
    auto loaded = std::make_shared<LoadedDay>();
    loaded->tape = ingest_tape((fs::path(dir_) / e.file).string());
    loaded->view = std::make_unique<DayView>(loaded->tape);
    std::lock_guard<std::mutex> lock(*mutex_);
    if (!cache_[static_cast<size_t>(index)]) cache_[static_cast<size_t>(index)] = std::move(loaded);
    return *cache_[static_cast<size_t>(index)]->view;
}

std::array<double, kIntervals> Dataset::day_ratios(int index) const {
    day(index);
    if (sidecar_ratios_[static_cast<size_t>(index)])
        return *sidecar_ratios_[static_cast<size_t>(index)];
    return view(index).ratios();
}

VolumeStats Dataset::stats_for(int index) const {
    day(index);
    if (index < kVolumeWindowDays)
        throw std::runtime_error("Dataset: day " + std::to_string(index) + " lacks " +
                                 std::to_string(kVolumeWindowDays) + " prior days for stats");
    std::vector<int64_t> totals;
    totals.reserve(kVolumeWindowDays);
    for (int i = index - kVolumeWindowDays; i < index; ++i)
        totals.push_back(days_[static_cast<size_t>(i)].total_volume);
    return volume_stats(totals);
}

UShapeHistory Dataset::train_ratio_history() const {
    UShapeHistory hist;
    for (const auto& d : days_)
        if (d.role == DayRole::Train) hist.push_back(day_ratios(d.index));
    return hist;
}

// ---------------------------------------------------------------------------
// synthetic dataset writer
// ---------------------------------------------------------------------------

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : d[m - 1];
}

// Sakamoto's day-of-week, 0 = Sunday.
int day_of_week(int y, int m, int d) {
    static const int t[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
    if (m < 3) y -= 1;
    return (y + y / 4 - y / 100 + y / 400 + t[m - 1] + d) % 7;
}

struct Date {
    int y, m, d;
};

Date parse_date(const std::string& iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw std::runtime_error("bad date '" + iso + "' (want yyyy-mm-dd)");
    Date dt{};
    dt.y = static_cast<int>(to_i64(iso.substr(0, 4), "year"));
    dt.m = static_cast<int>(to_i64(iso.substr(5, 2), "month"));
    dt.d = static_cast<int>(to_i64(iso.substr(8, 2), "day"));
    if (dt.m < 1 || dt.m > 12 || dt.d < 1 || dt.d > days_in_month(dt.y, dt.m))
        throw std::runtime_error("bad date '" + iso + "'");
    return dt;
}

std::string format_date(const Date& dt) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", dt.y, dt.m, dt.d);
    return buf;
}

} // namespace

std::string next_trading_date(const std::string& iso_date) {
    Date dt = parse_date(iso_date);
    do {
        dt.d += 1;
        if (dt.d > days_in_month(dt.y, dt.m)) {
            dt.d = 1;
            dt.m += 1;
            if (dt.m > 12) {
                dt.m = 1;
                dt.y += 1;
            }
        }
    } while (day_of_week(dt.y, dt.m, dt.d) == 0 || day_of_week(dt.y, dt.m, dt.d) == 6);
    return format_date(dt);
}

std::string write_synth_dataset(const std::string& dir, const SynthDatasetConfig& config) {
    if (config.days_warmup < 0 || config.days_train <= 0 || config.days_test < 0)
        throw std::runtime_error("synth dataset: need nonnegative warmup/test and positive train");
    fs::create_directories(dir);
    const int total = config.days_warmup + config.days_train + config.days_test;

    std::ofstream manifest((fs::path(dir) / "manifest.csv").string(), std::ios::trunc);
    std::ofstream ratios((fs::path(dir) / "ratios.csv").string(), std::ios::trunc);
    std::ofstream volumes((fs::path(dir) / "volumes.csv").string(), std::ios::trunc);
    if (!manifest || !ratios || !volumes)
        throw std::runtime_error("synth dataset: cannot write into " + dir);
    manifest << "index,date,role,file,total_volume\n";
    ratios << "index,date";
    for (int l = 0; l < kIntervals; ++l) ratios << ",r" << l;
    ratios << "\n";
    volumes << "index,date,total_volume\n";

    // Start date applies to the first generated (warmup) day.
    Date dt = parse_date(config.start_date);
    std::string date = (day_of_week(dt.y, dt.m, dt.d) == 0 || day_of_week(dt.y, dt.m, dt.d) == 6)
                           ? next_trading_date(config.start_date)
                           : config.start_date;
    for (int i = 0; i < total; ++i) {
        Rng rng = Rng::derive(config.seed, 0x5a17, static_cast<uint64_t>(i));
        SynthDay day = synth_generate(config.synth, date, rng);
        char name[32];
        std::snprintf(name, sizeof(name), "day_%03d.csv", i);
        write_tape((fs::path(dir) / name).string(), day.tape);
        const char* role = i < config.days_warmup                      ? "warmup"
                           : i < config.days_warmup + config.days_train ? "train"
                                                                        : "test";
        int64_t total_volume = 0;
        for (const Slot& s : day.tape.slots) total_volume += s.traded_volume;
        manifest << i << ',' << date << ',' << role << ',' << name << ',' << total_volume << "\n";
        ratios << i << ',' << date;
        for (int l = 0; l < kIntervals; ++l)
            ratios << ',' << format_double(day.true_ratios[static_cast<size_t>(l)]);
        ratios << "\n";
        volumes << i << ',' << date << ',' << total_volume << "\n";
        date = next_trading_date(date);
    }
    if (!manifest || !ratios || !volumes)
        throw std::runtime_error("synth dataset: write failed in " + dir);
    return (fs::path(dir) / "manifest.csv").string();
}

} // namespace vwapx
