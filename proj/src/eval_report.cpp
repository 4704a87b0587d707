#include "vwapx/eval_report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace vwapx {

namespace fs = std::filesystem;
using nn::Tensor;

namespace {

std::string format_g(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::logic_error("format_g failed");
    return std::string(buf, p);
}

Tensor sample_eval_e_in(const Dataset& data, const std::vector<int>& train_days, int n_hist,
                        Rng& rng) {
    std::vector<int> picks;
    if (static_cast<int>(train_days.size()) >= n_hist) {
        for (size_t i : rng.sample_without_replacement(train_days.size(),
                                                       static_cast<size_t>(n_hist)))
            picks.push_back(train_days[i]);
    } else {
        for (int i = 0; i < n_hist; ++i)
            picks.push_back(train_days[rng.uniform_index(train_days.size())]);
    }
    Tensor e_in(kIntervals, n_hist);
    for (int k = 0; k < n_hist; ++k) {
        const auto ratios = data.day_ratios(picks[static_cast<size_t>(k)]);
        for (int l = 0; l < kIntervals; ++l) e_in.at(l, k) = ratios[static_cast<size_t>(l)];
    }
    return e_in;
}

} // namespace

int EvalConfig::resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

EvalSummary summarize(std::vector<EvalDayRow> rows) {
    if (rows.empty()) throw std::runtime_error("summarize: no evaluation days");
    EvalSummary s;
    s.rows = std::move(rows);
    double mean = 0.0;
    int64_t within = 0;
    for (const auto& r : s.rows) {
        mean += r.vaa_bps;
        if (r.vaa_bps <= 10.0) ++within;
    }
    mean /= static_cast<double>(s.rows.size());
    double var = 0.0;
    for (const auto& r : s.rows) {
        const double d = r.vaa_bps - mean;
        var += d * d;
    }
    var /= static_cast<double>(s.rows.size());
    s.mean_bps = mean;
    s.std_bps = std::sqrt(var);
    s.pct_within_10bps = 100.0 * static_cast<double>(within) / static_cast<double>(s.rows.size());
    return s;
}

EvalResult evaluate(const Dataset& data, const EvalConfig& config, Models& models) {
    const std::vector<int> test_days = data.indices(DayRole::Test);
    if (test_days.empty()) throw std::runtime_error("evaluate: dataset has no test days");
    const std::vector<int> train_days = data.indices(DayRole::Train);

    std::array<double, kIntervals> hist_avg{};
    if (config.mode == Mode::Hul || config.mode == Mode::HuPpo) {
        if (train_days.empty())
            throw std::runtime_error("evaluate: " + to_string(config.mode) +
                                     " needs training days for the statistical U-shape");
        hist_avg = historical_average_ushape(data.train_ratio_history());
    }
    const int n_hist = models.ushape ? models.ushape->config().n_hist : 0;
    if (config.mode == Mode::Tul && (!models.ushape || train_days.empty()))
        throw std::runtime_error("evaluate: tul needs a transformer checkpoint and train days");

    const int n = static_cast<int>(test_days.size());
    std::vector<EvalDayRow> rows(static_cast<size_t>(n));
    std::vector<std::string> dates(static_cast<size_t>(n));
    std::vector<std::array<double, kIntervals>> u_true(static_cast<size_t>(n));
    std::vector<std::array<double, kIntervals>> u_pred(static_cast<size_t>(n));

    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) break;
            const int day = test_days[static_cast<size_t>(i)];
            Rng rng = Rng::derive(config.seed, 4, static_cast<uint64_t>(day));
            Tensor e_in;
            GatherOptions options;
            options.mode = config.mode;
            options.greedy = config.greedy;
            options.hist_avg =
                (config.mode == Mode::Hul || config.mode == Mode::HuPpo) ? &hist_avg : nullptr;
            if (config.mode == Mode::Tul) {
                e_in = sample_eval_e_in(data, train_days, n_hist, rng);
                options.e_in = &e_in;
            }
            DayTraj traj =
                gather_episodes(data, day, data.stats_for(day), models, options, rng);
            EvalDayRow row;
            row.index = day;
            row.date = data.day(day).date;
            row.total_order = traj.total_order;
            row.mp_day = traj.mp_day;
            row.vwap_day = traj.vwap_day;
            row.vaa_bps = traj.vaa_day * 1e4;
            rows[static_cast<size_t>(i)] = row;
            dates[static_cast<size_t>(i)] = row.date;
            u_true[static_cast<size_t>(i)] = traj.u_true;
            u_pred[static_cast<size_t>(i)] = traj.u_used;
        }
    };
    const int nw = std::min(config.resolved_threads(), n);
    if (nw <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    EvalResult result;
    result.summary = summarize(std::move(rows));
    result.dates = std::move(dates);
    result.u_true = std::move(u_true);
    result.u_pred = std::move(u_pred);
    return result;
}

EvalResult evaluate(const Dataset& data, const EvalConfig& config) {
    Models models = [&] {
        if (mode_uses_policy(config.mode)) {
            if (config.checkpoint.empty())
                throw std::runtime_error("evaluate: mode " + to_string(config.mode) +
                                         " requires a checkpoint");
            LoadedCheckpoint loaded = load_train_checkpoint(config.checkpoint);
            if (loaded.mode != config.mode)
                throw std::runtime_error("evaluate: checkpoint was trained in mode " +
                                         to_string(loaded.mode));
            return std::move(loaded.models);
        }
        TrainConfig tc;
        tc.mode = Mode::Hul; // placeholder nets; rule modes never run the policy
        Models m = Models::create(tc);
        return m;
    }();
    return evaluate(data, config, models);
}

std::vector<int64_t> histogram(std::span<const double> values_bps, double bin_width_bps) {
    if (!(bin_width_bps > 0.0)) throw std::invalid_argument("histogram: bin width must be > 0");
    std::vector<int64_t> bins;
    for (double v : values_bps) {
        if (v < 0.0) throw std::invalid_argument("histogram: negative VAA");
        const auto idx = static_cast<size_t>(std::floor(v / bin_width_bps));
        if (bins.size() <= idx) bins.resize(idx + 1, 0);
        bins[idx] += 1;
    }
    return bins;
}

UshapeReport ushape_report(std::span<const std::array<double, kIntervals>> u_true,
                           std::span<const std::array<double, kIntervals>> u_pred) {
    if (u_true.empty() || u_true.size() != u_pred.size())
        throw std::invalid_argument("ushape_report: need matching nonempty day lists");
    UshapeReport rep;
    const double n = static_cast<double>(u_true.size());
    for (size_t d = 0; d < u_true.size(); ++d) {
        for (int l = 0; l < kIntervals; ++l) {
            const size_t li = static_cast<size_t>(l);
            rep.mean_true[li] += u_true[d][li] / n;
            rep.mean_pred[li] += u_pred[d][li] / n;
            rep.mae[li] += std::fabs(u_pred[d][li] - u_true[d][li]) / n;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// artifact writers
// ---------------------------------------------------------------------------

namespace {

// Minimal line/bar SVG primitives; fixed viewport with margins.
class SvgPlot {
public:
    SvgPlot(double xmin, double xmax, double ymin, double ymax)
        : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax) {
        if (xmax_ <= xmin_) xmax_ = xmin_ + 1.0;
        if (ymax_ <= ymin_) ymax_ = ymin_ + 1.0;
        body_ += "<rect x='0' y='0' width='640' height='420' fill='white'/>\n";
        body_ += axis_line(margin_, height_ - margin_, width_ - margin_, height_ - margin_);
        body_ += axis_line(margin_, margin_, margin_, height_ - margin_);
    }

    void polyline(std::span<const double> xs, std::span<const double> ys, const char* color) {
        std::string pts;
        for (size_t i = 0; i < xs.size(); ++i) {
            pts += fmt(px(xs[i]));
            pts += ',';
            pts += fmt(py(ys[i]));
            pts += ' ';
        }
        body_ += "<polyline fill='none' stroke='" + std::string(color) +
                 "' stroke-width='1.5' points='" + pts + "'/>\n";
    }

    void bars(std::span<const double> xs, std::span<const double> heights, double bar_w,
              const char* color) {
        for (size_t i = 0; i < xs.size(); ++i) {
            const double x0 = px(xs[i]);
            const double x1 = px(xs[i] + bar_w);
            const double y = py(heights[i]);
            body_ += "<rect x='" + fmt(x0) + "' y='" + fmt(y) + "' width='" + fmt(x1 - x0 - 1.0) +
                     "' height='" + fmt(py(0.0) - y) + "' fill='" + color + "'/>\n";
        }
    }

    void label(double x, double y, const std::string& text, const char* color = "#333") {
        body_ += "<text x='" + fmt(x) + "' y='" + fmt(y) + "' font-size='12' fill='" + color +
                 "' font-family='monospace'>" + text + "</text>\n";
    }

    void write(const std::string& path) {
        std::ofstream os(path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + path);
        os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width_ << "' height='"
           << height_ << "' viewBox='0 0 " << width_ << " " << height_ << "'>\n"
           << body_ << "</svg>\n";
    }

private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return buf;
    }
    std::string axis_line(double x1, double y1, double x2, double y2) {
        return "<line x1='" + fmt(x1) + "' y1='" + fmt(y1) + "' x2='" + fmt(x2) + "' y2='" +
               fmt(y2) + "' stroke='#888' stroke-width='1'/>\n";
    }
    double px(double x) const {
        return margin_ + (x - xmin_) / (xmax_ - xmin_) * (width_ - 2 * margin_);
    }
    double py(double y) const {
        return height_ - margin_ - (y - ymin_) / (ymax_ - ymin_) * (height_ - 2 * margin_);
    }

    double xmin_, xmax_, ymin_, ymax_;
    double width_ = 640, height_ = 420, margin_ = 45;
    std::string body_;
};

std::vector<double> interval_axis() {
    std::vector<double> xs(kIntervals);
    for (int l = 0; l < kIntervals; ++l) xs[static_cast<size_t>(l)] = static_cast<double>(l);
    return xs;
}

} // namespace

std::string write_eval_artifacts(const std::string& dir, const EvalResult& result,
                                 double bin_width_bps) {
    fs::create_directories(dir);
    const EvalSummary& s = result.summary;

    // summary.csv: per-day rows plus an aggregate footer.
    const std::string summary_path = (fs::path(dir) / "summary.csv").string();
    {
        std::ofstream os(summary_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + summary_path);
        os << "index,date,total_order,mp_day,vwap_day,vaa_bps\n";
        for (const auto& r : s.rows)
            os << r.index << ',' << r.date << ',' << r.total_order << ',' << format_g(r.mp_day)
               << ',' << format_g(r.vwap_day) << ',' << format_g(r.vaa_bps) << "\n";
        os << "aggregate," << s.rows.size() << ",," << format_g(s.mean_bps) << ','
           << format_g(s.std_bps) << ',' << format_g(s.pct_within_10bps) << "\n";
    }

    // Histogram (csv + svg).
    std::vector<double> vaas;
    for (const auto& r : s.rows) vaas.push_back(r.vaa_bps);
    const auto bins = histogram(vaas, bin_width_bps);
    {
        std::ofstream os((fs::path(dir) / "vaa_histogram.csv").string(), std::ios::trunc);
        os << "bin_lo_bps,bin_hi_bps,count\n";
        for (size_t b = 0; b < bins.size(); ++b)
            os << format_g(static_cast<double>(b) * bin_width_bps) << ','
               << format_g(static_cast<double>(b + 1) * bin_width_bps) << ',' << bins[b] << "\n";
    }
    {
        int64_t maxc = 1;
        for (int64_t c : bins) maxc = std::max(maxc, c);
        SvgPlot plot(0.0, static_cast<double>(bins.size()) * bin_width_bps,
                     0.0, static_cast<double>(maxc) * 1.1);
        std::vector<double> xs, hs;
        for (size_t b = 0; b < bins.size(); ++b) {
            xs.push_back(static_cast<double>(b) * bin_width_bps);
            hs.push_back(static_cast<double>(bins[b]));
        }
        plot.bars(xs, hs, bin_width_bps, "#4477aa");
        plot.label(50, 20, "VAA histogram (bps, bin " + format_g(bin_width_bps) + ")");
        plot.write((fs::path(dir) / "vaa_histogram.svg").string());
    }

    // U-shape report (mean over test days + per-day overlays).
    const UshapeReport rep = ushape_report(result.u_true, result.u_pred);
    {
        std::ofstream os((fs::path(dir) / "ushape_avg.csv").string(), std::ios::trunc);
        os << "interval,mean_true,mean_pred,mae\n";
        for (int l = 0; l < kIntervals; ++l) {
            const size_t li = static_cast<size_t>(l);
            os << l << ',' << format_g(rep.mean_true[li]) << ',' << format_g(rep.mean_pred[li])
               << ',' << format_g(rep.mae[li]) << "\n";
        }
    }
    {
        double ymax = 0.0;
        for (int l = 0; l < kIntervals; ++l)
            ymax = std::max({ymax, rep.mean_true[static_cast<size_t>(l)],
                             rep.mean_pred[static_cast<size_t>(l)]});
        SvgPlot plot(0.0, kIntervals - 1, 0.0, ymax * 1.15);
        const auto xs = interval_axis();
        std::vector<double> yt(kIntervals), yp(kIntervals);
        for (int l = 0; l < kIntervals; ++l) {
            yt[static_cast<size_t>(l)] = rep.mean_true[static_cast<size_t>(l)];
            yp[static_cast<size_t>(l)] = rep.mean_pred[static_cast<size_t>(l)];
        }
        plot.polyline(xs, yt, "#222222");
        plot.polyline(xs, yp, "#cc3311");
        plot.label(50, 20, "U-shape mean over test days (black true, red model)");
        plot.write((fs::path(dir) / "ushape_avg.svg").string());
    }
    for (size_t d = 0; d < result.dates.size(); ++d) {
        double ymax = 0.0;
        for (int l = 0; l < kIntervals; ++l)
            ymax = std::max({ymax, result.u_true[d][static_cast<size_t>(l)],
                             result.u_pred[d][static_cast<size_t>(l)]});
        SvgPlot plot(0.0, kIntervals - 1, 0.0, ymax * 1.15);
        const auto xs = interval_axis();
        std::vector<double> yt(kIntervals), yp(kIntervals);
        for (int l = 0; l < kIntervals; ++l) {
            yt[static_cast<size_t>(l)] = result.u_true[d][static_cast<size_t>(l)];
            yp[static_cast<size_t>(l)] = result.u_pred[d][static_cast<size_t>(l)];
        }
        plot.polyline(xs, yt, "#222222");
        plot.polyline(xs, yp, "#cc3311");
        plot.label(50, 20, "U-shape " + result.dates[d] + " (black true, red model)");
        plot.write((fs::path(dir) / ("ushape_day_" + result.dates[d] + ".svg")).string());
    }
    return summary_path;
}

} // namespace vwapx
