// vwapx — synthesize tape data, train the dual-level execution models, and
// evaluate VWAP tracking. Subcommands: synth, ingest, train, eval, selftest.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vwapx/config.hpp"
#include "vwapx/eval_report.hpp"
#include "vwapx/selftest.hpp"
#include "vwapx/trainer.hpp"

namespace fs = std::filesystem;
using namespace vwapx;

namespace {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("VWAPX_LOG");
    if (env == nullptr) return LogLevel::Info;
    const std::string v(env);
    if (v == "quiet" || v == "0") return LogLevel::Quiet;
    if (v == "debug" || v == "2") return LogLevel::Debug;
    return LogLevel::Info;
}

std::ostream* info_stream() {
    static std::ostream* s = log_level() >= LogLevel::Info ? &std::cerr : nullptr;
    return s;
}

// Removes files a failed command created, leaving anything that pre-existed.
class OutputGuard {
public:
    explicit OutputGuard(const std::string& dir) : dir_(dir) {
        if (fs::exists(dir_))
            for (const auto& e : fs::recursive_directory_iterator(dir_))
                pre_.insert(e.path().string());
        else
            created_dir_ = true;
    }
    void dismiss() { armed_ = false; }
    ~OutputGuard() {
        if (!armed_ || !fs::exists(dir_)) return;
        std::error_code ec;
        if (created_dir_) {
            fs::remove_all(dir_, ec);
            return;
        }
        std::vector<fs::path> fresh;
        for (const auto& e : fs::recursive_directory_iterator(dir_))
            if (!pre_.count(e.path().string())) fresh.push_back(e.path());
        for (auto it = fresh.rbegin(); it != fresh.rend(); ++it) fs::remove(*it, ec);
    }

private:
    std::string dir_;
    std::set<std::string> pre_;
    bool created_dir_ = false;
    bool armed_ = true;
};

struct FlagOverrides {
    std::string config_path;
    std::string seed, mode, out, threads, data;
};

RunConfig effective_config(const FlagOverrides& f) {
    RunConfig cfg = f.config_path.empty() ? RunConfig{} : RunConfig::from_file(f.config_path);
    // flags win over config-file values
    std::string text;
    if (!f.seed.empty()) text += "seed = " + f.seed + "\n";
    if (!f.mode.empty()) text += "mode = " + f.mode + "\n";
    if (!f.out.empty()) text += "out_dir = " + f.out + "\n";
    if (!f.threads.empty()) text += "threads = " + f.threads + "\n";
    if (!f.data.empty()) text += "data_dir = " + f.data + "\n";
    if (!text.empty()) {
        RunConfig base = cfg;
        const std::string merged = base.emit() + text;
        cfg = RunConfig::from_string(merged, "<flags>");
    }
    return cfg;
}

void write_effective_config(const RunConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream os((fs::path(dir) / "effective_config.cfg").string(), std::ios::trunc);
    os << cfg.emit();
}

int cmd_synth(const RunConfig& cfg) {
    const std::string dir = cfg.data_dir.empty() ? cfg.out_dir : cfg.data_dir;
    OutputGuard guard(dir);
    const std::string manifest = write_synth_dataset(dir, cfg.synth_config());
    write_effective_config(cfg, dir);
    guard.dismiss();
    if (info_stream())
        (*info_stream()) << "synth: wrote "
                         << cfg.synth_days_warmup + cfg.synth_days_train + cfg.synth_days_test
                         << " days to " << manifest << "\n";
    std::cout << manifest << "\n";
    return 0;
}

int cmd_ingest(const RunConfig& cfg, const std::vector<std::string>& files) {
    std::vector<std::string> targets = files;
    if (targets.empty() && !cfg.data_dir.empty()) {
        const Dataset data = Dataset::load(cfg.data_dir);
        for (const auto& d : data.days())
            targets.push_back((fs::path(cfg.data_dir) / d.file).string());
    }
    if (targets.empty()) {
        std::cerr << "ingest: no tape files given (pass paths or --data)\n";
        return 1;
    }
    int failures = 0;
    for (const auto& path : targets) {
        try {
            const DayTape tape = ingest_tape(path);
            int64_t volume = 0;
            for (const Slot& s : tape.slots) volume += s.traded_volume;
            std::cout << "OK " << path << " date=" << tape.date << " volume=" << volume << "\n";
        } catch (const std::exception& e) {
            std::cout << "FAIL " << path << ": " << e.what() << "\n";
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) {
        std::cerr << "train: data_dir is required (--data or config)\n";
        return 1;
    }
    const Dataset data = Dataset::load(cfg.data_dir);
    OutputGuard guard(cfg.out_dir);
    write_effective_config(cfg, cfg.out_dir);
    const TrainResult res = train(cfg.train_config(), data, cfg.out_dir, info_stream());
    guard.dismiss();
    std::cout << res.checkpoint_path << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) {
        std::cerr << "eval: data_dir is required (--data or config)\n";
        return 1;
    }
    const Dataset data = Dataset::load(cfg.data_dir);
    OutputGuard guard(cfg.out_dir);
    write_effective_config(cfg, cfg.out_dir);
    const EvalResult result = evaluate(data, cfg.eval_config());
    const std::string summary = write_eval_artifacts(cfg.out_dir, result, cfg.eval_hist_bin_bps);
    guard.dismiss();
    if (info_stream())
        (*info_stream()) << "eval " << cfg.mode << ": mean " << result.summary.mean_bps
                         << " bps, std " << result.summary.std_bps << " bps, "
                         << result.summary.pct_within_10bps << "% within 10 bps over "
                         << result.summary.rows.size() << " days\n";
    std::cout << summary << "\n";
    return 0;
}

int cmd_selftest(bool full) {
    bool all = true;
    for (const auto& r : selftest::run_all(!full)) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        all &= r.passed;
    }
    return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vwapx: dual-level VWAP execution engine"};
    app.require_subcommand(1);

    FlagOverrides flags;
    app.add_option("--config", flags.config_path, "key=value config file");
    app.add_option("--seed", flags.seed, "run seed (overrides config)");
    app.add_option("--mode", flags.mode, "tul|hul|hu-ppo|ppo|naive|oracle");
    app.add_option("--out", flags.out, "output directory");
    app.add_option("--threads", flags.threads, "worker cap (0 = hardware)");
    app.add_option("--data", flags.data, "dataset directory");

    auto* synth = app.add_subcommand("synth", "generate a synthetic tape dataset");
    auto* ingest = app.add_subcommand("ingest", "validate tape files");
    std::vector<std::string> ingest_files;
    ingest->add_option("files", ingest_files, "tape files to validate");
    auto* train_cmd = app.add_subcommand("train", "train the configured mode");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate over the test split");
    auto* selftest_cmd = app.add_subcommand("selftest", "run the property suites");
    bool selftest_full = false;
    selftest_cmd->add_flag("--full", selftest_full, "full iteration counts");

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = effective_config(flags);
        if (synth->parsed()) return cmd_synth(cfg);
        if (ingest->parsed()) return cmd_ingest(cfg, ingest_files);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (eval_cmd->parsed()) return cmd_eval(cfg);
        if (selftest_cmd->parsed()) return cmd_selftest(selftest_full);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
