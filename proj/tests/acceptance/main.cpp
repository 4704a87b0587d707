// Acceptance suite: one pass/fail line per criterion.
//
//   1 gradient checks (ops, 3-step policy BPTT, shrunken transformer pipeline)
//   2 structural invariants (u_pred simplex, exact liquidation)
//   3 oracle equivalence (target-order strategy, reward grid)
//   4 PPO arithmetic (clip cases, suffix-sum returns)
//   5 learning signal at desk scale (HUL/TUL vs equal-split and naive baselines)
//   6 equal-split vs naive first-step within 2 bps
//   7 train -> checkpoint -> eval determinism (byte-identical summary.csv)
//   8 transformer tracking of a stationary U-shape
//
// Usage: vwapx_acceptance [criterion numbers...] [--workdir DIR]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "vwapx/config.hpp"
#include "vwapx/eval_report.hpp"
#include "vwapx/selftest.hpp"
#include "vwapx/trainer.hpp"

namespace fs = std::filesystem;
using namespace vwapx;

namespace {

struct Criterion {
    int id = 0;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

std::string workdir;

std::string fresh_dir(const std::string& tag) {
    const std::string d = workdir + "/" + tag;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

template <typename F>
Criterion timed(int id, F&& body) {
    Criterion c;
    c.id = id;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.passed = false;
        c.detail += std::string(" exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1fs)\n", c.passed ? "PASS" : "FAIL", c.id,
                c.detail.c_str(), c.seconds);
    std::fflush(stdout);
    return c;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------------

Criterion criterion1() {
    return timed(1, [](Criterion& c) {
        const auto ops = selftest::gradient_ops();
        const auto pol = selftest::gradient_policy_bptt();
        const auto ush = selftest::gradient_ushape_pipeline();
        c.passed = ops.passed && pol.passed && ush.passed;
        c.detail = "gradients: ops {" + ops.detail + "}, policy {" + pol.detail +
                   "}, pipeline {" + ush.detail + "}";
    });
}

Criterion criterion2() {
    return timed(2, [](Criterion& c) {
        const auto u = selftest::structural_upred(1000);
        const auto e = selftest::structural_conservation(1000);
        c.passed = u.passed && e.passed;
        c.detail = "u_pred {" + u.detail + "}, liquidation {" + e.detail + "}";
    });
}

Criterion criterion3() {
    return timed(3, [](Criterion& c) {
        const auto target = selftest::oracle_target_strategy(10);
        const auto grid = selftest::oracle_reward_grid(100);
        c.passed = target.passed && grid.passed;
        c.detail = "oracle strategy {" + target.detail + "}, reward grid {" + grid.detail + "}";
    });
}

Criterion criterion4() {
    return timed(4, [](Criterion& c) {
        const auto clip = selftest::ppo_clip_cases();
        const auto suffix = selftest::ppo_suffix_sums(1000);
        c.passed = clip.passed && suffix.passed;
        c.detail = "clip {" + clip.detail + "}, returns {" + suffix.detail + "}";
    });
}

// Shared state between criteria 5 and 6 (same trained models and test set).
struct DeskScaleResults {
    bool ready = false;
    double hul = 0.0, tul = 0.0, ppo = 0.0, naive = 0.0;
    double wall_seconds = 0.0;
};
DeskScaleResults desk;

void run_desk_scale() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string data_dir = fresh_dir("desk_data");
    SynthDatasetConfig ds;
    ds.days_warmup = kVolumeWindowDays;
    ds.days_train = 60;
    ds.days_test = 20;
    ds.seed = 2021;
    write_synth_dataset(data_dir, ds);
    const Dataset data = Dataset::load(data_dir);

    auto train_lane = [&](Mode mode) {
        TrainConfig cfg;
        cfg.mode = mode;
        cfg.outer_iterations = 300;
        cfg.seed = 7;
        cfg.threads = 1;
        cfg.checkpoint_every = 0;
        const std::string out = fresh_dir("desk_" + to_string(mode));
        return train(cfg, data, out, nullptr).checkpoint_path;
    };
    // Three independent training lanes; each is single-threaded inside.
    auto tul_ckpt = std::async(std::launch::async, train_lane, Mode::Tul);
    auto hul_ckpt = std::async(std::launch::async, train_lane, Mode::Hul);
    auto ppo_ckpt = std::async(std::launch::async, train_lane, Mode::PpoEqual);

    auto eval_mode = [&](Mode mode, const std::string& ckpt) {
        EvalConfig ec;
        ec.mode = mode;
        ec.seed = 90;
        ec.checkpoint = ckpt;
        ec.threads = 2;
        const EvalResult r = evaluate(data, ec);
        write_eval_artifacts(workdir + "/desk_eval_" + to_string(mode), r, 5.0);
        return r.summary.mean_bps;
    };
    desk.naive = eval_mode(Mode::Naive, "");
    desk.hul = eval_mode(Mode::Hul, hul_ckpt.get());
    desk.ppo = eval_mode(Mode::PpoEqual, ppo_ckpt.get());
    desk.tul = eval_mode(Mode::Tul, tul_ckpt.get());
    desk.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    desk.ready = true;
}

Criterion criterion5() {
    return timed(5, [](Criterion& c) {
        if (!desk.ready) run_desk_scale();
        const bool order = desk.hul < desk.ppo && desk.hul < desk.naive && desk.tul < desk.ppo &&
                           desk.tul < desk.naive;
        const bool close = desk.tul <= desk.hul + 1.0;
        const bool fast = desk.wall_seconds < 45.0 * 60.0;
        c.passed = order && close && fast;
        c.detail = "mean VAA bps: hul " + fmt(desk.hul) + ", tul " + fmt(desk.tul) + ", ppo " +
                   fmt(desk.ppo) + ", naive " + fmt(desk.naive) + "; tul<=hul+1 " +
                   (close ? "yes" : "NO") + "; wall " + fmt(desk.wall_seconds / 60.0) +
                   " min on " + std::to_string(std::thread::hardware_concurrency()) + " cores";
    });
}

Criterion criterion6() {
    return timed(6, [](Criterion& c) {
        if (!desk.ready) run_desk_scale();
        const double gap = std::fabs(desk.ppo - desk.naive);
        c.passed = gap <= 2.0;
        c.detail = "|mean VAA(ppo) - mean VAA(naive)| = " + fmt(gap) + " bps (<= 2)";
    });
}

Criterion criterion7() {
    return timed(7, [](Criterion& c) {
        auto pipeline = [&](const std::string& tag) {
            const std::string data_dir = fresh_dir(tag + "_data");
            SynthDatasetConfig ds;
            ds.synth.daily_volume = 4e6;
            ds.days_warmup = kVolumeWindowDays;
            ds.days_train = 4;
            ds.days_test = 3;
            ds.seed = 17;
            write_synth_dataset(data_dir, ds);
            const Dataset data = Dataset::load(data_dir);
            TrainConfig cfg;
            cfg.mode = Mode::Tul;
            cfg.outer_iterations = 3;
            cfg.days_per_iter = 2;
            cfg.policy_feat_dim = 16;
            cfg.policy_hidden = 13;
            cfg.tf_pffn_dim = 16;
            cfg.n_hist = 3;
            cfg.seed = 23;
            cfg.threads = 2;
            const std::string run = fresh_dir(tag + "_run");
            const TrainResult tr = train(cfg, data, run, nullptr);
            EvalConfig ec;
            ec.mode = Mode::Tul;
            ec.seed = 29;
            ec.checkpoint = tr.checkpoint_path;
            ec.threads = 2;
            const EvalResult r = evaluate(data, ec);
            write_eval_artifacts(run, r, 5.0);
            return std::pair<std::string, std::string>{file_bytes(tr.checkpoint_path),
                                                       file_bytes(run + "/summary.csv")};
        };
        const auto a = pipeline("det_a");
        const auto b = pipeline("det_b");
        const bool ckpt_same = a.first == b.first && !a.first.empty();
        const bool summary_same = a.second == b.second && !a.second.empty();
        c.passed = ckpt_same && summary_same;
        c.detail = std::string("checkpoints byte-identical: ") + (ckpt_same ? "yes" : "NO") +
                   ", summary.csv byte-identical: " + (summary_same ? "yes" : "NO");
    });
}

Criterion criterion8() {
    return timed(8, [](Criterion& c) {
        const std::string data_dir = fresh_dir("track_data");
        SynthDatasetConfig ds;
        ds.synth.u_noise = 0.0; // stationary U-shape
        ds.days_warmup = kVolumeWindowDays;
        ds.days_train = 60;
        ds.days_test = 20;
        ds.seed = 31;
        write_synth_dataset(data_dir, ds);
        const Dataset data = Dataset::load(data_dir);

        TrainConfig cfg; // shrunken configuration
        cfg.mode = Mode::Tul;
        cfg.outer_iterations = 500;
        cfg.days_per_iter = 4;
        cfg.policy_feat_dim = 32;
        cfg.policy_hidden = 13; // d_model 32
        cfg.tf_pffn_dim = 32;
        cfg.seed = 37;
        cfg.threads = 2;
        cfg.checkpoint_every = 0;
        const std::string run = fresh_dir("track_run");
        const TrainResult tr = train(cfg, data, run, nullptr);

        EvalConfig ec;
        ec.mode = Mode::Tul;
        ec.seed = 41;
        ec.checkpoint = tr.checkpoint_path;
        ec.threads = 2;
        const EvalResult r = evaluate(data, ec);
        write_eval_artifacts(run, r, 5.0);
        const UshapeReport rep = ushape_report(r.u_true, r.u_pred);
        double worst = 0.0;
        for (double m : rep.mae) worst = std::max(worst, m);
        c.passed = worst < 0.01;
        c.detail = "per-interval |u_pred - u_true| MAE worst " + fmt(worst) + " (< 0.01)";
    });
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    workdir = (fs::temp_directory_path() / "vwapx_acceptance").string();
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--workdir" && i + 1 < argc) {
            workdir = argv[++i];
        } else if (arg == "all") {
            wanted.clear();
        } else {
            wanted.insert(std::atoi(arg.c_str()));
        }
    }
    fs::create_directories(workdir);
    auto want = [&](int id) { return wanted.empty() || wanted.count(id) != 0; };

    std::vector<Criterion> results;
    // fast criteria first, then the training-heavy ones
    if (want(1)) results.push_back(criterion1());
    if (want(2)) results.push_back(criterion2());
    if (want(3)) results.push_back(criterion3());
    if (want(4)) results.push_back(criterion4());
    if (want(7)) results.push_back(criterion7());
    if (want(8)) results.push_back(criterion8());
    if (want(5)) results.push_back(criterion5());
    if (want(6)) results.push_back(criterion6());

    std::sort(results.begin(), results.end(),
              [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
    bool all = true;
    std::printf("\n== acceptance summary ==\n");
    for (const Criterion& r : results) {
        std::printf("[%s] criterion %d (%.1fs)\n", r.passed ? "PASS" : "FAIL", r.id, r.seconds);
        all &= r.passed;
    }
    // criterion 1 carries its own runtime bound
    for (const Criterion& r : results)
        if (r.id == 1 && r.seconds >= 120.0) {
            std::printf("[FAIL] criterion 1 runtime bound: %.1fs >= 120s\n", r.seconds);
            all = false;
        }
    return all ? 0 : 1;
}
