#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "testutil.hpp"
#include "vwapx/selftest.hpp"
#include "vwapx/trainer.hpp"

using namespace vwapx;
namespace tu = vwapx::testutil;
using nn::Graph;
using nn::Tensor;
using nn::Value;

namespace {

TrainConfig small_config(Mode mode, uint64_t seed = 3) {
    TrainConfig cfg;
    cfg.mode = mode;
    cfg.outer_iterations = 2;
    cfg.days_per_iter = 2;
    cfg.policy_feat_dim = 12;
    cfg.policy_hidden = mode == Mode::Tul ? 13 : 10; // 19 + 13 = 32, divisible by 4
    cfg.tf_pffn_dim = 16;
    cfg.n_hist = 3;
    cfg.seed = seed;
    cfg.checkpoint_every = 0;
    cfg.threads = 2;
    return cfg;
}

} // namespace

TEST_CASE("mode naming and per-mode defaults") {
    CHECK(to_string(mode_from_string("hu-ppo")) == "hu-ppo");
    CHECK(mode_from_string("ppo") == Mode::PpoEqual);
    CHECK_THROWS(mode_from_string("nope"));
    TrainConfig tul;
    tul.mode = Mode::Tul;
    TrainConfig hul;
    hul.mode = Mode::Hul;
    // Table-4 trajectory counts: 228 = 12 days x 19, 152 = 8 days x 19
    CHECK(tul.resolved_days() * kIntervals == 228);
    CHECK(hul.resolved_days() * kIntervals == 152);
    CHECK(tul.resolved_hidden() == 129);
    CHECK(hul.resolved_hidden() == 128);
    TrainConfig bad;
    bad.mode = Mode::Naive;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("compute_returns_advantages: suffix sums") {
    IntervalTraj traj;
    traj.steps[0].reward = 1;
    traj.steps[1].reward = 0;
    traj.steps[2].reward = -1;
    std::array<double, kSubintervals> vt{}, adv{};
    compute_returns_advantages(traj, 1.0, vt, adv);
    CHECK(vt[0] == 0.0);
    CHECK(vt[1] == -1.0);
    CHECK(vt[2] == -1.0);
    CHECK(adv[0] == 0.0);

    for (auto& s : traj.steps) s.reward = 1;
    compute_returns_advantages(traj, 1.0, vt, adv);
    CHECK(vt[0] == 20.0);

    const auto r = selftest::ppo_suffix_sums(200);
    INFO(r.detail);
    CHECK(r.passed);
}

TEST_CASE("allocate_interval_orders sums exactly for any weights") {
    Rng rng(5);
    for (int it = 0; it < 300; ++it) {
        std::array<double, kIntervals> w{};
        double sum = 0.0;
        for (double& x : w) {
            x = std::exp(rng.normal());
            sum += x;
        }
        for (double& x : w) x /= sum;
        const int64_t O = static_cast<int64_t>(rng.uniform_index(200000));
        const auto orders = allocate_interval_orders(O, w);
        int64_t total = 0;
        for (int64_t o : orders) {
            CHECK(o >= 0);
            total += o;
        }
        CHECK(total == O);
    }
}

TEST_CASE("gather_episodes across modes") {
    const std::string dir = tu::small_dataset("gather", 4, 1, 31);
    const Dataset data = Dataset::load(dir);
    const int day = data.indices(DayRole::Train)[1];
    const VolumeStats stats = data.stats_for(day);
    const auto hist = historical_average_ushape(data.train_ratio_history());

    SUBCASE("HUL uses the historical average as level-1 weights") {
        TrainConfig cfg = small_config(Mode::Hul);
        Models models = Models::create(cfg);
        GatherOptions opt;
        opt.mode = Mode::Hul;
        opt.hist_avg = &hist;
        Rng rng(9);
        const DayTraj traj = gather_episodes(data, day, stats, models, opt, rng);
        for (int l = 0; l < kIntervals; ++l)
            CHECK(traj.u_used[static_cast<size_t>(l)] == hist[static_cast<size_t>(l)]);
        int64_t total = 0;
        for (const auto& itv : traj.intervals) total += itv.order;
        CHECK(total == traj.total_order);
    }
    SUBCASE("ppo-equal uses uniform weights; naive fills at the first slot") {
        TrainConfig cfg = small_config(Mode::PpoEqual);
        Models models = Models::create(cfg);
        GatherOptions opt;
        opt.mode = Mode::PpoEqual;
        Rng rng(10);
        const DayTraj traj = gather_episodes(data, day, stats, models, opt, rng);
        for (int l = 0; l < kIntervals; ++l)
            CHECK(traj.u_used[static_cast<size_t>(l)] == doctest::Approx(1.0 / 19));

        GatherOptions naive;
        naive.mode = Mode::Naive;
        Rng rng2(10);
        const DayTraj nt = gather_episodes(data, day, stats, models, naive, rng2);
        const DayView& view = data.view(day);
        for (int l = 0; l < kIntervals; ++l)
            for (int t = 0; t < kSubintervals; ++t)
                CHECK(nt.intervals[static_cast<size_t>(l)].steps[static_cast<size_t>(t)].fill_price ==
                      view.first_slot_vwap(l, t));
    }
    SUBCASE("fixed seed reproduces the trajectory exactly") {
        TrainConfig cfg = small_config(Mode::Tul);
        Models models = Models::create(cfg);
        Tensor e_in(kIntervals, cfg.n_hist, 1.0 / 19);
        GatherOptions opt;
        opt.mode = Mode::Tul;
        opt.e_in = &e_in;
        Rng a(77), b(77);
        const DayTraj ta = gather_episodes(data, day, stats, models, opt, a);
        const DayTraj tb = gather_episodes(data, day, stats, models, opt, b);
        CHECK(ta.total_order == tb.total_order);
        CHECK(ta.mp_day == tb.mp_day);
        CHECK(ta.vwap_day == tb.vwap_day);
        for (int l = 0; l < kIntervals; ++l) {
            CHECK(ta.u_used[static_cast<size_t>(l)] == tb.u_used[static_cast<size_t>(l)]);
            for (int t = 0; t < kSubintervals; ++t) {
                const auto& sa = ta.intervals[static_cast<size_t>(l)].steps[static_cast<size_t>(t)];
                const auto& sb = tb.intervals[static_cast<size_t>(l)].steps[static_cast<size_t>(t)];
                CHECK(sa.action == sb.action);
                CHECK(sa.log_prob == sb.log_prob);
                CHECK(sa.executed == sb.executed);
            }
        }
        // TUL telescoping: level-1 weights sum to one
        double usum = 0.0;
        for (double u : ta.u_used) usum += u;
        CHECK(std::fabs(usum - 1.0) < 1e-9);
    }
}

TEST_CASE("old-policy ratios: replay reproduces stored log_probs bit-exactly") {
    const std::string dir = tu::small_dataset("ratios", 3, 1, 41);
    const Dataset data = Dataset::load(dir);
    const int day = data.indices(DayRole::Train)[0];
    TrainConfig cfg = small_config(Mode::PpoEqual);
    Models models = Models::create(cfg);
    GatherOptions opt;
    opt.mode = Mode::PpoEqual;
    Rng rng(55);
    const DayTraj traj = gather_episodes(data, day, data.stats_for(day), models, opt, rng);

    std::vector<const IntervalTraj*> chunk;
    for (const auto& itv : traj.intervals) chunk.push_back(&itv);
    const PpoBatch batch = make_ppo_batch(chunk, cfg.gamma);
    Graph g;
    const auto out = models.policy.evaluate_actions(g, models.policy_store, batch.seq);
    for (int t = 0; t < kSubintervals; ++t)
        for (size_t b = 0; b < chunk.size(); ++b)
            CHECK(out.log_probs[static_cast<size_t>(t)].val().at(static_cast<int64_t>(b), 0) ==
                  chunk[b]->steps[static_cast<size_t>(t)].log_prob); // bit-exact

    SUBCASE("hence J_CLIP at theta_old equals the mean advantage") {
        Graph g2;
        const auto parts = ppo_loss(g2, models.policy_store, models.policy, batch, cfg);
        double mean_adv = 0.0;
        for (int t = 0; t < kSubintervals; ++t)
            for (size_t b = 0; b < chunk.size(); ++b)
                mean_adv += batch.advantages[static_cast<size_t>(t)].at(static_cast<int64_t>(b), 0);
        mean_adv /= static_cast<double>(kSubintervals * chunk.size());
        CHECK(parts.j_clip.val().item() == doctest::Approx(mean_adv).epsilon(1e-12));
    }
}

TEST_CASE("ppo sanity ascent: one step raises log_prob * advantage") {
    // epsilon -> effectively infinite, c3 = c4 = 0, single frozen sample
    const std::string dir = tu::small_dataset("ascent", 3, 1, 51);
    const Dataset data = Dataset::load(dir);
    const int day = data.indices(DayRole::Train)[0];
    TrainConfig cfg = small_config(Mode::PpoEqual);
    cfg.clip_eps = 1e9;
    cfg.c3 = 0.0;
    cfg.c4 = 0.0;
    Models models = Models::create(cfg);
    GatherOptions opt;
    opt.mode = Mode::PpoEqual;
    Rng rng(66);
    const DayTraj traj = gather_episodes(data, day, data.stats_for(day), models, opt, rng);
    std::vector<const IntervalTraj*> one = {&traj.intervals[4]};
    const PpoBatch batch = make_ppo_batch(one, cfg.gamma);

    auto objective = [&]() {
        Graph g;
        const auto out = models.policy.evaluate_actions(g, models.policy_store, batch.seq);
        double v = 0.0;
        for (int t = 0; t < kSubintervals; ++t)
            v += out.log_probs[static_cast<size_t>(t)].val().at(0, 0) *
                 batch.advantages[static_cast<size_t>(t)].at(0, 0);
        return v;
    };
    const double before = objective();
    Graph g;
    const auto parts = ppo_loss(g, models.policy_store, models.policy, batch, cfg);
    models.policy_store.zero_grad();
    Value loss = g.scale(parts.objective, -1.0);
    g.backward(loss);
    nn::adam_step(models.policy_store, 1e-3);
    CHECK(objective() > before);
}

TEST_CASE("train: determinism, checkpoints, resume") {
    const std::string dir = tu::small_dataset("train", 4, 2, 61);
    const Dataset data = Dataset::load(dir);
    SUBCASE("two identical seeds give byte-identical checkpoints") {
        for (Mode mode : {Mode::Hul, Mode::Tul}) {
            CAPTURE(to_string(mode));
            const TrainConfig cfg = small_config(mode, 71);
            const std::string out1 = tu::temp_dir("t1"), out2 = tu::temp_dir("t2");
            train(cfg, data, out1, nullptr);
            train(cfg, data, out2, nullptr);
            CHECK(tu::file_bytes(out1 + "/checkpoint.bin") ==
                  tu::file_bytes(out2 + "/checkpoint.bin"));
        }
    }
    SUBCASE("checkpoint restores models and rng for resume") {
        // identical schedules: interrupt after the periodic checkpoint at
        // iteration 2 and continue to the same horizon
        TrainConfig cfg = small_config(Mode::Hul, 81);
        cfg.outer_iterations = 3;
        cfg.checkpoint_every = 2;
        const std::string full_dir = tu::temp_dir("full");
        const TrainResult full = train(cfg, data, full_dir, nullptr);

        TrainConfig rest = cfg;
        rest.resume_checkpoint = full_dir + "/checkpoint_latest.bin"; // iteration 2
        const std::string rest_dir = tu::temp_dir("rest");
        const TrainResult resumed = train(rest, data, rest_dir, nullptr);
        CHECK(tu::file_bytes(full.checkpoint_path) == tu::file_bytes(resumed.checkpoint_path));
    }
    SUBCASE("training log has one line per outer iteration") {
        TrainConfig cfg = small_config(Mode::Hul, 91);
        const std::string out = tu::temp_dir("log");
        const TrainResult res = train(cfg, data, out, nullptr);
        std::ifstream is(res.log_path);
        std::string line;
        int lines = 0;
        while (std::getline(is, line)) ++lines;
        CHECK(lines == 1 + cfg.outer_iterations); // header + per-iteration rows
    }
}

TEST_CASE("ppo clip arithmetic (selftest)") {
    const auto r = selftest::ppo_clip_cases();
    INFO(r.detail);
    CHECK(r.passed);
}
