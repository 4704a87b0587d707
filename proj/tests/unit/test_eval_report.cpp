#include <doctest.h>

#include <charconv>
#include <cmath>
#include <fstream>

#include "testutil.hpp"
#include "vwapx/eval_report.hpp"

using namespace vwapx;
namespace tu = vwapx::testutil;

TEST_CASE("histogram binning") {
    CHECK(histogram(std::vector<double>{5, 15, 25}, 10.0) == std::vector<int64_t>{1, 1, 1});
    CHECK(histogram(std::vector<double>{0, 9.999, 10.0}, 10.0) == std::vector<int64_t>{2, 1});
    CHECK_THROWS(histogram(std::vector<double>{1.0}, 0.0));
}

TEST_CASE("ushape_report") {
    std::array<double, kIntervals> a{}, b{};
    for (int l = 0; l < kIntervals; ++l) {
        a[static_cast<size_t>(l)] = 1.0 / 19;
        b[static_cast<size_t>(l)] = (l == 0) ? 2.0 / 19 : (l == 1 ? 0.0 : 1.0 / 19);
    }
    SUBCASE("perfect prediction has zero MAE") {
        const auto rep = ushape_report(std::vector{a, b}, std::vector{a, b});
        for (int l = 0; l < kIntervals; ++l) CHECK(rep.mae[static_cast<size_t>(l)] == 0.0);
    }
    SUBCASE("averaging overlays equals the column mean / historical average") {
        const auto rep = ushape_report(std::vector{a, b}, std::vector{b, a});
        const auto avg = historical_average_ushape({a, b});
        for (int l = 0; l < kIntervals; ++l) {
            CHECK(rep.mean_true[static_cast<size_t>(l)] ==
                  doctest::Approx(avg[static_cast<size_t>(l)]).epsilon(1e-12));
            CHECK(rep.mean_pred[static_cast<size_t>(l)] ==
                  doctest::Approx(avg[static_cast<size_t>(l)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("evaluate: oracle is exact; rule baselines are worse on volatile tapes") {
    const std::string dir = tu::small_dataset("eval", 4, 3, 101);
    const Dataset data = Dataset::load(dir);
    EvalConfig cfg;
    cfg.mode = Mode::Oracle;
    cfg.seed = 5;
    const EvalResult oracle = evaluate(data, cfg);
    CHECK(oracle.summary.mean_bps < 0.01);
    CHECK(oracle.summary.pct_within_10bps == 100.0);

    EvalConfig naive = cfg;
    naive.mode = Mode::Naive;
    const EvalResult nv = evaluate(data, naive);
    CHECK(nv.summary.mean_bps > oracle.summary.mean_bps);

    SUBCASE("deterministic given (tapes, seed)") {
        const EvalResult again = evaluate(data, naive);
        REQUIRE(again.summary.rows.size() == nv.summary.rows.size());
        for (size_t i = 0; i < again.summary.rows.size(); ++i)
            CHECK(again.summary.rows[i].vaa_bps == nv.summary.rows[i].vaa_bps);
    }
    SUBCASE("hu-ppo runs without a checkpoint") {
        EvalConfig hp = cfg;
        hp.mode = Mode::HuPpo;
        const EvalResult r = evaluate(data, hp);
        CHECK(r.summary.rows.size() == 3);
        CHECK(std::isfinite(r.summary.mean_bps));
    }
    SUBCASE("policy modes require a checkpoint") {
        EvalConfig pm = cfg;
        pm.mode = Mode::Hul;
        CHECK_THROWS(evaluate(data, pm));
    }
}

TEST_CASE("uniform-price tape gives VAA 0 for any allocation") {
    // constant traded price: every fill and the VWAP coincide
    const std::string dir = tu::temp_dir("flat");
    const DayTape flat = tu::constant_tape(50000.0, 400);
    SynthDatasetConfig meta;
    // hand-write a one-day dataset around the flat tape
    write_tape(dir + "/day_000.csv", flat);
    {
        std::ofstream m(dir + "/manifest.csv");
        m << "index,date,role,file,total_volume\n";
        m << "0," << flat.date << ",test,day_000.csv," << 400LL * kSlotsPerDay << "\n";
    }
    // stats need 60 prior days; evaluate() uses stats_for, so bypass via a
    // direct gather with fixed stats instead
    const Dataset data = Dataset::load(dir);
    TrainConfig tc;
    tc.mode = Mode::Hul;
    tc.policy_feat_dim = 8;
    tc.policy_hidden = 6;
    Models models = Models::create(tc);
    GatherOptions opt;
    opt.mode = Mode::Naive;
    Rng rng(7);
    const DayTraj traj = gather_episodes(data, 0, VolumeStats{1e6, 2e5}, models, opt, rng);
    CHECK(traj.vaa_day * 1e4 < 1e-9);
}

TEST_CASE("summary.csv matches a brute-force recomputation to 1e-12") {
    const std::string dir = tu::small_dataset("sumcsv", 3, 4, 111);
    const Dataset data = Dataset::load(dir);
    EvalConfig cfg;
    cfg.mode = Mode::HuPpo;
    cfg.seed = 9;
    const EvalResult result = evaluate(data, cfg);
    const std::string out = tu::temp_dir("sumcsv_out");
    const std::string summary = write_eval_artifacts(out, result, 5.0);

    std::ifstream is(summary);
    std::string line;
    std::getline(is, line); // header
    std::vector<double> vaas;
    double mean = 0, stdev = 0, pct = 0;
    size_t n_claimed = 0;
    while (std::getline(is, line)) {
        if (line.rfind("aggregate,", 0) == 0) {
            // aggregate,<n>,,<mean>,<std>,<pct>
            std::vector<std::string> f;
            std::string cur;
            for (char c : line) {
                if (c == ',') {
                    f.push_back(cur);
                    cur.clear();
                } else
                    cur.push_back(c);
            }
            f.push_back(cur);
            REQUIRE(f.size() == 6);
            n_claimed = std::stoull(f[1]);
            mean = std::stod(f[3]);
            stdev = std::stod(f[4]);
            pct = std::stod(f[5]);
        } else {
            const auto pos = line.rfind(',');
            vaas.push_back(std::stod(line.substr(pos + 1)));
        }
    }
    REQUIRE(vaas.size() == n_claimed);
    double m = 0;
    for (double v : vaas) m += v;
    m /= static_cast<double>(vaas.size());
    double var = 0;
    int within = 0;
    for (double v : vaas) {
        var += (v - m) * (v - m);
        if (v <= 10.0) ++within;
    }
    var /= static_cast<double>(vaas.size());
    CHECK(std::fabs(mean - m) < 1e-12);
    CHECK(std::fabs(stdev - std::sqrt(var)) < 1e-12);
    CHECK(std::fabs(pct - 100.0 * within / static_cast<double>(vaas.size())) < 1e-12);

    SUBCASE("artifacts exist") {
        CHECK(std::filesystem::exists(out + "/vaa_histogram.svg"));
        CHECK(std::filesystem::exists(out + "/vaa_histogram.csv"));
        CHECK(std::filesystem::exists(out + "/ushape_avg.svg"));
        CHECK(std::filesystem::exists(out + "/ushape_avg.csv"));
        CHECK(std::filesystem::exists(out + "/ushape_day_" + result.dates[0] + ".svg"));
    }
}

TEST_CASE("pct_within_10bps includes the boundary") {
    std::vector<EvalDayRow> rows(2);
    rows[0].vaa_bps = 10.0;
    rows[1].vaa_bps = 10.0001;
    const EvalSummary s = summarize(rows);
    CHECK(s.pct_within_10bps == doctest::Approx(50.0));
}
