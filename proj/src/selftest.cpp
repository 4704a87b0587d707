#include "vwapx/selftest.hpp"

#include <cmath>
#include <sstream>

#include "vwapx/layers.hpp"
#include "vwapx/market_data.hpp"
#include "vwapx/policy.hpp"
#include "vwapx/trainer.hpp"
#include "vwapx/ushape.hpp"

namespace vwapx::selftest {

using nn::Graph;
using nn::ParamStore;
using nn::Tensor;
using nn::Value;

double fd_max_rel_error(ParamStore& store, const std::function<double()>& loss,
                        const std::function<void()>& backward, double step) {
    store.zero_grad();
    backward();
    double worst = 0.0;
    for (auto& [name, e] : store.entries) {
        for (int64_t i = 0; i < e.value.size(); ++i) {
            const double orig = e.value[i];
            e.value[i] = orig + step;
            const double fp = loss();
            e.value[i] = orig - step;
            const double fm = loss();
            e.value[i] = orig;
            const double fd = (fp - fm) / (2.0 * step);
            const double an = e.grad[i];
            const double rel =
                std::fabs(an - fd) / std::max({1.0, std::fabs(an), std::fabs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

namespace {

Tensor random_tensor(int64_t r, int64_t c, Rng& rng, double scale = 1.0) {
    Tensor t(r, c);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

CheckResult fd_result(const std::string& name, double worst, double tol = 1e-3) {
    std::ostringstream os;
    os << "max rel err " << worst << " (tol " << tol << ")";
    return {name, worst < tol, os.str()};
}

} // namespace

CheckResult gradient_ops() {
    Rng rng(20260811);
    double worst = 0.0;
    std::string worst_op;
    auto check = [&](const std::string& op, ParamStore& store,
                     const std::function<Value(Graph&)>& build) {
        auto loss = [&]() {
            Graph g;
            return build(g).val().item();
        };
        auto backward = [&]() {
            Graph g;
            Value l = build(g);
            g.backward(l);
        };
        const double err = fd_max_rel_error(store, loss, backward);
        if (err > worst) {
            worst = err;
            worst_op = op;
        }
    };

    { // linear
        ParamStore s;
        nn::init_linear(s, "lin", 5, 7, rng);
        Tensor x = random_tensor(3, 5, rng);
        check("linear", s, [&](Graph& g) {
            return g.mean_all(g.square_(nn::linear_named(g, s, "lin", g.constant(x))));
        });
    }
    { // softmax, both axes, through a parameter
        ParamStore s;
        s.create("w", random_tensor(4, 6, rng));
        Tensor m = random_tensor(4, 6, rng);
        check("softmax", s, [&](Graph& g) {
            Value x = g.mul(g.param(s, "w"), g.constant(m));
            Value a = nn::softmax(g, x, 1);
            Value b = nn::softmax(g, x, 0);
            return g.add(g.mean_all(g.square_(a)), g.mean_all(g.mul(b, g.constant(m))));
        });
    }
    { // layer_norm
        ParamStore s;
        s.create("x", random_tensor(4, 8, rng));
        nn::init_layer_norm(s, "ln", 8);
        // nudge gains off 1 so the gain path is exercised
        for (int64_t i = 0; i < 8; ++i) s.get("ln.g").value[i] = 1.0 + 0.1 * rng.normal();
        check("layer_norm", s, [&](Graph& g) {
            return g.mean_all(g.square_(nn::layer_norm_named(g, s, "ln", g.param(s, "x"))));
        });
    }
    { // lstm_cell (single step)
        ParamStore s;
        nn::init_lstm(s, "lstm", 6, 5, rng);
        Tensor x = random_tensor(2, 6, rng);
        Tensor h0 = random_tensor(2, 5, rng, 0.5), c0 = random_tensor(2, 5, rng, 0.5);
        check("lstm_cell", s, [&](Graph& g) {
            auto st = nn::lstm_cell(g, g.constant(x), {g.constant(h0), g.constant(c0)},
                                    nn::lstm_weights(g, s, "lstm"));
            return g.add(g.mean_all(g.square_(st.h)), g.mean_all(g.square_(st.c)));
        });
    }
    { // multi_head_attention with causal mask
        ParamStore s;
        nn::init_mha(s, "attn", 8, rng);
        Tensor q = random_tensor(4, 8, rng);
        Tensor mask = nn::causal_mask(4);
        check("multi_head_attention", s, [&](Graph& g) {
            Value x = g.constant(q);
            Value y = nn::multi_head_attention(g, x, x, x, nn::mha_weights(g, s, "attn"), 4,
                                               &mask);
            return g.mean_all(g.square_(y));
        });
    }
    { // pffn (relu path)
        ParamStore s;
        nn::init_pffn(s, "ff", 6, 8, rng);
        Tensor x = random_tensor(3, 6, rng);
        check("pffn", s, [&](Graph& g) {
            return g.mean_all(g.square_(nn::pffn(g, g.constant(x), nn::pffn_weights(g, s, "ff"))));
        });
    }
    { // elementwise & reduction ops: exp/log/abs/min/clamp/gather/log_softmax
        ParamStore s;
        s.create("a", random_tensor(3, 4, rng, 0.7));
        s.create("b", random_tensor(3, 4, rng, 0.7));
        check("pointwise_ops", s, [&](Graph& g) {
            Value a = g.param(s, "a");
            Value b = g.param(s, "b");
            Value t1 = g.mean_all(g.exp_(g.scale(a, 0.3)));
            Value t2 = g.mean_all(g.log_(g.add_const(g.square_(b), 1.0)));
            Value t3 = g.mean_all(g.abs_(g.sub(a, b)));
            Value t4 = g.mean_all(g.min_(a, b));
            Value t5 = g.mean_all(g.clamp_(a, -0.5, 0.5));
            Value ls = g.log_softmax_rows(g.concat_cols({a, b}));
            Value t6 = g.mean_all(g.gather_cols(ls, {1, 4, 6}));
            Value t7 = g.mean_all(g.row_sum(g.mul(g.tanh_(a), g.sigmoid_(b))));
            Value t8 = g.mean_all(g.transpose(g.relu_(a)));
            Value acc = t1;
            for (Value v : {t2, t3, t4, t5, t6, t7, t8}) acc = g.add(acc, v);
            return acc;
        });
    }
    return fd_result("gradient/ops(" + (worst_op.empty() ? "-" : worst_op) + ")", worst);
}

CheckResult gradient_policy_bptt() {
    Rng rng(7);
    PolicyNet policy(PolicyConfig{5, 6, 4, ActionValue::kCount});
    ParamStore store;
    policy.init(store, rng);
    PolicyNet::EvalSequences seq;
    for (int t = 0; t < 3; ++t) {
        seq.states.push_back(random_tensor(2, 5, rng));
        seq.prev.push_back(random_tensor(2, 2, rng, 0.5));
        seq.actions.push_back({static_cast<int64_t>(t * 3 % 21), static_cast<int64_t>(20 - t)});
    }
    auto build = [&](Graph& g) {
        auto out = policy.evaluate_actions(g, store, seq);
        Value acc;
        for (size_t t = 0; t < out.log_probs.size(); ++t) {
            Value term = g.add(g.add(g.sum_all(out.log_probs[t]),
                                     g.sum_all(g.square_(out.values[t]))),
                               g.scale(g.sum_all(out.entropies[t]), 0.1));
            acc = t == 0 ? term : g.add(acc, term);
        }
        return acc;
    };
    auto loss = [&]() {
        Graph g;
        return build(g).val().item();
    };
    auto backward = [&]() {
        Graph g;
        Value l = build(g);
        g.backward(l);
    };
    return fd_result("gradient/policy-3step-bptt", fd_max_rel_error(store, loss, backward));
}

CheckResult gradient_ushape_pipeline() {
    Rng rng(11);
    UshapeConfig cfg;
    cfg.seq_len = 4;
    cfg.n_hist = 3;
    cfg.d_model = 8;
    cfg.pffn_dim = 8;
    cfg.heads = 4;
    cfg.premarket_dim = 6;
    UshapeNet net(cfg);
    ParamStore store;
    net.init(store, rng);

    Tensor e_in = random_tensor(cfg.seq_len, cfg.n_hist, rng, 0.1);
    Tensor premarket = random_tensor(1, cfg.premarket_dim, rng, 0.3);
    std::vector<Tensor> hiddens;
    for (int l = 0; l + 1 < cfg.seq_len; ++l)
        hiddens.push_back(random_tensor(1, cfg.hidden(), rng, 0.5));
    std::vector<double> u_true = {0.4, 0.3, 0.2, 0.1};
    std::vector<double> prices = {101.0, 99.5, 100.25, 100.75};
    const double vwap = 100.4;

    auto build = [&](Graph& g) {
        Value e_out = net.encode(g, store, e_in);
        UshapeNet::Decoder dec(g, store, net, e_out, net.build_d0(g, store, premarket));
        for (int l = 0; l < cfg.seq_len; ++l) {
            dec.step(l);
            if (l + 1 < cfg.seq_len) dec.push_hidden(hiddens[static_cast<size_t>(l)]);
        }
        return tf_loss(g, dec.u_pred_row(), u_true, prices, vwap, 0.5, 0.5);
    };
    auto loss = [&]() {
        Graph g;
        return build(g).val().item();
    };
    auto backward = [&]() {
        Graph g;
        Value l = build(g);
        g.backward(l);
    };
    return fd_result("gradient/ushape-pipeline", fd_max_rel_error(store, loss, backward));
}

CheckResult structural_upred(int draws) {
    Rng rng(3030);
    UshapeConfig small;
    small.seq_len = kIntervals;
    small.n_hist = 4;
    small.d_model = 32; // hidden 13
    small.pffn_dim = 16;
    small.heads = 4;
    UshapeConfig full; // Table-4 dims
    int failures = 0;
    double worst_sum_err = 0.0;
    for (int it = 0; it < draws; ++it) {
        const UshapeConfig& cfg = it % 50 == 0 ? full : small;
        UshapeNet net(cfg);
        ParamStore store;
        Rng init = Rng::derive(99, static_cast<uint64_t>(it));
        net.init(store, init);
        // spread parameter scales so softmaxes see a wide range of logits
        const double scale = std::exp(init.uniform(-1.0, 2.0));
        for (auto& [name, e] : store.entries)
            for (int64_t i = 0; i < e.value.size(); ++i) e.value[i] *= scale;
        Graph g;
        Tensor e_in = random_tensor(cfg.seq_len, cfg.n_hist, init, 0.2);
        Tensor pm = random_tensor(1, cfg.premarket_dim, init, 0.4);
        Value e_out = net.encode(g, store, e_in);
        UshapeNet::Decoder dec(g, store, net, e_out, net.build_d0(g, store, pm));
        double sum = 0.0;
        bool ok = true;
        for (int l = 0; l < cfg.seq_len; ++l) {
            auto st = dec.step(l);
            const double u = st.u_pred.val().item();
            if (u < 0.0 || !std::isfinite(u)) ok = false;
            const Tensor& d = st.d_out.val();
            for (int j = 0; j < l; ++j)
                if (d[j] != 0.0) ok = false; // zero-padding must be exact
            sum += u;
            if (l + 1 < cfg.seq_len)
                dec.push_hidden(random_tensor(1, cfg.hidden(), init, 2.0));
        }
        worst_sum_err = std::max(worst_sum_err, std::fabs(sum - 1.0));
        if (!ok || std::fabs(sum - 1.0) > 1e-9) ++failures;
    }
    std::ostringstream os;
    os << draws << " draws, worst |sum-1| " << worst_sum_err << ", failures " << failures;
    return {"structural/u_pred-simplex", failures == 0, os.str()};
}

CheckResult structural_conservation(int episodes) {
    Rng rng(515151);
    SynthConfig cfg;
    cfg.daily_volume = 2e6;
    std::vector<SynthDay> tapes;
    std::vector<DayView> views;
    tapes.reserve(3);
    for (int i = 0; i < 3; ++i) tapes.push_back(synth_generate(cfg, "2021-06-0" + std::to_string(i + 1), rng));
    for (auto& t : tapes) views.emplace_back(t.tape);
    int failures = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        const DayView& view = views[static_cast<size_t>(rng.uniform_index(views.size()))];
        // random day order split over intervals, then a random-action episode
        const int64_t O = 1 + static_cast<int64_t>(rng.uniform_index(100000));
        std::array<double, kIntervals> w{};
        for (double& x : w) x = std::exp(rng.normal());
        double ws = 0.0;
        for (double x : w) ws += x;
        for (double& x : w) x /= ws;
        const auto orders = allocate_interval_orders(O, w);
        int64_t day_total = 0;
        for (int64_t o : orders) day_total += o;
        if (day_total != O) ++failures;
        const int l = static_cast<int>(rng.uniform_index(kIntervals));
        IntervalEnv env(view, l, orders[static_cast<size_t>(l)]);
        int64_t executed = 0;
        while (!env.done()) {
            const auto res = env.step(
                ActionValue::from_index(static_cast<int>(rng.uniform_index(ActionValue::kCount))));
            executed += res.executed;
            if (res.executed < 0) ++failures;
        }
        if (executed != orders[static_cast<size_t>(l)]) ++failures;
        if (env.state().remaining != 0) ++failures;
    }
    std::ostringstream os;
    os << episodes << " episodes, failures " << failures;
    return {"structural/liquidation-exact", failures == 0, os.str()};
}

CheckResult oracle_reward_grid(int per_axis) {
    // Independent three-branch reference evaluated in long double.
    auto reference = [](int64_t executed, int64_t target) -> int {
        if (target == 0) return executed == 0 ? 1 : -1;
        const long double m = fabsl(static_cast<long double>(executed) -
                                    static_cast<long double>(target)) /
                              static_cast<long double>(target);
        if (m < 0.01L) return 1;
        if (m < 0.05L) return 0;
        return -1;
    };
    int failures = 0;
    for (int i = 0; i < per_axis; ++i) {
        for (int j = 0; j < per_axis; ++j) {
            const int64_t executed = i;
            const int64_t target = j;
            if (reward_fn(executed, target) != reference(executed, target)) ++failures;
        }
    }
    std::ostringstream os;
    os << per_axis * per_axis << " pairs, failures " << failures;
    return {"oracle/reward-grid", failures == 0, os.str()};
}

CheckResult oracle_target_strategy(int tapes) {
    Rng rng(616161);
    double worst_bps = 0.0;
    int failures = 0;
    for (int i = 0; i < tapes; ++i) {
        SynthConfig cfg;
        cfg.u_noise = 0.05 + 0.1 * rng.uniform();
        cfg.price_vol = 0.005 + 0.02 * rng.uniform();
        SynthDay day = synth_generate(cfg, "2021-07-01", rng);
        DayView view(day.tape);
        const int64_t O = 500 + static_cast<int64_t>(rng.uniform_index(80000));
        const auto targets = day_targets(view, O);
        std::vector<IntervalEpisode> episodes;
        for (int l = 0; l < kIntervals; ++l) {
            int64_t O_l = 0;
            for (int64_t v : targets[static_cast<size_t>(l)]) O_l += v;
            IntervalEnv env(view, l, O_l);
            for (int t = 0; t < kSubintervals; ++t)
                env.step_exact(targets[static_cast<size_t>(l)][static_cast<size_t>(t)]);
            episodes.push_back(env.episode());
        }
        const double mp = model_price(episodes, O);
        const double vw = day_vwap(view, targets);
        const double bps = vaa(mp, vw) * 1e4;
        worst_bps = std::max(worst_bps, bps);
        if (bps >= 0.01) ++failures;
    }
    std::ostringstream os;
    os << tapes << " tapes, worst VAA " << worst_bps << " bps";
    return {"oracle/target-strategy-vaa", failures == 0, os.str()};
}

CheckResult ppo_clip_cases() {
    // Exercise the clip arithmetic through the same graph ops ppo_loss uses.
    auto clip_term = [](double q, double eps, double adv) {
        Graph g;
        Value ratio = g.exp_(g.log_(g.constant_scalar(q)));
        Value a = g.constant_scalar(adv);
        Value unclipped = g.mul(ratio, a);
        Value clipped = g.mul(g.clamp_(ratio, 1.0 - eps, 1.0 + eps), a);
        return g.min_(unclipped, clipped).val().item();
    };
    bool ok = true;
    std::ostringstream os;
    const double c1 = clip_term(1.5, 0.2, 1.0);
    const double c2 = clip_term(0.5, 0.2, -1.0);
    const double c3 = clip_term(1.0, 0.2, 0.7321);
    ok &= c1 == 1.2;
    ok &= c2 == -0.8;
    ok &= c3 == 0.7321;
    os << "(1.5,.2,+1)->" << c1 << " (0.5,.2,-1)->" << c2 << " (1,.2,A)->" << c3;
    // theta = theta_old: every ratio is exactly 1, so J_CLIP equals mean(adv).
    Rng rng(99);
    PolicyNet policy(PolicyConfig{4, 5, 3, ActionValue::kCount});
    ParamStore store;
    policy.init(store, rng);
    PolicyNet::EvalSequences seq;
    std::vector<Tensor> lp_old;
    std::vector<Tensor> states, prevs;
    for (int t = 0; t < 3; ++t) {
        states.push_back(random_tensor(2, 4, rng));
        prevs.push_back(random_tensor(2, 2, rng, 0.3));
        seq.states.push_back(states.back());
        seq.prev.push_back(prevs.back());
        seq.actions.push_back({3, 17});
    }
    {
        Graph g;
        auto out = policy.evaluate_actions(g, store, seq);
        for (auto& v : out.log_probs) lp_old.push_back(v.val());
    }
    PpoBatch batch;
    batch.seq = seq;
    batch.old_log_probs = lp_old;
    double adv_mean = 0.0;
    for (int t = 0; t < 3; ++t) {
        batch.advantages.push_back(random_tensor(2, 1, rng));
        batch.v_targets.push_back(random_tensor(2, 1, rng));
        for (int64_t b = 0; b < 2; ++b) adv_mean += batch.advantages.back().at(b, 0);
    }
    adv_mean /= 6.0;
    TrainConfig cfg;
    Graph g;
    const auto parts = ppo_loss(g, store, policy, batch, cfg);
    const double jc = parts.j_clip.val().item();
    ok &= std::fabs(jc - adv_mean) < 1e-15;
    os << "; identity J_CLIP " << jc << " vs mean adv " << adv_mean;
    return {"ppo/clip-arithmetic", ok, os.str()};
}

CheckResult ppo_suffix_sums(int sequences) {
    Rng rng(4242);
    int failures = 0;
    for (int s = 0; s < sequences; ++s) {
        IntervalTraj traj;
        for (int t = 0; t < kSubintervals; ++t) {
            traj.steps[static_cast<size_t>(t)].reward =
                static_cast<int>(rng.uniform_index(3)) - 1;
            traj.steps[static_cast<size_t>(t)].value = rng.normal();
        }
        std::array<double, kSubintervals> vt{}, adv{};
        compute_returns_advantages(traj, 1.0, vt, adv);
        // O(T^2) brute force
        for (int t = 0; t < kSubintervals; ++t) {
            double acc = 0.0;
            for (int k = t; k < kSubintervals; ++k)
                acc += static_cast<double>(traj.steps[static_cast<size_t>(k)].reward);
            if (vt[static_cast<size_t>(t)] != acc) ++failures;
            if (adv[static_cast<size_t>(t)] !=
                acc - traj.steps[static_cast<size_t>(t)].value)
                ++failures;
        }
    }
    std::ostringstream os;
    os << sequences << " sequences, failures " << failures;
    return {"ppo/suffix-sum-oracle", failures == 0, os.str()};
}

std::vector<CheckResult> run_all(bool quick) {
    std::vector<CheckResult> out;
    out.push_back(gradient_ops());
    out.push_back(gradient_policy_bptt());
    out.push_back(gradient_ushape_pipeline());
    out.push_back(structural_upred(quick ? 100 : 1000));
    out.push_back(structural_conservation(quick ? 100 : 1000));
    out.push_back(oracle_reward_grid(100));
    out.push_back(oracle_target_strategy(quick ? 3 : 10));
    out.push_back(ppo_clip_cases());
    out.push_back(ppo_suffix_sums(quick ? 100 : 1000));
    return out;
}

} // namespace vwapx::selftest
