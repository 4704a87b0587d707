#include "vwapx/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "vwapx/checkpoint.hpp"

namespace vwapx {

namespace fs = std::filesystem;
using nn::Graph;
using nn::LstmState;
using nn::Tensor;
using nn::Value;

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::Tul: return "tul";
    case Mode::Hul: return "hul";
    case Mode::HuPpo: return "hu-ppo";
    case Mode::PpoEqual: return "ppo";
    case Mode::Naive: return "naive";
    case Mode::Oracle: return "oracle";
    }
    throw std::logic_error("bad Mode");
}

Mode mode_from_string(const std::string& s) {
    if (s == "tul") return Mode::Tul;
    if (s == "hul") return Mode::Hul;
    if (s == "hu-ppo") return Mode::HuPpo;
    if (s == "ppo") return Mode::PpoEqual;
    if (s == "naive") return Mode::Naive;
    if (s == "oracle") return Mode::Oracle;
    throw std::runtime_error("unknown mode '" + s + "' (want tul|hul|hu-ppo|ppo|naive|oracle)");
}

bool mode_trainable(Mode mode) {
    return mode == Mode::Tul || mode == Mode::Hul || mode == Mode::PpoEqual;
}

bool mode_uses_policy(Mode mode) { return mode_trainable(mode); }

int TrainConfig::resolved_days() const {
    if (days_per_iter > 0) return days_per_iter;
    return mode == Mode::Tul ? 12 : 8; // Table-4 trajectory counts / 19
}

int TrainConfig::resolved_hidden() const {
    if (policy_hidden > 0) return policy_hidden;
    return mode == Mode::Tul ? 129 : 128;
}

int TrainConfig::resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void TrainConfig::validate() const {
    if (!mode_trainable(mode))
        throw std::runtime_error("mode '" + to_string(mode) +
                                 "' has no trainable parameters; train with tul, hul, or ppo");
    if (outer_iterations <= 0) throw std::runtime_error("outer_iterations must be positive");
    if (inner_epochs <= 0 || batch_size <= 0)
        throw std::runtime_error("inner_epochs and batch_size must be positive");
    if (clip_eps <= 0.0) throw std::runtime_error("clip_eps must be positive");
    if (gamma < 0.0 || gamma > 1.0) throw std::runtime_error("gamma must be in [0,1]");
    if (n_hist <= 0) throw std::runtime_error("n_hist must be positive");
    if (resolved_hidden() <= 0 || policy_feat_dim <= 0)
        throw std::runtime_error("network dims must be positive");
}

Models Models::create(const TrainConfig& config) {
    Models m{PolicyNet(PolicyConfig{kStateDim, config.policy_feat_dim, config.resolved_hidden(),
                                    ActionValue::kCount}),
             std::nullopt,
             {},
             {}};
    Rng rng = Rng::derive(config.seed, 0x1217);
    m.policy.init(m.policy_store, rng);
    if (config.mode == Mode::Tul) {
        UshapeConfig uc;
        uc.seq_len = kIntervals;
        uc.n_hist = config.n_hist;
        uc.d_model = kIntervals + config.resolved_hidden();
        uc.pffn_dim = config.tf_pffn_dim;
        uc.heads = config.tf_heads;
        uc.premarket_dim = 10;
        m.ushape.emplace(uc);
        m.ushape->init(m.tf_store, rng);
    }
    return m;
}

void Models::save(nn::Checkpoint& ckpt) const {
    nn::store_to_checkpoint(policy_store, "p/", ckpt);
    if (ushape) nn::store_to_checkpoint(tf_store, "tf/", ckpt);
    const PolicyConfig& pc = policy.config();
    Tensor dims(1, 9);
    dims[0] = pc.state_dim;
    dims[1] = pc.feat_dim;
    dims[2] = pc.hidden;
    dims[3] = ushape ? ushape->config().seq_len : kIntervals;
    dims[4] = ushape ? ushape->config().n_hist : 0;
    dims[5] = ushape ? ushape->config().d_model : 0;
    dims[6] = ushape ? ushape->config().pffn_dim : 0;
    dims[7] = ushape ? ushape->config().heads : 0;
    dims[8] = ushape ? ushape->config().premarket_dim : 0;
    ckpt.tensors["meta/dims"] = dims;
}

Models Models::from_checkpoint(const nn::Checkpoint& ckpt) {
    const Tensor& dims = ckpt.tensors.at("meta/dims");
    PolicyConfig pc;
    pc.state_dim = static_cast<int>(dims[0]);
    pc.feat_dim = static_cast<int>(dims[1]);
    pc.hidden = static_cast<int>(dims[2]);
    Models m{PolicyNet(pc), std::nullopt, {}, {}};
    Rng scratch(0);
    m.policy.init(m.policy_store, scratch);
    nn::store_from_checkpoint(m.policy_store, "p/", ckpt);
    if (dims[5] > 0) {
        UshapeConfig uc;
        uc.seq_len = static_cast<int>(dims[3]);
        uc.n_hist = static_cast<int>(dims[4]);
        uc.d_model = static_cast<int>(dims[5]);
        uc.pffn_dim = static_cast<int>(dims[6]);
        uc.heads = static_cast<int>(dims[7]);
        uc.premarket_dim = static_cast<int>(dims[8]);
        m.ushape.emplace(uc);
        m.ushape->init(m.tf_store, scratch);
        nn::store_from_checkpoint(m.tf_store, "tf/", ckpt);
    }
    return m;
}

std::array<int64_t, kIntervals> allocate_interval_orders(int64_t O,
                                                         std::span<const double> weights) {
    if (static_cast<int>(weights.size()) != kIntervals)
        throw std::invalid_argument("allocate_interval_orders: need 19 weights");
    if (O < 0) throw std::invalid_argument("allocate_interval_orders: negative order");
    std::array<int64_t, kIntervals> out{};
    int64_t allocated = 0;
    double carry = 0.0;
    for (int l = 0; l < kIntervals; ++l) {
        const int64_t left = O - allocated;
        if (l == kIntervals - 1) {
            out[static_cast<size_t>(l)] = left;
        } else {
            const double exact = static_cast<double>(O) * weights[static_cast<size_t>(l)] + carry;
            int64_t o = std::llround(exact);
            o = std::clamp<int64_t>(o, 0, left);
            carry = exact - static_cast<double>(o);
            out[static_cast<size_t>(l)] = o;
        }
        allocated += out[static_cast<size_t>(l)];
    }
    return out;
}

void compute_returns_advantages(const IntervalTraj& traj, double gamma,
                                std::array<double, kSubintervals>& v_targ,
                                std::array<double, kSubintervals>& advantage) {
    double acc = 0.0;
    for (int t = kSubintervals - 1; t >= 0; --t) {
        acc = static_cast<double>(traj.steps[static_cast<size_t>(t)].reward) + gamma * acc;
        v_targ[static_cast<size_t>(t)] = acc;
        advantage[static_cast<size_t>(t)] = acc - traj.steps[static_cast<size_t>(t)].value;
    }
}

// ---------------------------------------------------------------------------
// episode gathering
// ---------------------------------------------------------------------------

namespace {

Tensor normalized_premarket(const DayTape& tape) {
    Tensor pm(1, 10);
    double sum = 0.0;
    for (double v : tape.premarket) sum += v;
    for (size_t i = 0; i < tape.premarket.size(); ++i)
        pm[static_cast<int64_t>(i)] = sum > 0.0 ? tape.premarket[i] / sum : 0.0;
    return pm;
}

std::array<int64_t, kSubintervals> equal_minute_split(int64_t O_l) {
    std::array<double, kSubintervals> ones;
    ones.fill(1.0);
    const auto v = apportion(O_l, ones);
    std::array<int64_t, kSubintervals> out{};
    for (int t = 0; t < kSubintervals; ++t) out[static_cast<size_t>(t)] = v[static_cast<size_t>(t)];
    return out;
}

// Runs one interval episode with the LSTM policy, recording the trajectory.
void run_policy_interval(const DayView& view, int l, int64_t O_l, Models& models,
                         const GatherOptions& options, Rng& rng, FillMode fill,
                         IntervalTraj& traj, IntervalEpisode& episode_out) {
    IntervalEnv env(view, l, O_l, fill);
    Graph g;
    LstmState rec = models.policy.initial_state(g, 1);
    double prev_a = 0.0, prev_r = 0.0;
    for (int t = 0; t < kSubintervals; ++t) {
        const EnvState& es = env.state();
        const auto feats = state_features(view, es, O_l);
        Tensor x = Tensor::row({feats.begin(), feats.end()});
        Tensor prev(1, 2);
        prev[0] = prev_a;
        prev[1] = prev_r;
        auto sv = models.policy.forward_step(g, models.policy_store, g.constant(x),
                                             g.constant(prev), rec);
        rec = sv.rec;
        const SampledAction sa = options.greedy
                                     ? greedy_action(sv.probs.val(), sv.log_probs.val())
                                     : sample_action(sv.probs.val(), sv.log_probs.val(), rng);
        const StepResult sr = env.step(sa.action);
        StepRecord& rec_t = traj.steps[static_cast<size_t>(t)];
        rec_t.features = feats;
        rec_t.prev_action = prev_a;
        rec_t.prev_reward = prev_r;
        rec_t.action = sa.action.index;
        rec_t.log_prob = sa.log_prob;
        rec_t.value = sv.value.val().item();
        rec_t.reward = sr.reward;
        rec_t.executed = sr.executed;
        rec_t.fill_price = sr.fill_price;
        prev_a = sa.action.multiplier();
        prev_r = static_cast<double>(sr.reward);
    }
    traj.h_last = rec.h.val();
    episode_out = env.episode();
}

// Rule-based interval execution (hu-ppo / naive / oracle).
void run_rule_interval(const DayView& view, int l, int64_t O_l, Mode mode, FillMode fill,
                       IntervalTraj& traj, IntervalEpisode& episode_out) {
    IntervalEnv env(view, l, O_l, fill);
    std::array<int64_t, kSubintervals> plan{};
    if (mode == Mode::Oracle && view.interval_volume(l) > 0)
        plan = target_orders(view, l, O_l);
    else
        plan = equal_minute_split(O_l);
    double prev_a = 0.0, prev_r = 0.0;
    for (int t = 0; t < kSubintervals; ++t) {
        const EnvState& es = env.state();
        const auto feats = state_features(view, es, O_l);
        const StepResult sr = env.step_exact(plan[static_cast<size_t>(t)]);
        StepRecord& rec_t = traj.steps[static_cast<size_t>(t)];
        rec_t.features = feats;
        rec_t.prev_action = prev_a;
        rec_t.prev_reward = prev_r;
        rec_t.action = env.episode().steps[static_cast<size_t>(t)].action.index;
        rec_t.reward = sr.reward;
        rec_t.executed = sr.executed;
        rec_t.fill_price = sr.fill_price;
        prev_a = env.episode().steps[static_cast<size_t>(t)].action.multiplier();
        prev_r = static_cast<double>(sr.reward);
    }
    episode_out = env.episode();
}

} // namespace

DayTraj gather_episodes(const Dataset& data, int day_index, const VolumeStats& stats,
                        Models& models, const GatherOptions& options, Rng& rng) {
    const DayView& view = data.view(day_index);
    const Mode mode = options.mode;
    const FillMode fill = mode == Mode::Naive ? FillMode::FirstSlot : FillMode::SubintervalVwap;

    DayTraj out;
    out.day_index = day_index;
    out.u_true = view.ratios();
    out.premarket_norm = normalized_premarket(view.tape());
    out.total_order = sample_total_order(stats, rng);

    // Level-1 weights. TUL produces them progressively below.
    std::array<double, kIntervals> u{};
    switch (mode) {
    case Mode::Tul: break;
    case Mode::Hul:
    case Mode::HuPpo:
        if (options.hist_avg == nullptr)
            throw std::invalid_argument("gather_episodes: hist_avg required for " +
                                        to_string(mode));
        u = *options.hist_avg;
        break;
    case Mode::PpoEqual:
    case Mode::Naive:
        u.fill(1.0 / static_cast<double>(kIntervals));
        break;
    case Mode::Oracle: u = view.ratios(); break;
    }

    Graph tf_graph;
    std::optional<UshapeNet::Decoder> decoder;
    if (mode == Mode::Tul) {
        if (!models.ushape || options.e_in == nullptr)
            throw std::invalid_argument("gather_episodes: TUL needs the transformer and E_in");
        Value e_out = models.ushape->encode(tf_graph, models.tf_store, *options.e_in);
        Value d0 = models.ushape->build_d0(tf_graph, models.tf_store, out.premarket_norm);
        decoder.emplace(tf_graph, models.tf_store, *models.ushape, e_out, d0);
    }

    // Oracle allocates by exact market-volume apportionment so its fills match
    // the day targets share for share.
    std::array<int64_t, kIntervals> interval_orders{};
    if (mode == Mode::Oracle) {
        std::array<double, kIntervals> w{};
        for (int l = 0; l < kIntervals; ++l)
            w[static_cast<size_t>(l)] = static_cast<double>(view.interval_volume(l));
        const auto v = apportion(out.total_order, w);
        for (int l = 0; l < kIntervals; ++l)
            interval_orders[static_cast<size_t>(l)] = v[static_cast<size_t>(l)];
    } else if (mode != Mode::Tul) {
        interval_orders = allocate_interval_orders(out.total_order, u);
    }

    std::vector<IntervalEpisode> episodes(kIntervals);
    out.intervals.resize(kIntervals);
    int64_t allocated = 0;
    double carry = 0.0;
    double reward_sum = 0.0;
    for (int l = 0; l < kIntervals; ++l) {
        int64_t O_l = 0;
        if (mode == Mode::Tul) {
            const auto step = decoder->step(l);
            const double u_l = step.u_pred.val().item();
            u[static_cast<size_t>(l)] = u_l;
            const int64_t left = out.total_order - allocated;
            if (l == kIntervals - 1) {
                O_l = left;
            } else {
                const double exact = static_cast<double>(out.total_order) * u_l + carry;
                O_l = std::clamp<int64_t>(std::llround(exact), 0, left);
                carry = exact - static_cast<double>(O_l);
            }
            allocated += O_l;
        } else {
            O_l = interval_orders[static_cast<size_t>(l)];
        }

        IntervalTraj& traj = out.intervals[static_cast<size_t>(l)];
        traj.interval = l;
        traj.order = O_l;
        if (mode_uses_policy(mode))
            run_policy_interval(view, l, O_l, models, options, rng, fill, traj,
                                episodes[static_cast<size_t>(l)]);
        else
            run_rule_interval(view, l, O_l, mode, fill, traj, episodes[static_cast<size_t>(l)]);

        if (O_l > 0) {
            double p = 0.0;
            for (const auto& s : traj.steps)
                p += static_cast<double>(s.executed) / static_cast<double>(O_l) * s.fill_price;
            traj.interval_price = p;
        } else {
            traj.interval_price = view.interval_vwap(l);
        }
        for (const auto& s : traj.steps) reward_sum += static_cast<double>(s.reward);
        if (mode == Mode::Tul && l + 1 < kIntervals) decoder->push_hidden(traj.h_last);
    }
    out.u_used = u;

    out.vwap_day = day_vwap(view, day_targets(view, out.total_order));
    out.mp_day = model_price(episodes, out.total_order);
    out.vaa_day = vaa(out.mp_day, out.vwap_day);
    out.mean_reward = reward_sum / static_cast<double>(kIntervals * kSubintervals);
    return out;
}

// ---------------------------------------------------------------------------
// PPO update
// ---------------------------------------------------------------------------

PpoBatch make_ppo_batch(std::span<const IntervalTraj* const> trajs, double gamma) {
    if (trajs.empty()) throw std::invalid_argument("make_ppo_batch: empty batch");
    const int64_t B = static_cast<int64_t>(trajs.size());
    PpoBatch batch;
    batch.seq.states.assign(kSubintervals, Tensor(B, kStateDim));
    batch.seq.prev.assign(kSubintervals, Tensor(B, 2));
    batch.seq.actions.assign(kSubintervals, std::vector<int64_t>(static_cast<size_t>(B)));
    batch.old_log_probs.assign(kSubintervals, Tensor(B, 1));
    batch.advantages.assign(kSubintervals, Tensor(B, 1));
    batch.v_targets.assign(kSubintervals, Tensor(B, 1));
    for (int64_t b = 0; b < B; ++b) {
        const IntervalTraj& tr = *trajs[static_cast<size_t>(b)];
        std::array<double, kSubintervals> vt{}, adv{};
        compute_returns_advantages(tr, gamma, vt, adv);
        for (int t = 0; t < kSubintervals; ++t) {
            const StepRecord& s = tr.steps[static_cast<size_t>(t)];
            for (int f = 0; f < kStateDim; ++f)
                batch.seq.states[static_cast<size_t>(t)].at(b, f) =
                    s.features[static_cast<size_t>(f)];
            batch.seq.prev[static_cast<size_t>(t)].at(b, 0) = s.prev_action;
            batch.seq.prev[static_cast<size_t>(t)].at(b, 1) = s.prev_reward;
            batch.seq.actions[static_cast<size_t>(t)][static_cast<size_t>(b)] = s.action;
            batch.old_log_probs[static_cast<size_t>(t)].at(b, 0) = s.log_prob;
            batch.advantages[static_cast<size_t>(t)].at(b, 0) = adv[static_cast<size_t>(t)];
            batch.v_targets[static_cast<size_t>(t)].at(b, 0) = vt[static_cast<size_t>(t)];
        }
    }
    return batch;
}

PpoParts ppo_loss(Graph& g, nn::ParamStore& store, const PolicyNet& policy, const PpoBatch& batch,
                  const TrainConfig& config) {
    const auto eval = policy.evaluate_actions(g, store, batch.seq);
    const int64_t T = static_cast<int64_t>(batch.seq.states.size());
    const int64_t B = batch.seq.states[0].rows();
    Value clip_sum, vf_sum, ent_sum;
    for (int64_t t = 0; t < T; ++t) {
        Value lp_old = g.constant(batch.old_log_probs[static_cast<size_t>(t)]);
        Value adv = g.constant(batch.advantages[static_cast<size_t>(t)]);
        Value vt = g.constant(batch.v_targets[static_cast<size_t>(t)]);
        Value ratio = g.exp_(g.sub(eval.log_probs[static_cast<size_t>(t)], lp_old));
        Value unclipped = g.mul(ratio, adv);
        Value clipped =
            g.mul(g.clamp_(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps), adv);
        Value clip_t = g.sum_all(g.min_(unclipped, clipped));
        Value vf_t =
            g.sum_all(g.square_(g.sub(vt, eval.values[static_cast<size_t>(t)])));
        Value ent_t = g.sum_all(eval.entropies[static_cast<size_t>(t)]);
        clip_sum = t == 0 ? clip_t : g.add(clip_sum, clip_t);
        vf_sum = t == 0 ? vf_t : g.add(vf_sum, vf_t);
        ent_sum = t == 0 ? ent_t : g.add(ent_sum, ent_t);
    }
    const double inv = 1.0 / static_cast<double>(T * B);
    PpoParts parts;
    parts.j_clip = g.scale(clip_sum, inv);
    parts.j_vf = g.scale(vf_sum, inv);
    parts.entropy = g.scale(ent_sum, inv);
    parts.objective = g.add(g.sub(parts.j_clip, g.scale(parts.j_vf, config.c3)),
                            g.scale(parts.entropy, config.c4));
    return parts;
}

namespace {

struct PpoStats {
    double j_clip = 0.0, j_vf = 0.0, entropy = 0.0;
    int64_t updates = 0;
};

PpoStats ppo_update(Models& models, std::vector<DayTraj>& buffer, const TrainConfig& config,
                    double lr, Rng& rng) {
    std::vector<const IntervalTraj*> all;
    for (const DayTraj& day : buffer)
        for (const IntervalTraj& tr : day.intervals) all.push_back(&tr);
    if (all.empty()) throw std::runtime_error("ppo_update: empty buffer");

    PpoStats stats;
    int64_t updates = 0;
    std::vector<size_t> order(all.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (int epoch = 0; epoch < config.inner_epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t from = 0; from < order.size(); from += static_cast<size_t>(config.batch_size)) {
            const size_t to = std::min(order.size(), from + static_cast<size_t>(config.batch_size));
            std::vector<const IntervalTraj*> chunk;
            chunk.reserve(to - from);
            for (size_t i = from; i < to; ++i) chunk.push_back(all[order[i]]);
            const PpoBatch batch = make_ppo_batch(chunk, config.gamma);
            Graph g;
            const PpoParts parts = ppo_loss(g, models.policy_store, models.policy, batch, config);
            Value loss = g.scale(parts.objective, -1.0);
            if (!std::isfinite(loss.val().item()))
                throw std::runtime_error("ppo_update: non-finite objective (diverged)");
            models.policy_store.zero_grad();
            g.backward(loss);
            nn::clip_grad_norm(models.policy_store, config.grad_clip);
            nn::adam_step(models.policy_store, lr);
            stats.j_clip += parts.j_clip.val().item();
            stats.j_vf += parts.j_vf.val().item();
            stats.entropy += parts.entropy.val().item();
            ++updates;
        }
    }
    stats.j_clip /= static_cast<double>(updates);
    stats.j_vf /= static_cast<double>(updates);
    stats.entropy /= static_cast<double>(updates);
    stats.updates = updates;
    return stats;
}

double tf_update(Models& models, const std::vector<DayTraj>& buffer, const Tensor& e_in,
                 const TrainConfig& config, double lr) {
    Graph g;
    Value e_out = models.ushape->encode(g, models.tf_store, e_in);
    Value loss_sum;
    for (size_t d = 0; d < buffer.size(); ++d) {
        const DayTraj& day = buffer[d];
        Value d0 = models.ushape->build_d0(g, models.tf_store, day.premarket_norm);
        UshapeNet::Decoder dec(g, models.tf_store, *models.ushape, e_out, d0);
        for (int l = 0; l < kIntervals; ++l) {
            dec.step(l);
            if (l + 1 < kIntervals)
                dec.push_hidden(day.intervals[static_cast<size_t>(l)].h_last);
        }
        std::array<double, kIntervals> prices{};
        for (int l = 0; l < kIntervals; ++l)
            prices[static_cast<size_t>(l)] = day.intervals[static_cast<size_t>(l)].interval_price;
        Value day_loss = tf_loss(g, dec.u_pred_row(), day.u_true, prices, day.vwap_day,
                                 config.c1, config.c2);
        loss_sum = d == 0 ? day_loss : g.add(loss_sum, day_loss);
    }
    Value loss = g.scale(loss_sum, 1.0 / static_cast<double>(buffer.size()));
    if (!std::isfinite(loss.val().item()))
        throw std::runtime_error("tf_update: non-finite J_TF (diverged)");
    models.tf_store.zero_grad();
    g.backward(loss);
    nn::clip_grad_norm(models.tf_store, config.grad_clip);
    nn::adam_step(models.tf_store, lr);
    return loss.val().item();
}

std::string format_g(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::logic_error("format_g failed");
    return std::string(buf, p);
}

// Samples the encoder's historical ratio days: without replacement when the
// training split is large enough, with replacement otherwise (tiny smoke runs).
Tensor sample_e_in(const Dataset& data, const std::vector<int>& train_days, int n_hist, Rng& rng) {
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

void save_train_checkpoint(const std::string& path, const Models& models, const TrainConfig& cfg,
                           int64_t iteration, const Rng& rng) {
    nn::Checkpoint ckpt;
    models.save(ckpt);
    ckpt.put_scalar("meta/iteration", static_cast<double>(iteration));
    ckpt.blobs["meta/mode"] = to_string(cfg.mode);
    ckpt.blobs["meta/rng"] = rng.serialize();
    save_checkpoint(path, ckpt);
}

LoadedCheckpoint load_train_checkpoint(const std::string& path) {
    const nn::Checkpoint ckpt = nn::load_checkpoint(path);
    LoadedCheckpoint out{Models::from_checkpoint(ckpt),
                         mode_from_string(ckpt.blobs.at("meta/mode")),
                         static_cast<int64_t>(ckpt.scalar("meta/iteration")),
                         ckpt.blobs.at("meta/rng")};
    return out;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const std::string& out_dir,
                  std::ostream* info) {
    config.validate();
    fs::create_directories(out_dir);
    const std::vector<int> train_days = data.indices(DayRole::Train);
    if (train_days.empty()) throw std::runtime_error("train: dataset has no training days");

    Models models = Models::create(config);
    Rng master = Rng::derive(config.seed, 1);
    int64_t start_iter = 0;
    if (!config.resume_checkpoint.empty()) {
        LoadedCheckpoint loaded = load_train_checkpoint(config.resume_checkpoint);
        if (loaded.mode != config.mode)
            throw std::runtime_error("train: checkpoint mode " + to_string(loaded.mode) +
                                     " != configured mode " + to_string(config.mode));
        models = std::move(loaded.models);
        master = Rng::deserialize(loaded.rng_state);
        start_iter = loaded.iteration;
    }

    std::array<double, kIntervals> hist_avg{};
    if (config.mode == Mode::Hul) hist_avg = historical_average_ushape(data.train_ratio_history());

    const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
    std::ofstream log(log_path, start_iter == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("train: cannot open log " + log_path);
    if (start_iter == 0)
        log << "iteration,mean_reward,j_tf,j_clip,j_vf,entropy,lr_policy,lr_tf,inner_updates,"
               "wall_s\n";

    const int days = config.resolved_days();
    const int threads = config.resolved_threads();
    const std::string ckpt_latest = (fs::path(out_dir) / "checkpoint_latest.bin").string();
    const std::string ckpt_final = (fs::path(out_dir) / "checkpoint.bin").string();
    int64_t inner_updates = 0; // cumulative PPO optimizer steps across iterations

    for (int64_t iter = start_iter; iter < config.outer_iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr_policy = nn::linear_anneal(config.lr_policy_start, config.lr_policy_end,
                                                   iter, config.outer_iterations);
        const double lr_tf = nn::linear_anneal(config.lr_tf_start, config.lr_tf_end, iter,
                                               config.outer_iterations);

        std::vector<int> picks(static_cast<size_t>(days));
        for (int d = 0; d < days; ++d)
            picks[static_cast<size_t>(d)] = train_days[master.uniform_index(train_days.size())];
        Tensor e_in;
        if (config.mode == Mode::Tul)
            e_in = sample_e_in(data, train_days, config.n_hist, master);

        GatherOptions options;
        options.mode = config.mode;
        options.e_in = config.mode == Mode::Tul ? &e_in : nullptr;
        options.hist_avg = config.mode == Mode::Hul ? &hist_avg : nullptr;

        // Buffer never crosses outer iterations.
        std::vector<DayTraj> buffer(static_cast<size_t>(days));
        {
            std::atomic<int> next{0};
            auto worker = [&]() {
                while (true) {
                    const int d = next.fetch_add(1);
                    if (d >= days) break;
                    Rng day_rng = Rng::derive(config.seed, 2, static_cast<uint64_t>(iter),
                                              static_cast<uint64_t>(d));
                    buffer[static_cast<size_t>(d)] =
                        gather_episodes(data, picks[static_cast<size_t>(d)],
                                        data.stats_for(picks[static_cast<size_t>(d)]), models,
                                        options, day_rng);
                }
            };
            const int nw = std::min(threads, days);
            if (nw <= 1) {
                worker();
            } else {
                std::vector<std::thread> pool;
                for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
                for (auto& th : pool) th.join();
            }
        }

        double j_tf = 0.0;
        if (config.mode == Mode::Tul) j_tf = tf_update(models, buffer, e_in, config, lr_tf);

        Rng ppo_rng = Rng::derive(config.seed, 3, static_cast<uint64_t>(iter));
        const PpoStats stats = ppo_update(models, buffer, config, lr_policy, ppo_rng);

        double mean_reward = 0.0;
        for (const DayTraj& day : buffer) mean_reward += day.mean_reward;
        mean_reward /= static_cast<double>(buffer.size());

        inner_updates += stats.updates;
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log << iter << ',' << format_g(mean_reward) << ',' << format_g(j_tf) << ','
            << format_g(stats.j_clip) << ',' << format_g(stats.j_vf) << ','
            << format_g(stats.entropy) << ',' << format_g(lr_policy) << ',' << format_g(lr_tf)
            << ',' << inner_updates << ',' << format_g(wall) << '\n';
        log.flush();
        if (info != nullptr && (iter % 50 == 0 || iter + 1 == config.outer_iterations))
            (*info) << "[train " << to_string(config.mode) << "] iter " << iter << " reward "
                    << mean_reward << " j_tf " << j_tf << " entropy " << stats.entropy << "\n";

        if (config.checkpoint_every > 0 && (iter + 1) % config.checkpoint_every == 0)
            save_train_checkpoint(ckpt_latest, models, config, iter + 1, master);
    }

    save_train_checkpoint(ckpt_final, models, config, config.outer_iterations, master);
    return {ckpt_final, log_path, config.outer_iterations};
}

} // namespace vwapx
