#include "vwapx/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace vwapx {

namespace {

std::string format_g(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::logic_error("format_g failed");
    return std::string(buf, p);
}

// Field table shared by the parser and the emitter so round-trips stay
// symmetric by construction.
template <typename V>
void visit_fields(RunConfig& c, V&& v) {
    v("seed", c.seed);
    v("threads", c.threads);
    v("mode", c.mode);
    v("data_dir", c.data_dir);
    v("out_dir", c.out_dir);

    v("synth.days_warmup", c.synth_days_warmup);
    v("synth.days_train", c.synth_days_train);
    v("synth.days_test", c.synth_days_test);
    v("synth.start_date", c.synth_start_date);
    v("synth.base_price", c.synth_base_price);
    v("synth.tick_size", c.synth_tick_size);
    v("synth.daily_volume", c.synth_daily_volume);
    v("synth.volume_sigma", c.synth_volume_sigma);
    v("synth.u_amplitude", c.synth_u_amplitude);
    v("synth.u_noise", c.synth_u_noise);
    v("synth.price_vol", c.synth_price_vol);
    v("synth.slot_noise", c.synth_slot_noise);
    v("synth.spread_ticks", c.synth_spread_ticks);
    v("synth.depth_scale", c.synth_depth_scale);

    v("train.outer_iterations", c.train_outer_iterations);
    v("train.inner_epochs", c.train_inner_epochs);
    v("train.batch_size", c.train_batch_size);
    v("train.clip_eps", c.train_clip_eps);
    v("train.gamma", c.train_gamma);
    v("train.c1", c.train_c1);
    v("train.c2", c.train_c2);
    v("train.c3", c.train_c3);
    v("train.c4", c.train_c4);
    v("train.days_per_iter", c.train_days_per_iter);
    v("train.lr_policy_start", c.train_lr_policy_start);
    v("train.lr_policy_end", c.train_lr_policy_end);
    v("train.lr_tf_start", c.train_lr_tf_start);
    v("train.lr_tf_end", c.train_lr_tf_end);
    v("train.grad_clip", c.train_grad_clip);
    v("train.policy_feat_dim", c.train_policy_feat_dim);
    v("train.policy_hidden", c.train_policy_hidden);
    v("train.tf_pffn_dim", c.train_tf_pffn_dim);
    v("train.tf_heads", c.train_tf_heads);
    v("train.n_hist", c.train_n_hist);
    v("train.checkpoint_every", c.train_checkpoint_every);
    v("train.resume", c.train_resume);

    v("eval.greedy", c.eval_greedy);
    v("eval.checkpoint", c.eval_checkpoint);
    v("eval.hist_bin_bps", c.eval_hist_bin_bps);
}

struct Setter {
    std::function<void(const std::string&)> set;
};

void parse_into(const std::string& key, const std::string& raw, const std::string& origin,
                int lineno, std::map<std::string, Setter>& setters) {
    auto it = setters.find(key);
    if (it == setters.end())
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                 "'");
    it->second.set(raw);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig RunConfig::from_string(const std::string& text, const std::string& origin) {
    RunConfig c;
    std::map<std::string, Setter> setters;
    auto bind = [&](const char* name, auto& field) {
        using T = std::decay_t<decltype(field)>;
        setters[name] = Setter{[&field, name](const std::string& raw) {
            if constexpr (std::is_same_v<T, std::string>) {
                field = raw;
            } else if constexpr (std::is_same_v<T, bool>) {
                if (raw == "true")
                    field = true;
                else if (raw == "false")
                    field = false;
                else
                    throw std::runtime_error(std::string("key '") + name +
                                             "': want true/false, got '" + raw + "'");
            } else if constexpr (std::is_floating_point_v<T>) {
                T v{};
                auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
                if (ec != std::errc() || p != raw.data() + raw.size())
                    throw std::runtime_error(std::string("key '") + name + "': bad number '" +
                                             raw + "'");
                field = v;
            } else {
                T v{};
                auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
                if (ec != std::errc() || p != raw.data() + raw.size())
                    throw std::runtime_error(std::string("key '") + name + "': bad integer '" +
                                             raw + "'");
                field = v;
            }
        }};
    };
    visit_fields(c, bind);

    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string raw = trim(t.substr(eq + 1));
        parse_into(key, raw, origin, lineno, setters);
    }
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return from_string(ss.str(), path);
}

std::string RunConfig::emit() const {
    std::string out;
    auto emit_one = [&](const char* name, auto& field) {
        using T = std::decay_t<decltype(field)>;
        out += name;
        out += " = ";
        if constexpr (std::is_same_v<T, std::string>)
            out += field;
        else if constexpr (std::is_same_v<T, bool>)
            out += field ? "true" : "false";
        else if constexpr (std::is_floating_point_v<T>)
            out += format_g(field);
        else
            out += std::to_string(field);
        out += "\n";
    };
    visit_fields(const_cast<RunConfig&>(*this), emit_one);
    return out;
}

SynthDatasetConfig RunConfig::synth_config() const {
    SynthDatasetConfig sc;
    sc.synth.base_price = synth_base_price;
    sc.synth.tick_size = synth_tick_size;
    sc.synth.daily_volume = synth_daily_volume;
    sc.synth.volume_sigma = synth_volume_sigma;
    sc.synth.u_amplitude = synth_u_amplitude;
    sc.synth.u_noise = synth_u_noise;
    sc.synth.price_vol = synth_price_vol;
    sc.synth.slot_noise = synth_slot_noise;
    sc.synth.spread_ticks = synth_spread_ticks;
    sc.synth.depth_scale = synth_depth_scale;
    sc.days_warmup = synth_days_warmup;
    sc.days_train = synth_days_train;
    sc.days_test = synth_days_test;
    sc.start_date = synth_start_date;
    sc.seed = seed;
    return sc;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig tc;
    tc.mode = mode_from_string(mode);
    tc.outer_iterations = train_outer_iterations;
    tc.inner_epochs = train_inner_epochs;
    tc.batch_size = train_batch_size;
    tc.clip_eps = train_clip_eps;
    tc.gamma = train_gamma;
    tc.c1 = train_c1;
    tc.c2 = train_c2;
    tc.c3 = train_c3;
    tc.c4 = train_c4;
    tc.days_per_iter = train_days_per_iter;
    tc.lr_policy_start = train_lr_policy_start;
    tc.lr_policy_end = train_lr_policy_end;
    tc.lr_tf_start = train_lr_tf_start;
    tc.lr_tf_end = train_lr_tf_end;
    tc.grad_clip = train_grad_clip;
    tc.policy_feat_dim = train_policy_feat_dim;
    tc.policy_hidden = train_policy_hidden;
    tc.tf_pffn_dim = train_tf_pffn_dim;
    tc.tf_heads = train_tf_heads;
    tc.n_hist = train_n_hist;
    tc.seed = seed;
    tc.checkpoint_every = train_checkpoint_every;
    tc.threads = threads;
    tc.resume_checkpoint = train_resume;
    return tc;
}

EvalConfig RunConfig::eval_config() const {
    EvalConfig ec;
    ec.mode = mode_from_string(mode);
    ec.greedy = eval_greedy;
    ec.seed = seed;
    ec.threads = threads;
    ec.checkpoint = eval_checkpoint;
    ec.hist_bin_bps = eval_hist_bin_bps;
    return ec;
}

} // namespace vwapx
