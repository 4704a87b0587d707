// pybind11 bindings over the vwapx core: data synthesis/ingestion, the
// replay environment, training, and evaluation.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vwapx/config.hpp"
#include "vwapx/eval_report.hpp"
#include "vwapx/selftest.hpp"
#include "vwapx/trainer.hpp"

namespace py = pybind11;
using namespace vwapx;

namespace {

RunConfig config_from_text(const std::string& text) {
    return text.empty() ? RunConfig{} : RunConfig::from_string(text, "<python>");
}

// Owns the tape and its derived view.
struct PyTape {
    explicit PyTape(const std::string& path) : tape(ingest_tape(path)), view(tape) {}
    DayTape tape;
    DayView view;
};

struct PyEnv {
    PyEnv(std::shared_ptr<PyTape> t, int interval, int64_t order, bool first_slot_fill)
        : tape(std::move(t)),
          env(tape->view, interval, order,
              first_slot_fill ? FillMode::FirstSlot : FillMode::SubintervalVwap) {}
    std::shared_ptr<PyTape> tape;
    IntervalEnv env;
};

py::dict state_dict(const EnvState& s) {
    py::dict d;
    d["t"] = s.t;
    d["remaining"] = s.remaining;
    d["prices"] = std::vector<double>(s.prices.begin(), s.prices.end());
    d["volumes"] = std::vector<int64_t>(s.volumes.begin(), s.volumes.end());
    return d;
}

} // namespace

PYBIND11_MODULE(_vwapx, m) {
    m.doc() = "Dual-level VWAP execution engine (C++ core)";

    m.def("default_config", [] { return RunConfig{}.emit(); },
          "Effective default configuration as key=value text.");

    m.def(
        "synth",
        [](const std::string& out_dir, const std::string& config_text) {
            return write_synth_dataset(out_dir, config_from_text(config_text).synth_config());
        },
        py::arg("out_dir"), py::arg("config_text") = "",
        "Generate a synthetic tape dataset; returns the manifest path.");

    m.def(
        "train",
        [](const std::string& data_dir, const std::string& out_dir,
           const std::string& config_text) {
            const RunConfig cfg = config_from_text(config_text);
            const Dataset data = Dataset::load(data_dir);
            py::gil_scoped_release release;
            return train(cfg.train_config(), data, out_dir, nullptr).checkpoint_path;
        },
        py::arg("data_dir"), py::arg("out_dir"), py::arg("config_text") = "",
        "Train the configured mode; returns the checkpoint path.");

    m.def(
        "evaluate",
        [](const std::string& data_dir, const std::string& out_dir,
           const std::string& config_text) {
            const RunConfig cfg = config_from_text(config_text);
            const Dataset data = Dataset::load(data_dir);
            EvalResult result;
            {
                py::gil_scoped_release release;
                result = evaluate(data, cfg.eval_config());
                if (!out_dir.empty())
                    write_eval_artifacts(out_dir, result, cfg.eval_hist_bin_bps);
            }
            py::dict d;
            d["mean_bps"] = result.summary.mean_bps;
            d["std_bps"] = result.summary.std_bps;
            d["pct_within_10bps"] = result.summary.pct_within_10bps;
            py::list rows;
            for (const auto& r : result.summary.rows) {
                py::dict row;
                row["index"] = r.index;
                row["date"] = r.date;
                row["total_order"] = r.total_order;
                row["mp_day"] = r.mp_day;
                row["vwap_day"] = r.vwap_day;
                row["vaa_bps"] = r.vaa_bps;
                rows.append(row);
            }
            d["rows"] = rows;
            return d;
        },
        py::arg("data_dir"), py::arg("out_dir") = "", py::arg("config_text") = "",
        "Evaluate the configured mode over the test split.");

    m.def(
        "selftest",
        [](bool quick) {
            std::vector<std::tuple<std::string, bool, std::string>> out;
            py::gil_scoped_release release;
            for (const auto& r : selftest::run_all(quick))
                out.emplace_back(r.name, r.passed, r.detail);
            return out;
        },
        py::arg("quick") = true, "Run the property suites; returns (name, passed, detail).");

    py::class_<PyTape, std::shared_ptr<PyTape>>(m, "Tape")
        .def(py::init<const std::string&>(), py::arg("path"))
        .def_property_readonly("date", [](const PyTape& t) { return t.tape.date; })
        .def_property_readonly("premarket",
                               [](const PyTape& t) {
                                   return std::vector<double>(t.tape.premarket.begin(),
                                                              t.tape.premarket.end());
                               })
        .def_property_readonly("n_slots",
                               [](const PyTape& t) { return t.tape.slots.size(); })
        .def("interval_ratios",
             [](const PyTape& t) {
                 const auto r = interval_ratios(t.tape);
                 return std::vector<double>(r.begin(), r.end());
             })
        .def("day_volume", [](const PyTape& t) { return t.view.day_volume(); })
        .def("slot", [](const PyTape& t, size_t i) {
            const Slot& s = t.tape.slots.at(i);
            py::dict d;
            d["timestamp_ms"] = s.lob.timestamp_ms;
            d["traded_volume"] = s.traded_volume;
            d["traded_vwap"] = s.traded_vwap;
            d["bid_prices"] = std::vector<double>(s.lob.bid_prices.begin(), s.lob.bid_prices.end());
            d["ask_prices"] = std::vector<double>(s.lob.ask_prices.begin(), s.lob.ask_prices.end());
            return d;
        });

    py::class_<PyEnv>(m, "IntervalEnv")
        .def(py::init<std::shared_ptr<PyTape>, int, int64_t, bool>(), py::arg("tape"),
             py::arg("interval"), py::arg("order"), py::arg("first_slot_fill") = false)
        .def("state", [](const PyEnv& e) { return state_dict(e.env.state()); })
        .def("done", [](const PyEnv& e) { return e.env.done(); })
        .def("step",
             [](PyEnv& e, int action_index) {
                 const auto r = e.env.step(ActionValue::from_index(action_index));
                 py::dict d;
                 d["reward"] = r.reward;
                 d["executed"] = r.executed;
                 d["fill_price"] = r.fill_price;
                 d["done"] = r.done;
                 return d;
             },
             py::arg("action_index"))
        .def("step_exact", [](PyEnv& e, int64_t shares) {
            const auto r = e.env.step_exact(shares);
            py::dict d;
            d["reward"] = r.reward;
            d["executed"] = r.executed;
            d["fill_price"] = r.fill_price;
            d["done"] = r.done;
            return d;
        });

    m.def("vaa", &vaa, py::arg("mp"), py::arg("vwap"));
    m.def("reward", &reward_fn, py::arg("executed"), py::arg("target"));
    m.def(
        "apportion",
        [](int64_t total, const std::vector<double>& weights) {
            return apportion(total, weights);
        },
        py::arg("total"), py::arg("weights"),
        "Largest-remainder integer split of total by weights.");
    m.def(
        "volume_stats",
        [](const std::vector<int64_t>& totals) {
            const VolumeStats s = volume_stats(totals);
            return py::make_tuple(s.mu, s.sigma);
        },
        py::arg("daily_totals"));
    m.def(
        "sample_total_order",
        [](double mu, double sigma, uint64_t seed) {
            Rng rng(seed);
            return sample_total_order(VolumeStats{mu, sigma}, rng);
        },
        py::arg("mu"), py::arg("sigma"), py::arg("seed"));
    m.def(
        "historical_average",
        [](const std::vector<std::vector<double>>& days) {
            UShapeHistory hist;
            for (const auto& d : days) {
                if (d.size() != kIntervals)
                    throw std::invalid_argument("historical_average: each day needs 19 ratios");
                std::array<double, kIntervals> row{};
                std::copy(d.begin(), d.end(), row.begin());
                hist.push_back(row);
            }
            const auto avg = historical_average_ushape(hist);
            return std::vector<double>(avg.begin(), avg.end());
        },
        py::arg("days"));

    m.attr("INTERVALS") = kIntervals;
    m.attr("SUBINTERVALS") = kSubintervals;
    m.attr("EXEC_STEPS") = kExecSteps;
    m.attr("SLOTS_PER_DAY") = kSlotsPerDay;
}
