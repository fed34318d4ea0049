#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "orchestra/autoscaler.hpp"
#include "orchestra/forecast.hpp"
#include "orchestra/report.hpp"
#include "orchestra/rl.hpp"
#include "orchestra/simulator.hpp"
#include "orchestra/topology.hpp"

namespace py = pybind11;
using namespace orchestra;

namespace {

const GpuTopology& profile(const std::string& name) {
    if (name == "v100") return v100_profile();
    if (name == "a100") return a100_profile();
    throw ConfigError("unknown GPU profile '" + name + "'");
}

py::dict summary_dict(const MetricsReport& r) {
    const Summary s = summarize(r);
    py::dict d;
    d["mean_cpu_util"] = s.mean_cpu_util;
    d["mean_mem_util"] = s.mean_mem_util;
    d["mean_gpu_util"] = s.mean_gpu_util;
    d["mean_delay"] = s.mean_delay;
    d["p95_delay"] = s.p95_delay;
    d["mean_fragmentation"] = s.mean_fragmentation;
    d["mean_imbalance"] = s.mean_imbalance;
    d["mean_reward"] = s.mean_reward;
    d["arrived"] = r.arrived;
    d["completed"] = r.completed;
    d["pending"] = r.pending;
    d["running"] = r.running;
    d["failed_in_flight"] = r.failed_in_flight;
    d["preemptions"] = r.preemptions;
    d["nodes_added"] = r.nodes_added;
    d["nodes_removed"] = r.nodes_removed;
    d["migrations"] = r.migrations;
    d["halted"] = r.halted;
    d["halt_reason"] = r.halt_reason;
    return d;
}

py::dict result_dict(const Scenario& s, const RunResult& r) {
    py::dict d;
    d["summary"] = summary_dict(r.report);
    d["metrics_csv"] = metrics_csv(r.report);
    d["summary_json"] = summary_json(s, r.report);
    d["trace"] = r.trace;
    return d;
}

Scenario with_seed(Scenario s, std::optional<std::uint64_t> seed) {
    if (seed) s.seed = *seed;
    return s;
}

}  // namespace

PYBIND11_MODULE(_orchestra, m) {
    m.doc() = "Deterministic cluster scheduler simulator";

    auto error = py::register_exception<Error>(m, "Error");
    auto config_error = py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<SchemaError>(m, "SchemaError", config_error.ptr());
    py::register_exception<IoError>(m, "IoError", error.ptr());

    py::class_<Scenario>(m, "Scenario")
        .def_readonly("name", &Scenario::name)
        .def_readwrite("seed", &Scenario::seed)
        .def_readwrite("duration", &Scenario::duration)
        .def("__repr__", [](const Scenario& s) {
            return "<Scenario '" + s.name + "' seed=" + std::to_string(s.seed) + ">";
        });

    m.def("load_scenario", [](const std::filesystem::path& p) { return load_scenario(p); }, py::arg("path"));
    m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("base_dir") = std::filesystem::path{});

    m.def(
        "run",
        [](const Scenario& s, std::optional<std::uint64_t> seed) {
            const Scenario sc = with_seed(s, seed);
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_scenario(sc);
            }
            return result_dict(sc, r);
        },
        py::arg("scenario"), py::arg("seed") = py::none(),
        "Runs a scenario to its horizon. Returns summary, metrics_csv, summary_json and trace.");

    m.def(
        "compare",
        [](const Scenario& s, const std::vector<std::string>& modes, std::optional<std::uint64_t> seed) {
            const Scenario sc = with_seed(s, seed);
            std::vector<ComparisonRow> rows;
            {
                py::gil_scoped_release release;
                rows = compare_runs(sc, modes);
            }
            return comparison_csv(rows);
        },
        py::arg("scenario"), py::arg("modes"), py::arg("seed") = py::none(),
        "Runs several modes on one workload seed and returns the comparison CSV.");

    m.def(
        "train",
        [](const Scenario& s, int episodes, std::optional<std::uint64_t> seed) {
            const Scenario sc = with_seed(s, seed);
            TrainingResult r;
            {
                py::gil_scoped_release release;
                r = train_policy(sc, episodes);
            }
            std::vector<double> rewards;
            for (const auto& e : r.episodes) rewards.push_back(e.mean_reward);
            py::dict d;
            d["policy"] = serialize_policy(r.policy);
            d["rewards"] = rewards;
            return d;
        },
        py::arg("scenario"), py::arg("episodes"), py::arg("seed") = py::none(),
        "Trains a Q-learning policy. Returns the policy document and per-episode mean rewards.");

    m.def("hpa_desired_replicas",
          py::overload_cast<int, double, double, int, int>(&hpa_desired_replicas), py::arg("current"),
          py::arg("utilization"), py::arg("target"), py::arg("min_replicas") = 1, py::arg("max_replicas") = 1 << 20);

    m.def(
        "nvlink_links", [](const std::string& name, int i, int j) { return profile(name).nvlink_links(i, j); },
        py::arg("profile"), py::arg("i"), py::arg("j"));
    m.def(
        "best_gpu_set",
        [](const std::string& name, const std::vector<bool>& free_mask, int k) {
            return best_gpu_set(profile(name), free_mask, k);
        },
        py::arg("profile"), py::arg("free_mask"), py::arg("k"));

    m.def(
        "forecast",
        [](const std::vector<double>& history, const std::string& kind, int window, int horizon, double alpha) {
            return predict_load(fit_forecast(history, forecast_kind_from_string(kind), window, alpha), horizon);
        },
        py::arg("history"), py::arg("kind"), py::arg("window"), py::arg("horizon") = 1, py::arg("alpha") = 0.5);
}
