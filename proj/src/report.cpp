#include "orchestra/report.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace orchestra {

using nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

ordered_json summary_fields(const Summary& s) {
    return ordered_json{{"mean_cpu_util", s.mean_cpu_util},
                        {"mean_mem_util", s.mean_mem_util},
                        {"mean_gpu_util", s.mean_gpu_util},
                        {"mean_delay", s.mean_delay},
                        {"p95_delay", s.p95_delay},
                        {"mean_fragmentation", s.mean_fragmentation},
                        {"mean_imbalance", s.mean_imbalance},
                        {"mean_reward", s.mean_reward}};
}

}  // namespace

std::string metrics_csv(const MetricsReport& report) {
    std::string out =
        "time,cpu_util,mem_util,gpu_util,pending,running,nodes,fragmentation,imbalance,preemptions,"
        "mean_pending_delay,profile\n";
    for (const auto& r : report.rows) {
        out += fixed(r.time, 3) + "," + fixed(r.cpu_util) + "," + fixed(r.mem_util) + "," + fixed(r.gpu_util) + "," +
               std::to_string(r.pending) + "," + std::to_string(r.running) + "," + std::to_string(r.nodes) + "," +
               std::to_string(r.fragmentation) + "," + fixed(r.imbalance) + "," + std::to_string(r.preemptions) +
               "," + fixed(r.mean_pending_delay, 3) + "," + r.profile + "\n";
    }
    return out;
}

std::string summary_json(const Scenario& scenario, const MetricsReport& report) {
    const Summary s = summarize(report);
    ordered_json j;
    j["scenario"] = scenario.name;
    j["seed"] = scenario.seed;
    j["duration"] = scenario.duration;
    j["halted"] = report.halted;
    if (report.halted) j["halt_reason"] = report.halt_reason;
    j["summary"] = summary_fields(s);
    j["counts"] = ordered_json{{"arrived", report.arrived},
                               {"completed", report.completed},
                               {"pending", report.pending},
                               {"running", report.running},
                               {"failed_in_flight", report.failed_in_flight},
                               {"bound_pods", report.scheduling_delay.size()},
                               {"never_bound", report.censored_delay.size()},
                               {"decisions", report.decisions},
                               {"preemptions", report.preemptions},
                               {"failures_requeued", report.failures_requeued},
                               {"nodes_added", report.nodes_added},
                               {"nodes_removed", report.nodes_removed},
                               {"migrations", report.migrations}};
    const auto& jct = report.job_completion_times;
    j["job_completion"] = ordered_json{
        {"count", jct.size()},
        {"mean", jct.empty() ? 0.0 : std::accumulate(jct.begin(), jct.end(), 0.0) / static_cast<double>(jct.size())}};
    ordered_json defrag = ordered_json::array();
    for (const auto& d : report.defrag) {
        defrag.push_back(ordered_json{{"time", d.time}, {"before", d.before}, {"after", d.after}, {"migrations", d.migrations}});
    }
    j["defrag"] = std::move(defrag);
    j["rewards"] = report.rewards;
    return j.dump(2) + "\n";
}

std::string rewards_csv(const std::vector<EpisodeStats>& episodes) {
    std::string out = "episode,epsilon,mean_reward,total_reward\n";
    for (const auto& e : episodes) {
        out += std::to_string(e.episode) + "," + fixed(e.epsilon) + "," + fixed(e.mean_reward) + "," +
               fixed(e.total_reward) + "\n";
    }
    return out;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out =
        "mode,mean_cpu_util,mean_gpu_util,mean_delay,p95_delay,mean_fragmentation,mean_imbalance,completed,"
        "preemptions,nodes_added,halted\n";
    for (const auto& r : rows) {
        const Summary& s = r.summary;
        out += r.mode + "," + fixed(s.mean_cpu_util) + "," + fixed(s.mean_gpu_util) + "," + fixed(s.mean_delay, 3) +
               "," + fixed(s.p95_delay, 3) + "," + fixed(s.mean_fragmentation) + "," + fixed(s.mean_imbalance) + "," +
               std::to_string(r.completed) + "," + std::to_string(r.preemptions) + "," +
               std::to_string(r.nodes_added) + "," + (r.halted ? "true" : "false") + "\n";
    }
    return out;
}

std::string comparison_json(const Scenario& scenario, const std::vector<ComparisonRow>& rows) {
    ordered_json j;
    j["scenario"] = scenario.name;
    j["seed"] = scenario.seed;
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json row{{"mode", r.mode}};
        row["summary"] = summary_fields(r.summary);
        row["completed"] = r.completed;
        row["preemptions"] = r.preemptions;
        row["nodes_added"] = r.nodes_added;
        row["halted"] = r.halted;
        arr.push_back(std::move(row));
    }
    j["modes"] = std::move(arr);
    return j.dump(2) + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("failed writing " + path.string());
}

void write_run_outputs(const std::filesystem::path& dir, const Scenario& scenario, const RunResult& result) {
    write_file(dir / "metrics.csv", metrics_csv(result.report));
    write_file(dir / "summary.json", summary_json(scenario, result.report));
    std::string trace;
    for (const auto& line : result.trace) {
        trace += line;
        trace += '\n';
    }
    write_file(dir / "trace.jsonl", trace);
}

}  // namespace orchestra
