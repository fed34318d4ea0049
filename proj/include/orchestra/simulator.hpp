#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orchestra/cluster.hpp"
#include "orchestra/queueing.hpp"
#include "orchestra/rl.hpp"
#include "orchestra/scenario.hpp"

namespace orchestra {

enum class EventKind { PodComplete, NodeFail, ZoneFail, PodArrival, NodeAdd, NodeRemove, MetricTick, AgentTick };

[[nodiscard]] const char* to_string(EventKind k) noexcept;

/// Events at equal times run in EventKind order, then in scheduling order.
struct SimEvent {
    double time = 0.0;
    EventKind kind = EventKind::MetricTick;
    std::uint64_t sequence = 0;
    std::string subject;      // pod, group, node or zone id
    std::uint64_t epoch = 0;  // completion events are stale once the epoch moves on
    std::size_t index = 0;    // arrival or failure index
};

/// Total order used by the event queue.
[[nodiscard]] bool event_before(const SimEvent& a, const SimEvent& b) noexcept;

struct FailureResult {
    std::vector<NodeId> removed;
    std::vector<PodId> requeued;  // sorted
};

/// Fails a node, or every node of a zone when `zone` is true. Bound pods go
/// Failed then Pending and back into their queue; a failed gang member takes
/// its whole group down with it. The nodes are then removed.
/// Throws ConfigError for an unknown node or an empty zone.
FailureResult inject_failure(ClusterState& state, PendingQueues& queues, const std::string& target, bool zone);

struct MetricsRow {
    double time = 0.0;
    double cpu_util = 0.0;
    double mem_util = 0.0;
    double gpu_util = 0.0;
    std::size_t pending = 0;
    std::size_t running = 0;
    std::size_t nodes = 0;
    std::int64_t fragmentation = 0;
    double imbalance = 0.0;  // max - min node cpu utilization
    std::uint64_t preemptions = 0;
    double mean_pending_delay = 0.0;
    std::string profile;
};

struct DefragRecord {
    double time = 0.0;
    std::int64_t before = 0;
    std::int64_t after = 0;
    std::size_t migrations = 0;
};

struct MetricsReport {
    std::vector<MetricsRow> rows;
    /// First bind time minus arrival time, per bound pod.
    std::map<PodId, double> scheduling_delay;
    /// Horizon minus arrival time for pods never bound.
    std::map<PodId, double> censored_delay;
    std::vector<double> job_completion_times;
    std::uint64_t arrived = 0;
    std::uint64_t completed = 0;
    std::uint64_t pending = 0;
    std::uint64_t running = 0;
    std::uint64_t failed_in_flight = 0;
    std::uint64_t preemptions = 0;
    std::uint64_t failures_requeued = 0;
    std::uint64_t nodes_added = 0;
    std::uint64_t nodes_removed = 0;
    std::uint64_t migrations = 0;
    std::uint64_t decisions = 0;
    std::vector<DefragRecord> defrag;
    std::vector<double> rewards;
    bool halted = false;
    std::string halt_reason;
};

/// Aggregates over a report. Delays include censored pods.
struct Summary {
    double mean_cpu_util = 0.0;
    double mean_mem_util = 0.0;
    double mean_gpu_util = 0.0;
    double mean_delay = 0.0;
    double p95_delay = 0.0;
    double mean_fragmentation = 0.0;
    double mean_imbalance = 0.0;
    double mean_reward = 0.0;
};

[[nodiscard]] Summary summarize(const MetricsReport& report);
/// Nearest-rank percentile; 0 for an empty sample.
[[nodiscard]] double percentile(std::vector<double> values, double q);

struct RunOptions {
    /// Required for rl-train and rl-eval. Trained in place for rl-train.
    PolicyState* policy = nullptr;
    std::uint64_t rl_seed = 0;
    /// Called with every trace line as it is produced.
    std::function<void(const std::string&)> on_trace;
};

struct RunResult {
    MetricsReport report;
    std::vector<std::string> trace;  // JSON lines
};

/// Runs a scenario to its horizon. Never throws for an invariant breach:
/// the run halts, report.halted is set and the trace ends with a halt record.
/// Throws ConfigError when an rl mode has no policy.
[[nodiscard]] RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

struct EpisodeStats {
    int episode = 0;
    double epsilon = 0.0;
    double mean_reward = 0.0;
    double total_reward = 0.0;
};

struct TrainingResult {
    PolicyState policy;
    std::vector<EpisodeStats> episodes;
};

/// Repeats the scenario with the same workload seed. Episode e explores with
/// max(epsilon_min, epsilon * epsilon_decay^e).
[[nodiscard]] TrainingResult train_policy(const Scenario& scenario, int episodes,
                                          std::optional<PolicyState> initial = std::nullopt);

/// A variant of the scenario for compare_runs:
/// "static:<profile>", "rl:<policy file>" or "scenario", optionally followed
/// by "/ca=on|off", "/gang=on|off", "/defrag=on|off".
struct RunMode {
    std::string label;
    PolicyMode policy = PolicyMode::Static;
    std::string profile;
    std::optional<std::string> policy_file;
    std::optional<bool> ca;
    std::optional<bool> gang;
    std::optional<bool> defrag;
    bool from_scenario = false;
};

/// Throws ConfigError on a malformed mode.
[[nodiscard]] RunMode parse_mode(const std::string& text);
/// The scenario with the mode applied.
[[nodiscard]] Scenario apply_mode(const Scenario& scenario, const RunMode& mode);

struct ComparisonRow {
    std::string mode;
    Summary summary;
    std::uint64_t completed = 0;
    std::uint64_t preemptions = 0;
    std::uint64_t nodes_added = 0;
    bool halted = false;
};

/// Runs every mode on the same workload seed (in parallel) and tabulates them
/// in the given order. Throws ConfigError for fewer than two modes.
[[nodiscard]] std::vector<ComparisonRow> compare_runs(const Scenario& scenario, const std::vector<std::string>& modes);

}  // namespace orchestra
