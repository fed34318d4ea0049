#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "orchestra/cluster.hpp"
#include "orchestra/forecast.hpp"
#include "orchestra/queueing.hpp"
#include "orchestra/rl.hpp"
#include "orchestra/scoring.hpp"

namespace orchestra {

/// Raised for a scenario document that violates the schema. `path()` points
/// at the offending key, e.g. "$.workload.templates[1].cpu".
class SchemaError : public ConfigError {
public:
    SchemaError(std::string path, const std::string& message)
        : ConfigError(path + ": " + message), path_(std::move(path)) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct NodeGroupSpec {
    std::string name;
    int count = 0;
    Resources capacity;
    int max_pods = 110;
    std::optional<GpuTopology> gpu_topology;
    std::vector<std::string> zones{"zone-a"};
    std::vector<std::string> tors;  // defaults to one ToR per zone
    std::set<std::string> taints;
    Labels labels;
    bool memory_pressure = false;
    bool pid_pressure = false;

    /// The i-th node of this group: id "<name>-NNN", zone and ToR assigned round-robin.
    [[nodiscard]] Node make_node(int index) const;
    [[nodiscard]] Node make_node(const NodeId& id, int index) const;
};

struct PodTemplate {
    std::string name;
    QueueId queue = "default";
    int priority = 0;
    Resources requests;
    double duration = 60.0;
    bool exponential_duration = false;
    int gang_size = 1;
    int min_member = 0;  // 0 = gang_size
    Labels labels;
    std::set<std::string> tolerations;
    std::vector<Volume> volumes;  // "{pod}" in an id is replaced by the pod id
    std::vector<AffinityTerm> affinity;
    std::vector<AffinityTerm> anti_affinity;
    std::optional<std::string> spread_key;
};

/// Poisson arrivals at `rate` per second over [start, end); templates drawn by `mix` weights.
struct ArrivalPhase {
    double start = 0.0;
    double end = 0.0;
    double rate = 0.0;
    std::map<std::string, double> mix;
};

/// A single arrival of `template_name` at a fixed time.
struct ScheduledArrival {
    std::string template_name;
    double time = 0.0;
};

struct WorkloadSpec {
    std::vector<PodTemplate> templates;
    std::vector<ArrivalPhase> phases;
    std::vector<ScheduledArrival> arrivals;

    [[nodiscard]] const PodTemplate& find_template(const std::string& name) const;
};

struct LoadPhase {
    double start = 0.0;
    double end = 0.0;
    double load = 0.0;
};

/// A replicated service scaled by the horizontal autoscaler from an offered load.
struct ServiceSpec {
    std::string name;
    std::string template_name;
    int min_replicas = 1;
    int max_replicas = 10;
    int initial_replicas = 1;
    double target_cpu_utilization = 0.6;
    std::optional<double> target_memory_utilization;
    double memory_per_cpu_utilization = 1.0;  // memory utilization = this * cpu utilization
    double capacity_per_replica = 100.0;      // load units one replica serves at 100%
    double base_load = 0.0;
    std::vector<LoadPhase> load;

    [[nodiscard]] double load_at(double t) const;
};

struct CaConfig {
    bool enabled = false;
    std::string node_group;
    double scale_up_delay = 10.0;
    double scale_down_delay = 60.0;
    double scale_down_utilization = 0.3;
    double provision_delay = 20.0;
    int min_nodes = 0;
    int max_nodes = 50;
};

struct FailureSpec {
    double time = 0.0;
    std::optional<NodeId> node;
    std::optional<std::string> zone;
    std::optional<double> recover_after;
};

enum class PolicyMode { Static, RlTrain, RlEval };

struct RlConfig {
    std::vector<std::string> actions{"spread", "binpack", "topology"};
    double epsilon = 0.3;
    double epsilon_decay = 0.9;
    double epsilon_min = 0.02;
    double alpha = 0.2;
    double gamma = 0.8;
    ForecastKind forecast = ForecastKind::LinearTrend;
    int forecast_window = 6;
    double forecast_alpha = 0.5;
};

struct SchedulerSettings {
    bool gang = true;
    bool preemption = true;
    double defragment_interval = 0.0;  // 0 = off
    bool defragment_on_gpu_unschedulable = false;
};

struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 0;
    double duration = 0.0;
    double metric_interval = 5.0;
    double agent_interval = 10.0;
    std::vector<NodeGroupSpec> node_groups;
    std::map<std::string, double> convergence_ratio;
    std::vector<QueueSpec> queues;
    std::map<std::string, ScoreProfile> profiles;  // built-ins plus scenario-defined
    WorkloadSpec workload;
    std::vector<ServiceSpec> services;
    CaConfig ca;
    bool hpa_enabled = true;
    std::vector<FailureSpec> failures;
    PolicyMode mode = PolicyMode::Static;
    std::string profile = "spread";
    std::optional<std::filesystem::path> policy_file;
    RlConfig rl;
    RewardConfig reward;
    SchedulerSettings scheduler;

    [[nodiscard]] const NodeGroupSpec& node_group(const std::string& name) const;
    [[nodiscard]] const ScoreProfile& score_profile(const std::string& name) const;
};

/// Parses and validates a scenario document. Unknown keys are rejected.
/// Relative policy paths resolve against `base_dir`.
[[nodiscard]] Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir = {});
/// Throws IoError when the file cannot be read.
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

/// Cross-reference checks (queues, templates, profiles, failure targets).
/// parse_scenario already calls this; exposed for programmatically built scenarios.
void validate_scenario(const Scenario& scenario);

}  // namespace orchestra
