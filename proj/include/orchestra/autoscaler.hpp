#pragma once

#include <map>
#include <optional>
#include <string>

#include "orchestra/cluster.hpp"
#include "orchestra/scenario.hpp"

namespace orchestra {

/// ceil(current * current_util / target_util), clamped to [min_replicas, max_replicas].
/// Throws std::invalid_argument for current < 1, target_util <= 0 or min > max.
[[nodiscard]] int hpa_desired_replicas(int current, double current_util, double target_util, int min_replicas,
                                       int max_replicas);

/// The larger of the cpu-based and memory-based results when a memory target is set.
[[nodiscard]] int hpa_desired_replicas(int current, double cpu_util, double cpu_target,
                                       std::optional<double> memory_util, std::optional<double> memory_target,
                                       int min_replicas, int max_replicas);

/// What the cluster autoscaler sees at one evaluation.
struct CaObservation {
    double now = 0.0;
    /// Pending pods found unschedulable, with the time they were first parked.
    std::map<PodId, double> blocked_since;
    /// Nodes continuously below the scale-down threshold, with the time it started.
    std::map<NodeId, double> underutilized_since;
    /// Nodes ordered but not yet added.
    int provisioning = 0;
};

struct CaDecision {
    enum class Kind { NoOp, AddNode, RemoveNode };
    Kind kind = Kind::NoOp;
    NodeId node;  // RemoveNode target
    std::string reason;
};

/// max(cpu, memory) requested fraction of the node's capacity.
[[nodiscard]] double node_utilization(const ClusterState& state, const NodeId& id);

/// True iff every pod on `id` can be bound elsewhere, one after another,
/// with the node gone. Does not mutate `state`.
[[nodiscard]] bool can_drain(const ClusterState& state, const NodeId& id);

/// Scale up when a pod that would fit an empty node of the configured group
/// has waited at least scale_up_delay and the nodes already ordered cannot
/// absorb the waiting demand. Otherwise scale down the least-utilized group
/// node that stayed under the threshold for scale_down_delay, hosts no gang
/// members and passes can_drain().
[[nodiscard]] CaDecision ca_decide(const ClusterState& state, const CaObservation& observation,
                                   const CaConfig& config, const NodeGroupSpec& shape);

}  // namespace orchestra
