#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "orchestra/cluster.hpp"

namespace orchestra {

/// Hard filters. Every pod/node pair must pass all of them to be feasible.
enum class PredicateKind {
    GeneralPredicates,
    NoDiskConflict,
    CheckVolumeBinding,
    NoVolumeZoneConflict,
    CheckNodeMemoryPressure,
    CheckNodePIDPressure,
    PodToleratesNodeTaints,
    MatchInterPodAffinity,
};

inline constexpr std::array<PredicateKind, 8> kAllPredicates = {
    PredicateKind::GeneralPredicates,       PredicateKind::NoDiskConflict,
    PredicateKind::CheckVolumeBinding,      PredicateKind::NoVolumeZoneConflict,
    PredicateKind::CheckNodeMemoryPressure, PredicateKind::CheckNodePIDPressure,
    PredicateKind::PodToleratesNodeTaints,  PredicateKind::MatchInterPodAffinity,
};

[[nodiscard]] std::string_view to_string(PredicateKind kind) noexcept;

/// Resources fit the node's free cache and the node is below max_pods.
[[nodiscard]] bool general_predicates(const Pod& pod, const Node& node, const ClusterState& state);

/// No volume of the pod is already used by a pod bound on the node.
[[nodiscard]] bool no_disk_conflict(const Pod& pod, const Node& node, const ClusterState& state);

/// Every zoned volume sits in the node's zone. Throws ConfigError if the node has no zone.
[[nodiscard]] bool volume_zone_and_binding(const Pod& pod, const Node& node);

[[nodiscard]] bool node_memory_pressure_ok(const Node& node) noexcept;
[[nodiscard]] bool node_pid_pressure_ok(const Node& node) noexcept;

/// Both pressure checks: false when either flag is set.
[[nodiscard]] bool node_pressure(const Pod& pod, const Node& node) noexcept;

/// node.taints is a subset of pod.tolerations.
[[nodiscard]] bool tolerates_taints(const Pod& pod, const Node& node);

/// Hard affinity terms each match some pod in scope; hard anti-affinity terms match none.
[[nodiscard]] bool inter_pod_affinity(const Pod& pod, const Node& node, const ClusterState& state);

/// True iff some bound pod (other than `pod`) in the term's scope around `node` matches it.
[[nodiscard]] bool term_matches_in_scope(const AffinityTerm& term, const Pod& pod, const Node& node,
                                         const ClusterState& state);

[[nodiscard]] bool evaluate(PredicateKind kind, const Pod& pod, const Node& node, const ClusterState& state);

/// All predicates, short-circuiting. Returns the first failing predicate, if any.
[[nodiscard]] std::optional<PredicateKind> first_failure(const Pod& pod, const Node& node,
                                                         const ClusterState& state);

[[nodiscard]] inline bool is_feasible(const Pod& pod, const Node& node, const ClusterState& state) {
    return !first_failure(pod, node, state).has_value();
}

/// Nodes passing every predicate, in ascending node-id order.
[[nodiscard]] std::vector<NodeId> filter_feasible(const Pod& pod, const ClusterState& state);

}  // namespace orchestra
