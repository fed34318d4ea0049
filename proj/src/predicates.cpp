#include "orchestra/predicates.hpp"

#include <set>

namespace orchestra {

std::string_view to_string(PredicateKind kind) noexcept {
    switch (kind) {
        case PredicateKind::GeneralPredicates: return "GeneralPredicates";
        case PredicateKind::NoDiskConflict: return "NoDiskConflict";
        case PredicateKind::CheckVolumeBinding: return "CheckVolumeBinding";
        case PredicateKind::NoVolumeZoneConflict: return "NoVolumeZoneConflict";
        case PredicateKind::CheckNodeMemoryPressure: return "CheckNodeMemoryPressure";
        case PredicateKind::CheckNodePIDPressure: return "CheckNodePIDPressure";
        case PredicateKind::PodToleratesNodeTaints: return "PodToleratesNodeTaints";
        case PredicateKind::MatchInterPodAffinity: return "MatchInterPodAffinity";
    }
    return "?";
}

bool general_predicates(const Pod& pod, const Node& node, const ClusterState& state) {
    return fits(pod.requests, state.free(node.id)) &&
           static_cast<int>(state.pods_on(node.id).size()) < node.max_pods;
}

bool no_disk_conflict(const Pod& pod, const Node& node, const ClusterState& state) {
    if (pod.volumes.empty()) return true;
    std::set<std::string> used;
    for (const PodId& pid : state.pods_on(node.id)) {
        if (pid == pod.id) continue;
        for (const Volume& v : state.pod(pid).volumes) used.insert(v.id);
    }
    for (const Volume& v : pod.volumes) {
        if (used.contains(v.id)) return false;
    }
    return true;
}

bool volume_zone_and_binding(const Pod& pod, const Node& node) {
    auto zone = node.label("zone");
    if (!zone) {
        throw ConfigError("node '" + node.id + "' has no zone label");
    }
    for (const Volume& v : pod.volumes) {
        if (v.zone && *v.zone != *zone) return false;
    }
    return true;
}

bool node_memory_pressure_ok(const Node& node) noexcept {
    return !node.memory_pressure;
}

bool node_pid_pressure_ok(const Node& node) noexcept {
    return !node.pid_pressure;
}

bool node_pressure(const Pod&, const Node& node) noexcept {
    return node_memory_pressure_ok(node) && node_pid_pressure_ok(node);
}

bool tolerates_taints(const Pod& pod, const Node& node) {
    for (const auto& t : node.taints) {
        if (!pod.tolerations.contains(t)) return false;
    }
    return true;
}

bool term_matches_in_scope(const AffinityTerm& term, const Pod& pod, const Node& node,
                           const ClusterState& state) {
    auto check_node = [&](const NodeId& nid) {
        for (const PodId& pid : state.pods_on(nid)) {
            if (pid == pod.id) continue;
            if (term.matches(state.pod(pid).labels)) return true;
        }
        return false;
    };
    if (term.topology_key.empty()) return check_node(node.id);
    auto value = node.label(term.topology_key);
    if (!value) return false;
    for (const auto& [nid, other] : state.nodes()) {
        auto ov = other.label(term.topology_key);
        if (ov && *ov == *value && check_node(nid)) return true;
    }
    return false;
}

bool inter_pod_affinity(const Pod& pod, const Node& node, const ClusterState& state) {
    for (const auto& term : pod.affinity) {
        if (term.hard && !term_matches_in_scope(term, pod, node, state)) return false;
    }
    for (const auto& term : pod.anti_affinity) {
        if (term.hard && term_matches_in_scope(term, pod, node, state)) return false;
    }
    return true;
}

bool evaluate(PredicateKind kind, const Pod& pod, const Node& node, const ClusterState& state) {
    switch (kind) {
        case PredicateKind::GeneralPredicates: return general_predicates(pod, node, state);
        case PredicateKind::NoDiskConflict: return no_disk_conflict(pod, node, state);
        // Both volume rows share one check: the volume must be mountable from the node's zone.
        case PredicateKind::CheckVolumeBinding:
        case PredicateKind::NoVolumeZoneConflict: return volume_zone_and_binding(pod, node);
        case PredicateKind::CheckNodeMemoryPressure: return node_memory_pressure_ok(node);
        case PredicateKind::CheckNodePIDPressure: return node_pid_pressure_ok(node);
        case PredicateKind::PodToleratesNodeTaints: return tolerates_taints(pod, node);
        case PredicateKind::MatchInterPodAffinity: return inter_pod_affinity(pod, node, state);
    }
    return false;
}

std::optional<PredicateKind> first_failure(const Pod& pod, const Node& node, const ClusterState& state) {
    for (PredicateKind k : kAllPredicates) {
        if (!evaluate(k, pod, node, state)) return k;
    }
    return std::nullopt;
}

std::vector<NodeId> filter_feasible(const Pod& pod, const ClusterState& state) {
    std::vector<NodeId> out;
    for (const auto& [id, node] : state.nodes()) {
        if (is_feasible(pod, node, state)) out.push_back(id);
    }
    return out;
}

}  // namespace orchestra
