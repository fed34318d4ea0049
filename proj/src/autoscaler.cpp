#include "orchestra/autoscaler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "orchestra/predicates.hpp"

namespace orchestra {

namespace {

// Absorbs rounding in current * util / target, e.g. 4 * 0.9 / 0.6.
constexpr double kRatioSlack = 1e-9;

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return b <= 0 ? 0 : (a + b - 1) / b; }

}  // namespace

int hpa_desired_replicas(int current, double current_util, double target_util, int min_replicas,
                         int max_replicas) {
    if (current < 1) throw std::invalid_argument("current replicas must be >= 1");
    if (!(target_util > 0.0)) throw std::invalid_argument("target utilization must be > 0");
    if (min_replicas > max_replicas) throw std::invalid_argument("min replicas exceed max replicas");
    if (!(current_util >= 0.0)) throw std::invalid_argument("current utilization must be >= 0");
    const double raw = std::ceil(static_cast<double>(current) * current_util / target_util - kRatioSlack);
    const double clamped = std::clamp(raw, static_cast<double>(min_replicas), static_cast<double>(max_replicas));
    return static_cast<int>(clamped);
}

int hpa_desired_replicas(int current, double cpu_util, double cpu_target, std::optional<double> memory_util,
                         std::optional<double> memory_target, int min_replicas, int max_replicas) {
    int desired = hpa_desired_replicas(current, cpu_util, cpu_target, min_replicas, max_replicas);
    if (memory_util && memory_target) {
        desired = std::max(desired,
                           hpa_desired_replicas(current, *memory_util, *memory_target, min_replicas, max_replicas));
    }
    return desired;
}

double node_utilization(const ClusterState& state, const NodeId& id) {
    const Node& n = state.node(id);
    const Resources& free = state.free(id);
    double u = 0.0;
    if (n.capacity.cpu > 0) u = std::max(u, static_cast<double>(n.capacity.cpu - free.cpu) / n.capacity.cpu);
    if (n.capacity.memory > 0) {
        u = std::max(u, static_cast<double>(n.capacity.memory - free.memory) / n.capacity.memory);
    }
    return u;
}

bool can_drain(const ClusterState& state, const NodeId& id) {
    ClusterState scratch = state;
    const std::set<PodId> pods = scratch.pods_on(id);
    for (const PodId& p : pods) {
        scratch.release(p, PodState::Preempted);
        scratch.requeue(p);
    }
    scratch.remove_node(id);
    for (const PodId& p : pods) {
        const auto feasible = filter_feasible(scratch.pod(p), scratch);
        if (feasible.empty()) return false;
        scratch.bind(p, feasible.front());
    }
    return true;
}

CaDecision ca_decide(const ClusterState& state, const CaObservation& obs, const CaConfig& config,
                     const NodeGroupSpec& shape) {
    CaDecision d;
    if (!config.enabled) return d;

    int group_nodes = 0;
    for (const auto& [id, n] : state.nodes()) {
        if (n.label("node-group") == config.node_group) ++group_nodes;
    }

    // Scale up: demand of long-waiting pods that an empty group node could host.
    const Node probe = shape.make_node(shape.name + "-probe", 0);
    Resources waiting;
    bool any = false;
    for (const auto& [pid, since] : obs.blocked_since) {
        if (obs.now - since < config.scale_up_delay || !state.has_pod(pid)) continue;
        const Pod& p = state.pod(pid);
        if (p.state != PodState::Pending || !fits(p.requests, probe.capacity) || !tolerates_taints(p, probe)) continue;
        waiting += p.requests;
        any = true;
    }
    if (any && group_nodes + obs.provisioning < config.max_nodes) {
        std::int64_t needed = std::max({ceil_div(waiting.cpu, probe.capacity.cpu),
                                        ceil_div(waiting.memory, probe.capacity.memory),
                                        ceil_div(waiting.gpu, probe.capacity.gpu), std::int64_t{1}});
        if (needed > obs.provisioning) {
            d.kind = CaDecision::Kind::AddNode;
            d.reason = "capacity-blocked pods waited " + std::to_string(config.scale_up_delay) + "s";
            return d;
        }
    }

    // Scale down.
    if (obs.provisioning > 0 || group_nodes <= config.min_nodes) return d;
    std::optional<std::pair<double, NodeId>> best;
    for (const auto& [nid, since] : obs.underutilized_since) {
        if (!state.has_node(nid) || state.node(nid).label("node-group") != config.node_group) continue;
        if (obs.now - since < config.scale_down_delay) continue;
        const double u = node_utilization(state, nid);
        if (u >= config.scale_down_utilization) continue;
        const auto& pods = state.pods_on(nid);
        const bool hosts_gang = std::any_of(pods.begin(), pods.end(),
                                            [&state](const PodId& p) { return state.pod(p).group_id.has_value(); });
        if (hosts_gang || !can_drain(state, nid)) continue;
        if (!best || std::make_pair(u, nid) < *best) best = std::make_pair(u, nid);
    }
    if (best) {
        d.kind = CaDecision::Kind::RemoveNode;
        d.node = best->second;
        d.reason = "utilization below threshold for " + std::to_string(config.scale_down_delay) + "s";
    }
    return d;
}

}  // namespace orchestra
