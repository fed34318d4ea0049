#include "orchestra/cluster.hpp"

#include <algorithm>

namespace orchestra {

const char* to_string(PodState s) noexcept {
    switch (s) {
        case PodState::Pending: return "Pending";
        case PodState::Scheduled: return "Scheduled";
        case PodState::Running: return "Running";
        case PodState::Completed: return "Completed";
        case PodState::Preempted: return "Preempted";
        case PodState::Failed: return "Failed";
    }
    return "?";
}

bool is_valid_transition(PodState from, PodState to) noexcept {
    using S = PodState;
    switch (from) {
        case S::Pending: return to == S::Scheduled;
        // A bound pod that has not started yet can still be evicted or lose its node.
        case S::Scheduled: return to == S::Running || to == S::Failed || to == S::Preempted;
        case S::Running: return to == S::Completed || to == S::Failed || to == S::Preempted;
        case S::Preempted:
        case S::Failed: return to == S::Pending;
        case S::Completed: return false;
    }
    return false;
}

bool AffinityTerm::matches(const Labels& labels) const {
    for (const auto& [k, v] : match_labels) {
        auto it = labels.find(k);
        if (it == labels.end() || it->second != v) return false;
    }
    return true;
}

std::optional<std::string> Node::label(const std::string& key) const {
    auto it = labels.find(key);
    if (it == labels.end()) return std::nullopt;
    return it->second;
}

void ClusterState::add_node(Node node) {
    if (nodes_.contains(node.id)) {
        throw ConfigError("duplicate node id '" + node.id + "'");
    }
    if (!node.capacity.is_valid()) {
        throw ConfigError("node '" + node.id + "' has negative capacity");
    }
    if (node.max_pods <= 0) {
        throw ConfigError("node '" + node.id + "' needs max_pods > 0");
    }
    if (!node.labels.contains("zone") || !node.labels.contains("tor")) {
        throw ConfigError("node '" + node.id + "' must carry 'zone' and 'tor' labels");
    }
    if (node.gpu_topology && node.gpu_topology->n_gpus() != node.capacity.gpu) {
        throw ConfigError("node '" + node.id + "' gpu capacity disagrees with its topology");
    }
    const NodeId id = node.id;
    free_[id] = node.capacity;
    bindings_[id];
    if (node.gpu_topology) {
        gpu_used_[id] = std::vector<bool>(node.gpu_topology->n_gpus(), false);
    }
    nodes_.emplace(id, std::move(node));
}

void ClusterState::remove_node(const NodeId& id) {
    auto it = bindings_.find(id);
    if (it == bindings_.end()) {
        throw ConfigError("unknown node '" + id + "'");
    }
    if (!it->second.empty()) {
        throw BindError("node '" + id + "' still has bound pods");
    }
    bindings_.erase(it);
    free_.erase(id);
    gpu_used_.erase(id);
    nodes_.erase(id);
}

const Node& ClusterState::node(const NodeId& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw ConfigError("unknown node '" + id + "'");
    return it->second;
}

void ClusterState::set_pressure(const NodeId& id, bool memory, bool pid) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw ConfigError("unknown node '" + id + "'");
    it->second.memory_pressure = memory;
    it->second.pid_pressure = pid;
}

void ClusterState::add_pod(Pod pod) {
    if (pods_.contains(pod.id)) {
        throw BindError("duplicate pod id '" + pod.id + "'");
    }
    if (pod.state != PodState::Pending) {
        throw BindError("pod '" + pod.id + "' must enter the cache as Pending");
    }
    if (!pod.requests.is_valid()) {
        throw BindError("pod '" + pod.id + "' has negative requests");
    }
    const PodId id = pod.id;
    pods_.emplace(id, std::move(pod));
}

void ClusterState::erase_pod(const PodId& id) {
    const Pod& p = pod(id);
    if (p.state != PodState::Completed && p.state != PodState::Pending) {
        throw BindError("pod '" + id + "' is still active");
    }
    pods_.erase(id);
}

const Pod& ClusterState::pod(const PodId& id) const {
    auto it = pods_.find(id);
    if (it == pods_.end()) throw BindError("unknown pod '" + id + "'");
    return it->second;
}

Pod& ClusterState::pod_mut(const PodId& id) {
    auto it = pods_.find(id);
    if (it == pods_.end()) throw BindError("unknown pod '" + id + "'");
    return it->second;
}

void ClusterState::add_group(PodGroup group) {
    if (group.min_member < 1) {
        throw ConfigError("group '" + group.id + "' needs min_member >= 1");
    }
    const GroupId id = group.id;
    groups_[id] = std::move(group);
}

const PodGroup* ClusterState::group(const GroupId& id) const {
    auto it = groups_.find(id);
    return it == groups_.end() ? nullptr : &it->second;
}

void ClusterState::transition(Pod& pod, PodState to) {
    if (!is_valid_transition(pod.state, to)) {
        throw BindError("illegal transition of pod '" + pod.id + "' from " + to_string(pod.state) +
                        " to " + to_string(to));
    }
    pod.state = to;
}

void ClusterState::bind(const PodId& pod_id, const NodeId& node_id, std::vector<int> gpus) {
    Pod& p = pod_mut(pod_id);
    if (p.state != PodState::Pending) {
        throw BindError("pod '" + pod_id + "' is " + to_string(p.state) + ", not Pending");
    }
    if (placement_.contains(pod_id)) {
        throw BindError("pod '" + pod_id + "' is already bound");
    }
    const Node& n = node(node_id);
    auto& bound = bindings_[node_id];
    if (static_cast<int>(bound.size()) >= n.max_pods) {
        throw BindError("node '" + node_id + "' is at max_pods");
    }
    Resources& fr = free_[node_id];
    if (!fits(p.requests, fr)) {
        throw BindError("pod '" + pod_id + "' does not fit node '" + node_id + "'");
    }
    if (n.gpu_topology && p.requests.gpu > 0) {
        auto& used = gpu_used_[node_id];
        std::vector<bool> mask(used.size());
        for (std::size_t i = 0; i < used.size(); ++i) mask[i] = !used[i];
        if (gpus.empty()) {
            gpus = best_gpu_set(*n.gpu_topology, mask, static_cast<int>(p.requests.gpu));
        }
        if (static_cast<std::int64_t>(gpus.size()) != p.requests.gpu) {
            throw BindError("pod '" + pod_id + "' got the wrong number of GPU indices");
        }
        for (int g : gpus) {
            if (g < 0 || g >= static_cast<int>(mask.size()) || !mask[g]) {
                throw BindError("GPU " + std::to_string(g) + " on '" + node_id + "' is not free");
            }
        }
        for (int g : gpus) used[g] = true;
        pod_gpus_[pod_id] = std::move(gpus);
    }
    fr = checked_sub(fr, p.requests);
    bound.insert(pod_id);
    placement_[pod_id] = node_id;
    p.state = PodState::Scheduled;
}

void ClusterState::start(const PodId& pod_id) {
    Pod& p = pod_mut(pod_id);
    transition(p, PodState::Running);
}

void ClusterState::unbind_raw(const PodId& pod_id) {
    auto pit = placement_.find(pod_id);
    const NodeId node_id = pit->second;
    const Pod& p = pods_.at(pod_id);
    free_[node_id] += p.requests;
    bindings_[node_id].erase(pod_id);
    if (auto git = pod_gpus_.find(pod_id); git != pod_gpus_.end()) {
        auto& used = gpu_used_[node_id];
        for (int g : git->second) used[g] = false;
        pod_gpus_.erase(git);
    }
    placement_.erase(pit);
}

NodeId ClusterState::release(const PodId& pod_id, PodState terminal) {
    if (terminal != PodState::Completed && terminal != PodState::Preempted && terminal != PodState::Failed) {
        throw BindError("release target must be Completed, Preempted or Failed");
    }
    Pod& p = pod_mut(pod_id);
    auto pit = placement_.find(pod_id);
    if (pit == placement_.end()) {
        throw BindError("pod '" + pod_id + "' is not bound");
    }
    transition(p, terminal);
    const NodeId node_id = pit->second;
    unbind_raw(pod_id);
    return node_id;
}

void ClusterState::requeue(const PodId& pod_id) {
    transition(pod_mut(pod_id), PodState::Pending);
}

void ClusterState::migrate(const PodId& pod_id, const NodeId& to) {
    auto pit = placement_.find(pod_id);
    if (pit == placement_.end()) {
        throw BindError("pod '" + pod_id + "' is not bound");
    }
    const NodeId from = pit->second;
    if (from == to) return;
    const Pod& p = pods_.at(pod_id);
    const Node& dst = node(to);
    if (static_cast<int>(bindings_[to].size()) >= dst.max_pods || !fits(p.requests, free_[to])) {
        throw BindError("pod '" + pod_id + "' does not fit migration target '" + to + "'");
    }
    std::vector<int> gpus;
    if (dst.gpu_topology && p.requests.gpu > 0) {
        gpus = best_gpu_set(*dst.gpu_topology, gpu_free_mask(to), static_cast<int>(p.requests.gpu));
    }
    unbind_raw(pod_id);
    free_[to] = checked_sub(free_[to], p.requests);
    bindings_[to].insert(pod_id);
    placement_[pod_id] = to;
    if (!gpus.empty()) {
        auto& used = gpu_used_[to];
        for (int g : gpus) used[g] = true;
        pod_gpus_[pod_id] = std::move(gpus);
    }
}

const Resources& ClusterState::free(const NodeId& id) const {
    auto it = free_.find(id);
    if (it == free_.end()) throw ConfigError("unknown node '" + id + "'");
    return it->second;
}

const std::set<PodId>& ClusterState::pods_on(const NodeId& id) const {
    auto it = bindings_.find(id);
    if (it == bindings_.end()) throw ConfigError("unknown node '" + id + "'");
    return it->second;
}

std::optional<NodeId> ClusterState::node_of(const PodId& id) const {
    auto it = placement_.find(id);
    if (it == placement_.end()) return std::nullopt;
    return it->second;
}

const std::vector<int>& ClusterState::gpus_of(const PodId& id) const {
    static const std::vector<int> none;
    auto it = pod_gpus_.find(id);
    return it == pod_gpus_.end() ? none : it->second;
}

std::vector<bool> ClusterState::gpu_free_mask(const NodeId& id) const {
    auto it = gpu_used_.find(id);
    if (it == gpu_used_.end()) return {};
    std::vector<bool> mask(it->second.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = !it->second[i];
    return mask;
}

Resources ClusterState::total_capacity() const {
    Resources total;
    for (const auto& [id, n] : nodes_) total += n.capacity;
    return total;
}

Resources ClusterState::total_used() const {
    Resources total;
    for (const auto& [id, n] : nodes_) {
        const Resources& f = free_.at(id);
        total += Resources{n.capacity.cpu - f.cpu, n.capacity.memory - f.memory, n.capacity.gpu - f.gpu};
    }
    return total;
}

Resources ClusterState::recompute_free(const NodeId& id) const {
    Resources used;
    for (const PodId& pid : pods_on(id)) used += pods_.at(pid).requests;
    const Resources& cap = node(id).capacity;
    return Resources{cap.cpu - used.cpu, cap.memory - used.memory, cap.gpu - used.gpu};
}

void ClusterState::check_invariants() const {
    std::map<PodId, NodeId> seen;
    for (const auto& [id, n] : nodes_) {
        const Resources fresh = recompute_free(id);
        if (!fresh.is_valid()) {
            throw CacheInconsistency("node '" + id + "' is over capacity");
        }
        if (fresh != free_.at(id)) {
            throw CacheInconsistency("free cache of node '" + id + "' is stale: cached " +
                                     to_string(free_.at(id)) + ", recomputed " + to_string(fresh));
        }
        const auto& bound = bindings_.at(id);
        if (static_cast<int>(bound.size()) > n.max_pods) {
            throw CacheInconsistency("node '" + id + "' exceeds max_pods");
        }
        for (const PodId& pid : bound) {
            if (!seen.emplace(pid, id).second) {
                throw CacheInconsistency("pod '" + pid + "' bound to two nodes");
            }
            const PodState s = pods_.at(pid).state;
            if (s != PodState::Scheduled && s != PodState::Running) {
                throw CacheInconsistency("pod '" + pid + "' is bound while " + to_string(s));
            }
        }
    }
    if (seen != placement_) {
        throw CacheInconsistency("placement index disagrees with bindings");
    }
    for (const auto& [pid, p] : pods_) {
        const bool bound = placement_.contains(pid);
        const bool should = p.state == PodState::Scheduled || p.state == PodState::Running;
        if (bound != should) {
            throw CacheInconsistency("pod '" + pid + "' binding disagrees with state " + to_string(p.state));
        }
    }
}

void ClusterState::set_convergence_ratio(const std::string& tor, double ratio) {
    if (!(ratio > 0.0)) {
        throw ConfigError("convergence ratio of '" + tor + "' must be positive");
    }
    convergence_ratio_[tor] = ratio;
}

NetworkTopology ClusterState::network() const {
    NetworkTopology net;
    for (const auto& [id, n] : nodes_) {
        net.add_node(id, n.labels.at("zone"), n.labels.at("tor"));
    }
    for (const auto& [tor, r] : convergence_ratio_) net.set_convergence_ratio(tor, r);
    return net;
}

ClusterState::Transaction::~Transaction() {
    rollback();
}

void ClusterState::Transaction::bind(const PodId& pod_id, const NodeId& node_id, std::vector<int> gpus) {
    state_.bind(pod_id, node_id, std::move(gpus));
    binds_.push_back(pod_id);
}

void ClusterState::Transaction::undo_last() {
    if (binds_.empty()) return;
    const PodId pid = binds_.back();
    binds_.pop_back();
    // Not a lifecycle edge: the bind never became visible outside the transaction.
    state_.unbind_raw(pid);
    state_.pods_.at(pid).state = PodState::Pending;
}

void ClusterState::Transaction::rollback() {
    while (!binds_.empty()) undo_last();
}

}  // namespace orchestra
