#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "orchestra/resources.hpp"
#include "orchestra/topology.hpp"

namespace orchestra {

using PodId = std::string;
using NodeId = std::string;
using GroupId = std::string;
using QueueId = std::string;
using Labels = std::map<std::string, std::string>;

enum class PodState { Pending, Scheduled, Running, Completed, Preempted, Failed };

[[nodiscard]] const char* to_string(PodState s) noexcept;

/// Allowed edges of the pod lifecycle.
[[nodiscard]] bool is_valid_transition(PodState from, PodState to) noexcept;

struct Volume {
    std::string id;
    std::optional<std::string> zone;  // nullopt = zone-agnostic

    friend bool operator==(const Volume&, const Volume&) = default;
};

/// Label selector with a scope. An empty topology_key scopes the term to a
/// single node; otherwise to all nodes sharing that label value.
struct AffinityTerm {
    Labels match_labels;
    std::string topology_key;
    bool hard = true;
    int weight = 1;

    [[nodiscard]] bool matches(const Labels& labels) const;

    friend bool operator==(const AffinityTerm&, const AffinityTerm&) = default;
};

struct Pod {
    PodId id;
    QueueId queue_id = "default";
    std::optional<GroupId> group_id;
    int priority = 0;
    Resources requests;
    Labels labels;
    std::set<std::string> tolerations;
    std::vector<Volume> volumes;
    std::vector<AffinityTerm> affinity;
    std::vector<AffinityTerm> anti_affinity;
    std::optional<std::string> spread_topology_key;
    double duration = 0.0;  // simulated seconds; infinity for long-running replicas
    double arrival_time = 0.0;
    PodState state = PodState::Pending;

    [[nodiscard]] std::int64_t gpu_count() const noexcept { return requests.gpu; }
};

struct Node {
    NodeId id;
    Resources capacity;
    std::set<std::string> taints;
    Labels labels;  // must carry "zone" and "tor"
    bool memory_pressure = false;
    bool pid_pressure = false;
    int max_pods = 110;
    std::optional<GpuTopology> gpu_topology;

    [[nodiscard]] std::optional<std::string> label(const std::string& key) const;
};

struct PodGroup {
    GroupId id;
    int min_member = 1;
    std::set<PodId> member_ids;
};

/// Illegal mutation of the scheduler cache (capacity, double-bind, bad transition).
class BindError : public Error {
public:
    using Error::Error;
};

/// The cached free map disagrees with a from-scratch recomputation.
class CacheInconsistency : public Error {
public:
    using Error::Error;
};

/// Nodes, pods, bindings and the derived free-resource cache.
///
/// Every mutator either fully applies or throws and leaves the state
/// unchanged. Pod lifecycle edges are enforced here; nothing outside this
/// class can move a pod along an edge the lifecycle does not allow.
class ClusterState {
public:
    // --- nodes ---
    /// Throws ConfigError on a duplicate id, missing zone/tor labels or a
    /// GPU topology whose size disagrees with capacity.gpu.
    void add_node(Node node);
    /// Removes an empty node. Throws BindError if pods are still bound.
    void remove_node(const NodeId& id);
    [[nodiscard]] bool has_node(const NodeId& id) const { return nodes_.contains(id); }
    [[nodiscard]] const Node& node(const NodeId& id) const;
    [[nodiscard]] const std::map<NodeId, Node>& nodes() const noexcept { return nodes_; }
    void set_pressure(const NodeId& id, bool memory, bool pid);

    // --- pods ---
    /// Registers a Pending pod. Throws BindError on duplicates or a non-Pending pod.
    void add_pod(Pod pod);
    /// Drops a terminal (Completed) or Pending pod from the cache.
    void erase_pod(const PodId& id);
    [[nodiscard]] bool has_pod(const PodId& id) const { return pods_.contains(id); }
    [[nodiscard]] const Pod& pod(const PodId& id) const;
    [[nodiscard]] const std::map<PodId, Pod>& pods() const noexcept { return pods_; }

    // --- groups ---
    void add_group(PodGroup group);
    [[nodiscard]] const PodGroup* group(const GroupId& id) const;
    [[nodiscard]] const std::map<GroupId, PodGroup>& groups() const noexcept { return groups_; }

    // --- bindings ---
    /// Pending -> Scheduled on `node_id`. GPU pods landing on a node with a
    /// topology take `gpus` (or the best set when empty).
    void bind(const PodId& pod_id, const NodeId& node_id, std::vector<int> gpus = {});
    /// Scheduled -> Running.
    void start(const PodId& pod_id);
    /// Unbinds a Scheduled/Running pod into `terminal` (Completed, Preempted or Failed).
    NodeId release(const PodId& pod_id, PodState terminal);
    /// Preempted/Failed -> Pending.
    void requeue(const PodId& pod_id);
    /// Moves a bound pod to another node, keeping its state.
    void migrate(const PodId& pod_id, const NodeId& to);

    [[nodiscard]] const Resources& free(const NodeId& id) const;
    [[nodiscard]] const std::set<PodId>& pods_on(const NodeId& id) const;
    [[nodiscard]] std::optional<NodeId> node_of(const PodId& id) const;
    [[nodiscard]] const std::vector<int>& gpus_of(const PodId& id) const;
    /// GPU free mask of a node with a topology (empty when it has none).
    [[nodiscard]] std::vector<bool> gpu_free_mask(const NodeId& id) const;

    [[nodiscard]] Resources total_capacity() const;
    [[nodiscard]] Resources total_used() const;

    /// Capacity minus the requests bound on `id`, computed from scratch.
    [[nodiscard]] Resources recompute_free(const NodeId& id) const;
    /// Throws CacheInconsistency on any invariant breach.
    void check_invariants() const;

    // --- network ---
    void set_convergence_ratio(const std::string& tor, double ratio);
    /// Tree built from the zone/tor labels of the current nodes.
    [[nodiscard]] NetworkTopology network() const;

    /// Undo log for tentative binds. Destruction without commit() rolls back.
    class Transaction {
    public:
        explicit Transaction(ClusterState& state) : state_(state) {}
        Transaction(const Transaction&) = delete;
        Transaction& operator=(const Transaction&) = delete;
        ~Transaction();

        void bind(const PodId& pod_id, const NodeId& node_id, std::vector<int> gpus = {});
        /// Undoes the most recent bind of this transaction.
        void undo_last();
        void rollback();
        void commit() noexcept { binds_.clear(); }
        [[nodiscard]] std::size_t size() const noexcept { return binds_.size(); }

    private:
        ClusterState& state_;
        std::vector<PodId> binds_;
    };

private:
    Pod& pod_mut(const PodId& id);
    void transition(Pod& pod, PodState to);
    void unbind_raw(const PodId& pod_id);

    std::map<NodeId, Node> nodes_;
    std::map<NodeId, std::set<PodId>> bindings_;
    std::map<NodeId, Resources> free_;
    std::map<NodeId, std::vector<bool>> gpu_used_;
    std::map<PodId, Pod> pods_;
    std::map<PodId, NodeId> placement_;
    std::map<PodId, std::vector<int>> pod_gpus_;
    std::map<GroupId, PodGroup> groups_;
    std::map<std::string, double> convergence_ratio_;
};

}  // namespace orchestra
