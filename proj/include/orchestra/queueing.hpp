#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "orchestra/cluster.hpp"

namespace orchestra {

struct QueueSpec {
    QueueId id;
    Resources quota;  // cap on admitted-but-unfinished requests
    double weight = 1.0;
};

/// usage + pod.requests <= quota, componentwise.
[[nodiscard]] bool quota_admit(const QueueSpec& queue, const Resources& usage, const Resources& request);
[[nodiscard]] inline bool quota_admit(const QueueSpec& queue, const Resources& usage, const Pod& pod) {
    return quota_admit(queue, usage, pod.requests);
}

/// max_r usage_r / capacity_r. Throws ConfigError for usage on a zero-capacity dimension.
[[nodiscard]] double dominant_share(const Resources& usage, const Resources& cluster_capacity);

/// Per-queue FIFOs of pending pods plus each queue's admitted usage.
///
/// A pod is either active (eligible for next_pod) or parked (tried and found
/// unschedulable). Parked pods keep their FIFO position and come back on
/// unpark_all().
class PendingQueues {
public:
    /// Throws ConfigError on a duplicate id or non-positive weight.
    void add_queue(QueueSpec spec);
    [[nodiscard]] bool has_queue(const QueueId& id) const { return queues_.contains(id); }
    [[nodiscard]] const QueueSpec& spec(const QueueId& id) const;
    [[nodiscard]] std::vector<QueueId> queue_ids() const;

    /// Appends a pod to the tail of its queue. Throws ConfigError for an
    /// unknown queue and BindError when the pod is already queued.
    void push(const QueueId& queue, const PodId& pod);
    /// Removes a queued pod wherever it is. No-op if absent.
    void remove(const PodId& pod);
    void park(const PodId& pod);
    void unpark_all();
    /// Unparks the pods for which `pred` holds.
    template <typename Pred>
    void unpark_if(Pred pred) {
        for (auto& [qid, q] : queues_) {
            for (auto it = q.parked.begin(); it != q.parked.end();) {
                if (pred(it->second)) {
                    q.active.insert(*it);
                    it = q.parked.erase(it);
                } else {
                    ++it;
                }
            }
        }
    }

    [[nodiscard]] bool contains(const PodId& pod) const { return index_.contains(pod); }
    [[nodiscard]] bool is_parked(const PodId& pod) const;
    [[nodiscard]] std::size_t size() const noexcept { return index_.size(); }
    [[nodiscard]] std::size_t active_size() const;
    [[nodiscard]] bool empty() const noexcept { return index_.empty(); }
    /// All queued pods in queue order, then FIFO order.
    [[nodiscard]] std::vector<PodId> all() const;

    /// First active pod of a queue.
    [[nodiscard]] std::optional<PodId> head(const QueueId& queue) const;
    /// Insertion counter of a queued pod.
    [[nodiscard]] std::uint64_t sequence(const PodId& pod) const;

    // Admitted usage.
    void charge(const QueueId& queue, const Resources& r);
    void refund(const QueueId& queue, const Resources& r);
    [[nodiscard]] const Resources& usage(const QueueId& queue) const;

private:
    struct Queue {
        QueueSpec spec;
        std::map<std::uint64_t, PodId> active;
        std::map<std::uint64_t, PodId> parked;
        Resources usage;
    };
    Queue& queue_mut(const QueueId& id);

    std::map<QueueId, Queue> queues_;
    std::map<PodId, std::pair<QueueId, std::uint64_t>> index_;
    std::uint64_t counter_ = 0;
};

/// Picks the next pod among queue heads: highest priority_class, then the
/// queue with the lowest dominant_share / weight, then the earliest insertion.
/// A queue whose head would exceed its quota is skipped. Gang heads are
/// checked against the quota with the requests of all pending members.
[[nodiscard]] std::optional<PodId> next_pod(const PendingQueues& queues, const ClusterState& state);

/// Quota demand of admitting `pod`: its own requests, or those of every
/// pending member when it belongs to a group.
[[nodiscard]] Resources admission_demand(const Pod& pod, const ClusterState& state);

/// Pending members of a group, hardest placement first (most GPUs, then id).
[[nodiscard]] std::vector<PodId> pending_members(const PodGroup& group, const ClusterState& state);

/// True iff every pending member can be placed at once (all predicates,
/// combined capacity) and the bound + pending count reaches min_member.
/// Exact backtracking search.
[[nodiscard]] bool gang_ready(const PodGroup& group, const ClusterState& state);

/// Candidate nodes for one member, in the order the search should try them.
using CandidateOrder = std::function<std::vector<NodeId>(const Pod&, const ClusterState&)>;

/// The assignment found by the gang search, or nullopt. Without `order`
/// nodes are tried in id order. `state` is left unchanged.
[[nodiscard]] std::optional<std::map<PodId, NodeId>> find_gang_placement(const PodGroup& group,
                                                                         ClusterState& state,
                                                                         const CandidateOrder& order = {});

}  // namespace orchestra
