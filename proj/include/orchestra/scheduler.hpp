#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orchestra/cluster.hpp"
#include "orchestra/queueing.hpp"
#include "orchestra/scoring.hpp"

namespace orchestra {

enum class Outcome { Bound, Unschedulable, PreemptedAndBound, GangBound, GangDeferred };

[[nodiscard]] const char* to_string(Outcome o) noexcept;

/// Result of one scheduling attempt.
struct ScheduleDecision {
    PodId pod;
    Outcome outcome = Outcome::Unschedulable;
    std::optional<NodeId> node;
    std::string reason;
    std::vector<PodId> victims;
    std::vector<RankedNode> scores;
    std::optional<GroupId> group;
    std::map<PodId, NodeId> placements;           // gang outcomes
    std::map<std::string, int> predicate_failures;  // predicate -> node count, for Unschedulable

    [[nodiscard]] bool bound() const noexcept {
        return outcome == Outcome::Bound || outcome == Outcome::PreemptedAndBound ||
               outcome == Outcome::GangBound;
    }
};

struct PreemptionPlan {
    NodeId node;
    std::vector<PodId> victims;  // sorted by id
};

/// Cheapest eviction that makes `pod` feasible somewhere: fewest victims,
/// then lowest priority sum, then smallest node id. Victims all have a
/// strictly lower priority_class; evicting a group member evicts every bound
/// member of its group. Does not mutate `state`.
[[nodiscard]] std::optional<PreemptionPlan> preempt(const Pod& pod, const ClusterState& state);

/// Subset search is exhaustive up to this many eviction units per node, greedy above.
inline constexpr std::size_t kExactPreemptionUnits = 12;

struct SchedulerConfig {
    bool gang_enabled = true;
    bool preemption_enabled = true;
};

/// The one-at-a-time scheduling loop body. Keeps queue usage in step with
/// the cluster cache: binds charge the pod's queue, evictions refund it and
/// push the victim back as a pending pod.
class Scheduler {
public:
    explicit Scheduler(SchedulerConfig config = {}) : config_(config) {}

    [[nodiscard]] const SchedulerConfig& config() const noexcept { return config_; }

    /// Pops next_pod and tries to place it. nullopt when no pod is eligible.
    /// Unschedulable and deferred pods are parked in their queue.
    /// Throws CacheInconsistency if a bind that passed every predicate is refused.
    std::optional<ScheduleDecision> schedule_one(PendingQueues& queues, ClusterState& state,
                                                 const ScoreProfile& profile);

    /// All-or-nothing placement of every pending member of `group`.
    ScheduleDecision gang_schedule(const PodGroup& group, PendingQueues& queues, ClusterState& state,
                                   const ScoreProfile& profile);

private:
    SchedulerConfig config_;
};

/// Unbinds a bound pod into Preempted or Failed and puts it back in its queue as Pending.
void evict_and_requeue(const PodId& pod, PodState reason, PendingQueues& queues, ClusterState& state);

/// Largest GPU request among pending pods, else the largest node GPU capacity, else 0.
[[nodiscard]] std::int64_t reference_gpu_request(const ClusterState& state);

/// Sum over GPU nodes of the free GPUs left over after packing as many
/// `reference`-sized requests as fit. reference <= 0 uses reference_gpu_request().
[[nodiscard]] std::int64_t fragmentation_score(const ClusterState& state, std::int64_t reference = 0);

struct Migration {
    PodId pod;
    NodeId from;
    NodeId to;

    friend bool operator==(const Migration&, const Migration&) = default;
};

/// Greedy consolidation: repeatedly move the smallest GPU pod off the
/// least-utilized GPU node onto the fullest node that accepts it, keeping
/// only moves that strictly lower the fragmentation score.
[[nodiscard]] std::vector<Migration> defragment(const ClusterState& state);

/// Applies a plan produced by defragment(). Throws BindError if a move no longer fits.
void apply_plan(const std::vector<Migration>& plan, ClusterState& state);

/// Every bound pod still satisfies its volume and inter-pod affinity constraints.
[[nodiscard]] bool bound_constraints_hold(const ClusterState& state);

}  // namespace orchestra
