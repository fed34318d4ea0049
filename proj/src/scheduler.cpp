#include "orchestra/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "orchestra/predicates.hpp"

namespace orchestra {

const char* to_string(Outcome o) noexcept {
    switch (o) {
        case Outcome::Bound: return "bound";
        case Outcome::Unschedulable: return "unschedulable";
        case Outcome::PreemptedAndBound: return "preempted_and_bound";
        case Outcome::GangBound: return "gang_bound";
        case Outcome::GangDeferred: return "gang_deferred";
    }
    return "?";
}

namespace {

struct Candidate {
    std::size_t count = 0;
    long long priority_sum = 0;
    std::vector<PodId> victims;

    [[nodiscard]] auto key() const { return std::tie(count, priority_sum, victims); }
};

// Evicting `victims` on a scratch copy makes `pod` pass every predicate on `node_id`.
bool feasible_after_eviction(const Pod& pod, const NodeId& node_id, const std::vector<PodId>& victims,
                             const ClusterState& state) {
    ClusterState scratch = state;
    for (const PodId& v : victims) {
        scratch.release(v, PodState::Preempted);
    }
    return is_feasible(pod, scratch.node(node_id), scratch);
}

bool resources_suffice(const Pod& pod, const NodeId& node_id, const std::vector<PodId>& victims,
                       const ClusterState& state) {
    Resources free = state.free(node_id);
    int slots = state.node(node_id).max_pods - static_cast<int>(state.pods_on(node_id).size());
    for (const PodId& v : victims) {
        if (state.node_of(v) == node_id) {
            free += state.pod(v).requests;
            ++slots;
        }
    }
    return slots > 0 && fits(pod.requests, free);
}

Candidate make_candidate(const std::vector<std::vector<PodId>>& units, const std::vector<std::size_t>& picked,
                         const ClusterState& state) {
    std::set<PodId> all;
    for (std::size_t u : picked) all.insert(units[u].begin(), units[u].end());
    Candidate c;
    c.victims.assign(all.begin(), all.end());
    c.count = c.victims.size();
    for (const PodId& v : c.victims) c.priority_sum += state.pod(v).priority;
    return c;
}

std::optional<Candidate> best_on_node(const Pod& pod, const NodeId& node_id, const ClusterState& state) {
    std::set<std::vector<PodId>> unit_set;
    for (const PodId& pid : state.pods_on(node_id)) {
        const Pod& p = state.pod(pid);
        if (p.priority >= pod.priority) continue;
        std::vector<PodId> unit{pid};
        if (p.group_id) {
            if (const PodGroup* g = state.group(*p.group_id)) {
                unit.clear();
                for (const PodId& m : g->member_ids) {
                    if (state.node_of(m)) unit.push_back(m);
                }
            }
        }
        const bool all_lower = std::all_of(unit.begin(), unit.end(), [&](const PodId& m) {
            return state.pod(m).priority < pod.priority;
        });
        if (!all_lower) continue;
        std::sort(unit.begin(), unit.end());
        unit_set.insert(std::move(unit));
    }
    if (unit_set.empty()) return std::nullopt;
    const std::vector<std::vector<PodId>> units(unit_set.begin(), unit_set.end());

    std::vector<std::size_t> everything(units.size());
    std::iota(everything.begin(), everything.end(), 0);
    if (!resources_suffice(pod, node_id, make_candidate(units, everything, state).victims, state)) {
        return std::nullopt;
    }

    if (units.size() <= kExactPreemptionUnits) {
        std::vector<Candidate> candidates;
        const std::size_t n = units.size();
        for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
            std::vector<std::size_t> picked;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (std::size_t{1} << i)) picked.push_back(i);
            }
            Candidate c = make_candidate(units, picked, state);
            if (resources_suffice(pod, node_id, c.victims, state)) candidates.push_back(std::move(c));
        }
        std::sort(candidates.begin(), candidates.end(),
                  [](const Candidate& a, const Candidate& b) { return a.key() < b.key(); });
        candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                     [](const Candidate& a, const Candidate& b) { return a.victims == b.victims; }),
                         candidates.end());
        for (auto& c : candidates) {
            if (feasible_after_eviction(pod, node_id, c.victims, state)) return std::move(c);
        }
        return std::nullopt;
    }

    // Too many units to enumerate: take the cheapest units until the pod
    // fits, then give back whatever is not needed.
    std::vector<std::size_t> order = everything;
    auto unit_prio = [&](std::size_t u) {
        int mx = 0;
        for (const PodId& m : units[u]) mx = std::max(mx, state.pod(m).priority);
        return mx;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_tuple(unit_prio(a), units[a].size(), units[a]) <
               std::make_tuple(unit_prio(b), units[b].size(), units[b]);
    });
    std::vector<std::size_t> picked;
    bool ok = false;
    for (std::size_t u : order) {
        picked.push_back(u);
        Candidate c = make_candidate(units, picked, state);
        if (resources_suffice(pod, node_id, c.victims, state) &&
            feasible_after_eviction(pod, node_id, c.victims, state)) {
            ok = true;
            break;
        }
    }
    if (!ok) return std::nullopt;
    for (std::size_t i = picked.size(); i-- > 0;) {
        std::vector<std::size_t> trial = picked;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
        if (trial.empty()) continue;
        Candidate c = make_candidate(units, trial, state);
        if (resources_suffice(pod, node_id, c.victims, state) &&
            feasible_after_eviction(pod, node_id, c.victims, state)) {
            picked = std::move(trial);
        }
    }
    return make_candidate(units, picked, state);
}

}  // namespace

std::optional<PreemptionPlan> preempt(const Pod& pod, const ClusterState& state) {
    std::optional<std::pair<Candidate, NodeId>> best;
    for (const auto& [nid, node] : state.nodes()) {
        auto c = best_on_node(pod, nid, state);
        if (!c) continue;
        if (!best || std::tie(c->count, c->priority_sum) < std::tie(best->first.count, best->first.priority_sum)) {
            best = std::make_pair(std::move(*c), nid);
        }
    }
    if (!best) return std::nullopt;
    return PreemptionPlan{best->second, std::move(best->first.victims)};
}

void evict_and_requeue(const PodId& pod, PodState reason, PendingQueues& queues, ClusterState& state) {
    const Pod& p = state.pod(pod);
    const Resources requests = p.requests;
    const QueueId queue = p.queue_id;
    state.release(pod, reason);
    state.requeue(pod);
    queues.refund(queue, requests);
    queues.push(queue, pod);
}

std::optional<ScheduleDecision> Scheduler::schedule_one(PendingQueues& queues, ClusterState& state,
                                                        const ScoreProfile& profile) {
    const auto next = next_pod(queues, state);
    if (!next) return std::nullopt;
    const Pod& pod = state.pod(*next);

    if (config_.gang_enabled && pod.group_id) {
        if (const PodGroup* group = state.group(*pod.group_id)) {
            return gang_schedule(*group, queues, state, profile);
        }
    }

    ScheduleDecision d;
    d.pod = pod.id;
    d.group = pod.group_id;
    const auto feasible = filter_feasible(pod, state);
    if (!feasible.empty()) {
        d.scores = aggregate_and_rank(pod, feasible, profile, state);
        const NodeId target = d.scores.front().node;
        try {
            state.bind(pod.id, target);
        } catch (const Error& e) {
            throw CacheInconsistency("bind of '" + pod.id + "' to feasible node '" + target + "' refused: " + e.what());
        }
        queues.remove(pod.id);
        queues.charge(pod.queue_id, pod.requests);
        d.outcome = Outcome::Bound;
        d.node = target;
        return d;
    }

    if (config_.preemption_enabled) {
        if (auto plan = preempt(pod, state)) {
            for (const PodId& v : plan->victims) {
                evict_and_requeue(v, PodState::Preempted, queues, state);
            }
            if (!is_feasible(pod, state.node(plan->node), state)) {
                throw CacheInconsistency("pod '" + pod.id + "' infeasible on '" + plan->node + "' after eviction");
            }
            state.bind(pod.id, plan->node);
            queues.remove(pod.id);
            queues.charge(pod.queue_id, pod.requests);
            d.outcome = Outcome::PreemptedAndBound;
            d.node = plan->node;
            d.victims = std::move(plan->victims);
            return d;
        }
    }

    for (const auto& [nid, node] : state.nodes()) {
        if (auto f = first_failure(pod, node, state)) ++d.predicate_failures[std::string(to_string(*f))];
    }
    queues.park(pod.id);
    d.outcome = Outcome::Unschedulable;
    d.reason = "no feasible node";
    return d;
}

ScheduleDecision Scheduler::gang_schedule(const PodGroup& group, PendingQueues& queues, ClusterState& state,
                                          const ScoreProfile& profile) {
    const std::vector<PodId> members = pending_members(group, state);
    ScheduleDecision d;
    d.pod = members.empty() ? PodId{} : members.front();
    d.group = group.id;

    const NetworkTopology network = state.network();
    auto ranked_order = [&profile, &network](const Pod& p, const ClusterState& s) {
        std::vector<NodeId> ids;
        for (const auto& r : aggregate_and_rank(p, filter_feasible(p, s), profile, s, network)) ids.push_back(r.node);
        return ids;
    };
    auto placement = find_gang_placement(group, state, ranked_order);
    if (!placement || placement->empty()) {
        for (const PodId& m : members) queues.park(m);
        d.outcome = Outcome::GangDeferred;
        d.reason = placement ? "no pending members" : "gang cannot be placed as a whole";
        return d;
    }

    ClusterState::Transaction tx(state);
    for (const PodId& m : members) {
        tx.bind(m, placement->at(m));
    }
    tx.commit();
    for (const PodId& m : members) {
        const Pod& p = state.pod(m);
        queues.remove(m);
        queues.charge(p.queue_id, p.requests);
    }
    d.outcome = Outcome::GangBound;
    d.placements = std::move(*placement);
    return d;
}

std::int64_t reference_gpu_request(const ClusterState& state) {
    std::int64_t ref = 0;
    for (const auto& [id, p] : state.pods()) {
        if (p.state == PodState::Pending) ref = std::max(ref, p.requests.gpu);
    }
    if (ref > 0) return ref;
    for (const auto& [id, n] : state.nodes()) ref = std::max(ref, n.capacity.gpu);
    return ref;
}

std::int64_t fragmentation_score(const ClusterState& state, std::int64_t reference) {
    if (reference <= 0) reference = reference_gpu_request(state);
    if (reference <= 0) return 0;
    std::int64_t total = 0;
    for (const auto& [id, n] : state.nodes()) {
        if (n.capacity.gpu <= 0) continue;
        total += state.free(id).gpu % reference;
    }
    return total;
}

bool bound_constraints_hold(const ClusterState& state) {
    for (const auto& [nid, node] : state.nodes()) {
        for (const PodId& pid : state.pods_on(nid)) {
            const Pod& p = state.pod(pid);
            if (!no_disk_conflict(p, node, state) || !volume_zone_and_binding(p, node) ||
                !tolerates_taints(p, node) || !inter_pod_affinity(p, node, state)) {
                return false;
            }
        }
    }
    return true;
}

namespace {

double gpu_utilization(const Node& n, const ClusterState& state) {
    if (n.capacity.gpu <= 0) return 0.0;
    return static_cast<double>(n.capacity.gpu - state.free(n.id).gpu) / static_cast<double>(n.capacity.gpu);
}

}  // namespace

std::vector<Migration> defragment(const ClusterState& state) {
    std::vector<Migration> plan;
    ClusterState scratch = state;
    const std::int64_t reference = reference_gpu_request(state);
    if (reference <= 0) return plan;

    for (std::size_t guard = 0; guard <= state.pods().size(); ++guard) {
        const std::int64_t current = fragmentation_score(scratch, reference);
        std::vector<const Node*> sources;
        std::vector<const Node*> gpu_nodes;
        for (const auto& [id, n] : scratch.nodes()) {
            if (n.capacity.gpu <= 0 || n.memory_pressure || n.pid_pressure) continue;
            gpu_nodes.push_back(&n);
            if (scratch.free(id).gpu < n.capacity.gpu) sources.push_back(&n);
        }
        auto by_util = [&scratch](const Node* a, const Node* b) {
            const double ua = gpu_utilization(*a, scratch);
            const double ub = gpu_utilization(*b, scratch);
            if (ua != ub) return ua < ub;
            return a->id < b->id;
        };
        std::sort(sources.begin(), sources.end(), by_util);
        std::sort(gpu_nodes.begin(), gpu_nodes.end(), [&](const Node* a, const Node* b) {
            const double ua = gpu_utilization(*a, scratch);
            const double ub = gpu_utilization(*b, scratch);
            if (ua != ub) return ua > ub;
            return a->id < b->id;
        });

        bool moved = false;
        for (const Node* src : sources) {
            std::vector<const Pod*> gpu_pods;
            for (const PodId& pid : scratch.pods_on(src->id)) {
                const Pod& p = scratch.pod(pid);
                if (p.requests.gpu > 0) gpu_pods.push_back(&p);
            }
            if (gpu_pods.empty()) continue;
            const Pod& smallest = **std::min_element(gpu_pods.begin(), gpu_pods.end(), [](const Pod* a, const Pod* b) {
                return std::tie(a->requests.gpu, a->requests.cpu, a->requests.memory, a->id) <
                       std::tie(b->requests.gpu, b->requests.cpu, b->requests.memory, b->id);
            });
            for (const Node* dst : gpu_nodes) {
                if (dst->id == src->id) continue;
                if (!is_feasible(smallest, *dst, scratch)) continue;
                ClusterState trial = scratch;
                trial.migrate(smallest.id, dst->id);
                if (fragmentation_score(trial, reference) >= current) continue;
                if (!bound_constraints_hold(trial)) continue;
                plan.push_back({smallest.id, src->id, dst->id});
                scratch = std::move(trial);
                moved = true;
                break;
            }
            if (moved) break;
        }
        if (!moved) break;
    }
    return plan;
}

void apply_plan(const std::vector<Migration>& plan, ClusterState& state) {
    for (const Migration& m : plan) {
        if (state.node_of(m.pod) != m.from) {
            throw BindError("pod '" + m.pod + "' is no longer on '" + m.from + "'");
        }
        state.migrate(m.pod, m.to);
    }
}

}  // namespace orchestra
