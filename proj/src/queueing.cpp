#include "orchestra/queueing.hpp"

#include <algorithm>
#include <functional>
#include <tuple>

#include "orchestra/predicates.hpp"

namespace orchestra {

bool quota_admit(const QueueSpec& queue, const Resources& usage, const Resources& request) {
    return fits(usage + request, queue.quota);
}

double dominant_share(const Resources& usage, const Resources& cluster_capacity) {
    double share = 0.0;
    auto dim = [&share](std::int64_t used, std::int64_t cap, const char* name) {
        if (used == 0) return;
        if (cap <= 0) {
            throw ConfigError(std::string("usage on zero-capacity dimension '") + name + "'");
        }
        share = std::max(share, static_cast<double>(used) / static_cast<double>(cap));
    };
    dim(usage.cpu, cluster_capacity.cpu, "cpu");
    dim(usage.memory, cluster_capacity.memory, "memory");
    dim(usage.gpu, cluster_capacity.gpu, "gpu");
    return share;
}

void PendingQueues::add_queue(QueueSpec spec) {
    if (queues_.contains(spec.id)) {
        throw ConfigError("duplicate queue '" + spec.id + "'");
    }
    if (!(spec.weight > 0.0)) {
        throw ConfigError("queue '" + spec.id + "' needs a positive weight");
    }
    if (!spec.quota.is_valid()) {
        throw ConfigError("queue '" + spec.id + "' has a negative quota");
    }
    const QueueId id = spec.id;
    queues_[id].spec = std::move(spec);
}

const QueueSpec& PendingQueues::spec(const QueueId& id) const {
    auto it = queues_.find(id);
    if (it == queues_.end()) throw ConfigError("unknown queue '" + id + "'");
    return it->second.spec;
}

std::vector<QueueId> PendingQueues::queue_ids() const {
    std::vector<QueueId> out;
    for (const auto& [id, q] : queues_) out.push_back(id);
    return out;
}

PendingQueues::Queue& PendingQueues::queue_mut(const QueueId& id) {
    auto it = queues_.find(id);
    if (it == queues_.end()) throw ConfigError("unknown queue '" + id + "'");
    return it->second;
}

void PendingQueues::push(const QueueId& queue, const PodId& pod) {
    Queue& q = queue_mut(queue);
    if (index_.contains(pod)) {
        throw BindError("pod '" + pod + "' is already queued");
    }
    const std::uint64_t seq = counter_++;
    q.active.emplace(seq, pod);
    index_[pod] = {queue, seq};
}

void PendingQueues::remove(const PodId& pod) {
    auto it = index_.find(pod);
    if (it == index_.end()) return;
    Queue& q = queues_.at(it->second.first);
    q.active.erase(it->second.second);
    q.parked.erase(it->second.second);
    index_.erase(it);
}

void PendingQueues::park(const PodId& pod) {
    auto it = index_.find(pod);
    if (it == index_.end()) return;
    Queue& q = queues_.at(it->second.first);
    auto node = q.active.extract(it->second.second);
    if (!node.empty()) q.parked.insert(std::move(node));
}

void PendingQueues::unpark_all() {
    for (auto& [id, q] : queues_) {
        q.active.merge(q.parked);
    }
}

bool PendingQueues::is_parked(const PodId& pod) const {
    auto it = index_.find(pod);
    if (it == index_.end()) return false;
    return queues_.at(it->second.first).parked.contains(it->second.second);
}

std::size_t PendingQueues::active_size() const {
    std::size_t n = 0;
    for (const auto& [id, q] : queues_) n += q.active.size();
    return n;
}

std::vector<PodId> PendingQueues::all() const {
    std::vector<PodId> out;
    for (const auto& [id, q] : queues_) {
        std::map<std::uint64_t, PodId> merged = q.active;
        merged.insert(q.parked.begin(), q.parked.end());
        for (const auto& [seq, pod] : merged) out.push_back(pod);
    }
    return out;
}

std::uint64_t PendingQueues::sequence(const PodId& pod) const {
    auto it = index_.find(pod);
    if (it == index_.end()) throw BindError("pod '" + pod + "' is not queued");
    return it->second.second;
}

std::optional<PodId> PendingQueues::head(const QueueId& queue) const {
    auto it = queues_.find(queue);
    if (it == queues_.end() || it->second.active.empty()) return std::nullopt;
    return it->second.active.begin()->second;
}

void PendingQueues::charge(const QueueId& queue, const Resources& r) {
    queue_mut(queue).usage += r;
}

void PendingQueues::refund(const QueueId& queue, const Resources& r) {
    Queue& q = queue_mut(queue);
    q.usage = checked_sub(q.usage, r);
}

const Resources& PendingQueues::usage(const QueueId& queue) const {
    auto it = queues_.find(queue);
    if (it == queues_.end()) throw ConfigError("unknown queue '" + queue + "'");
    return it->second.usage;
}

Resources admission_demand(const Pod& pod, const ClusterState& state) {
    if (!pod.group_id) return pod.requests;
    const PodGroup* group = state.group(*pod.group_id);
    if (group == nullptr) return pod.requests;
    Resources total;
    for (const PodId& m : group->member_ids) {
        if (state.has_pod(m) && state.pod(m).state == PodState::Pending) total += state.pod(m).requests;
    }
    return total;
}

std::optional<PodId> next_pod(const PendingQueues& queues, const ClusterState& state) {
    const Resources capacity = state.total_capacity();
    struct Candidate {
        int priority;
        double share;
        std::uint64_t seq;
        PodId pod;
    };
    std::optional<Candidate> best;
    for (const QueueId& qid : queues.queue_ids()) {
        auto head = queues.head(qid);
        if (!head) continue;
        const Pod& pod = state.pod(*head);
        const QueueSpec& spec = queues.spec(qid);
        if (!quota_admit(spec, queues.usage(qid), admission_demand(pod, state))) continue;
        // Usage only comes from pods bound on live nodes, so it never exceeds capacity.
        const double share = dominant_share(queues.usage(qid), capacity) / spec.weight;
        Candidate c{pod.priority, share, queues.sequence(*head), *head};
        if (!best) {
            best = c;
            continue;
        }
        if (c.priority != best->priority) {
            if (c.priority > best->priority) best = c;
            continue;
        }
        if (c.share != best->share) {
            if (c.share < best->share) best = c;
            continue;
        }
        if (c.seq < best->seq) best = c;
    }
    if (!best) return std::nullopt;
    return best->pod;
}

std::vector<PodId> pending_members(const PodGroup& group, const ClusterState& state) {
    std::vector<PodId> out;
    for (const PodId& m : group.member_ids) {
        if (state.has_pod(m) && state.pod(m).state == PodState::Pending) out.push_back(m);
    }
    std::sort(out.begin(), out.end(), [&state](const PodId& a, const PodId& b) {
        const auto ga = state.pod(a).requests.gpu;
        const auto gb = state.pod(b).requests.gpu;
        if (ga != gb) return ga > gb;
        return a < b;
    });
    return out;
}

namespace {

int bound_members(const PodGroup& group, const ClusterState& state) {
    int n = 0;
    for (const PodId& m : group.member_ids) {
        if (state.node_of(m)) ++n;
    }
    return n;
}

// Everything about a node that the non-affinity predicates can observe.
using NodeSignature = std::tuple<std::int64_t, std::int64_t, std::int64_t, int, std::set<std::string>, bool, bool, std::string,
                                 std::set<std::string>, std::vector<bool>>;

NodeSignature signature(const Node& node, const ClusterState& state) {
    std::set<std::string> vols;
    for (const PodId& pid : state.pods_on(node.id)) {
        for (const Volume& v : state.pod(pid).volumes) vols.insert(v.id);
    }
    const Resources& fr = state.free(node.id);
    return {fr.cpu,
            fr.memory,
            fr.gpu,
            node.max_pods - static_cast<int>(state.pods_on(node.id).size()),
            node.taints,
            node.memory_pressure,
            node.pid_pressure,
            node.labels.at("zone"),
            std::move(vols),
            state.gpu_free_mask(node.id)};
}

}  // namespace

std::optional<std::map<PodId, NodeId>> find_gang_placement(
    const PodGroup& group, ClusterState& state, const CandidateOrder& candidate_order) {
    const std::vector<PodId> members = pending_members(group, state);
    if (bound_members(group, state) + static_cast<int>(members.size()) < group.min_member) {
        return std::nullopt;
    }
    if (members.empty()) return std::map<PodId, NodeId>{};

    bool any_affinity = false;
    std::vector<Resources> suffix(members.size() + 1);
    for (std::size_t i = members.size(); i-- > 0;) {
        const Pod& p = state.pod(members[i]);
        any_affinity = any_affinity || !p.affinity.empty() || !p.anti_affinity.empty();
        suffix[i] = suffix[i + 1] + p.requests;
    }

    ClusterState::Transaction tx(state);
    std::map<PodId, NodeId> assignment;

    std::function<bool(std::size_t)> place = [&](std::size_t i) -> bool {
        if (i == members.size()) return true;
        Resources free_total;
        for (const auto& [nid, n] : state.nodes()) free_total += state.free(nid);
        if (!fits(suffix[i], free_total)) return false;

        const Pod& pod = state.pod(members[i]);
        std::vector<NodeId> order;
        if (candidate_order) {
            order = candidate_order(pod, state);
        } else {
            order = filter_feasible(pod, state);
        }
        std::set<NodeSignature> tried;
        for (const NodeId& nid : order) {
            const Node& node = state.node(nid);
            if (!is_feasible(pod, node, state)) continue;
            if (!any_affinity && !tried.insert(signature(node, state)).second) continue;
            tx.bind(pod.id, nid);
            assignment[pod.id] = nid;
            if (place(i + 1)) return true;
            assignment.erase(pod.id);
            tx.undo_last();
        }
        return false;
    };

    if (!place(0)) return std::nullopt;
    return assignment;
}

bool gang_ready(const PodGroup& group, const ClusterState& state) {
    ClusterState scratch = state;
    return find_gang_placement(group, scratch).has_value();
}

}  // namespace orchestra
