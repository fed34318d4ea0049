#pragma once

// Builders, seeded generators and brute-force oracles shared by the unit and
// acceptance tests. The oracles recompute everything from pods() and nodes()
// and never call the predicate, scoring or search code they are checked against.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "orchestra/cluster.hpp"
#include "orchestra/predicates.hpp"
#include "orchestra/topology.hpp"

namespace testkit {

using namespace orchestra;

inline Node node(const std::string& id, Resources cap, const std::string& zone = "z1",
                 const std::string& tor = "") {
    Node n;
    n.id = id;
    n.capacity = cap;
    n.labels["zone"] = zone;
    n.labels["tor"] = tor.empty() ? zone + "-tor" : tor;
    n.labels["hostname"] = id;
    return n;
}

inline Pod pod(const std::string& id, Resources req, int priority = 0, const std::string& queue = "default") {
    Pod p;
    p.id = id;
    p.queue_id = queue;
    p.requests = req;
    p.priority = priority;
    p.duration = 10.0;
    return p;
}

/// Random integer in [lo, hi].
inline std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(v.size()) - 1))];
}

// ---------------------------------------------------------------------------
// Random predicate instances: up to 8 nodes and 16 pods, some already bound.

struct Instance {
    ClusterState state;
    std::vector<Pod> probes;  // unbound pods to test against every node
};

inline const std::vector<std::string>& label_values() {
    static const std::vector<std::string> v{"web", "cache", "db"};
    return v;
}

inline Pod random_pod(std::mt19937_64& rng, const std::string& id) {
    static const std::vector<std::string> taints{"gpu", "hot", "spot"};
    static const std::vector<std::string> zones{"z1", "z2", "z3"};
    static const std::vector<std::string> vols{"v1", "v2", "v3", "v4"};
    static const std::vector<std::string> keys{"", "zone", "tor"};
    Pod p = pod(id, {uniform(rng, 0, 4) * 500, uniform(rng, 0, 4) * 512, uniform(rng, 0, 2)},
                static_cast<int>(uniform(rng, 0, 3)));
    p.labels["app"] = pick(rng, label_values());
    for (const auto& t : taints) {
        if (coin(rng, 0.4)) p.tolerations.insert(t);
    }
    const auto nvol = uniform(rng, 0, 2);
    for (std::int64_t i = 0; i < nvol; ++i) {
        Volume v{pick(rng, vols), std::nullopt};
        if (coin(rng, 0.5)) v.zone = pick(rng, zones);
        p.volumes.push_back(v);
    }
    auto term = [&](bool anti) {
        AffinityTerm t;
        t.match_labels["app"] = pick(rng, label_values());
        t.topology_key = pick(rng, keys);
        t.hard = coin(rng, 0.7);
        t.weight = static_cast<int>(uniform(rng, 1, 3));
        (anti ? p.anti_affinity : p.affinity).push_back(t);
    };
    if (coin(rng, 0.3)) term(false);
    if (coin(rng, 0.3)) term(true);
    return p;
}

inline Instance random_instance(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    static const std::vector<std::string> taints{"gpu", "hot", "spot"};
    Instance inst;
    const auto n_nodes = uniform(rng, 0, 8);
    for (std::int64_t i = 0; i < n_nodes; ++i) {
        const std::string zone = "z" + std::to_string(uniform(rng, 1, 3));
        Node n = node("n" + std::to_string(i), {uniform(rng, 1, 4) * 1000, uniform(rng, 1, 4) * 1024, uniform(rng, 0, 4)},
                      zone, zone + "-t" + std::to_string(uniform(rng, 1, 2)));
        for (const auto& t : taints) {
            if (coin(rng, 0.2)) n.taints.insert(t);
        }
        n.memory_pressure = coin(rng, 0.1);
        n.pid_pressure = coin(rng, 0.1);
        n.max_pods = static_cast<int>(uniform(rng, 1, 4));
        inst.state.add_node(std::move(n));
    }
    const auto n_pods = uniform(rng, 1, 16);
    std::vector<NodeId> ids;
    for (const auto& [id, _] : inst.state.nodes()) ids.push_back(id);
    for (std::int64_t i = 0; i < n_pods; ++i) {
        Pod p = random_pod(rng, "p" + std::to_string(i));
        if (!ids.empty() && coin(rng, 0.6)) {
            // Background pods are bound directly: only capacity and max_pods are enforced by bind.
            inst.state.add_pod(p);
            try {
                inst.state.bind(p.id, pick(rng, ids));
            } catch (const BindError&) {
                inst.state.erase_pod(p.id);
            }
        } else {
            inst.probes.push_back(std::move(p));
        }
    }
    return inst;
}

// ---------------------------------------------------------------------------
// Predicate oracle.

/// Pods bound on a node, found by scanning every pod's placement.
inline std::vector<const Pod*> bound_on(const ClusterState& s, const NodeId& n) {
    std::vector<const Pod*> out;
    for (const auto& [id, p] : s.pods()) {
        if (s.node_of(id) == n) out.push_back(&p);
    }
    return out;
}

inline bool oracle_term_hit(const AffinityTerm& t, const Pod& pod, const Node& node, const ClusterState& s) {
    for (const auto& [nid, other] : s.nodes()) {
        bool in_scope = false;
        if (t.topology_key.empty()) {
            in_scope = nid == node.id;
        } else {
            auto a = node.labels.find(t.topology_key);
            auto b = other.labels.find(t.topology_key);
            in_scope = a != node.labels.end() && b != other.labels.end() && a->second == b->second;
        }
        if (!in_scope) continue;
        for (const Pod* q : bound_on(s, nid)) {
            if (q->id == pod.id) continue;
            bool all = true;
            for (const auto& [k, v] : t.match_labels) {
                auto it = q->labels.find(k);
                all = all && it != q->labels.end() && it->second == v;
            }
            if (all) return true;
        }
    }
    return false;
}

/// The eight checks, written straight from their definitions.
inline bool oracle_feasible(const Pod& pod, const Node& node, const ClusterState& s) {
    const auto on = bound_on(s, node.id);
    Resources used;
    for (const Pod* q : on) used += q->requests;
    // GeneralPredicates
    if (used.cpu + pod.requests.cpu > node.capacity.cpu) return false;
    if (used.memory + pod.requests.memory > node.capacity.memory) return false;
    if (used.gpu + pod.requests.gpu > node.capacity.gpu) return false;
    if (static_cast<int>(on.size()) >= node.max_pods) return false;
    // NoDiskConflict
    for (const Pod* q : on) {
        for (const auto& a : q->volumes) {
            for (const auto& b : pod.volumes) {
                if (a.id == b.id) return false;
            }
        }
    }
    // CheckVolumeBinding / NoVolumeZoneConflict
    for (const auto& v : pod.volumes) {
        if (v.zone && *v.zone != node.labels.at("zone")) return false;
    }
    // Memory and PID pressure
    if (node.memory_pressure || node.pid_pressure) return false;
    // Taints
    for (const auto& t : node.taints) {
        if (!pod.tolerations.contains(t)) return false;
    }
    // Inter-pod affinity
    for (const auto& t : pod.affinity) {
        if (t.hard && !oracle_term_hit(t, pod, node, s)) return false;
    }
    for (const auto& t : pod.anti_affinity) {
        if (t.hard && oracle_term_hit(t, pod, node, s)) return false;
    }
    return true;
}

inline std::vector<NodeId> oracle_filter(const Pod& pod, const ClusterState& s) {
    std::vector<NodeId> out;
    for (const auto& [id, n] : s.nodes()) {
        if (oracle_feasible(pod, n, s)) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// GPU subset oracle.

/// Every k-subset of the free GPUs, in lexicographic order.
inline std::vector<std::vector<int>> free_subsets(const std::vector<bool>& mask, int k) {
    std::vector<std::vector<int>> out;
    const int n = static_cast<int>(mask.size());
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        if (std::popcount(bits) != k) continue;
        std::vector<int> set;
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            if (bits & (1u << i)) {
                ok = ok && mask[static_cast<std::size_t>(i)];
                set.push_back(i);
            }
        }
        if (ok) out.push_back(set);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline int oracle_links(const std::vector<std::vector<int>>& m, const std::vector<int>& set) {
    int sum = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = i + 1; j < set.size(); ++j) {
            sum += m[static_cast<std::size_t>(set[i])][static_cast<std::size_t>(set[j])];
        }
    }
    return sum;
}

/// Best free k-subset by link sum, ties to the lexicographically smallest.
inline std::vector<int> oracle_best_set(const std::vector<std::vector<int>>& m, const std::vector<bool>& mask, int k) {
    std::vector<int> best;
    int best_sum = -1;
    for (const auto& s : free_subsets(mask, k)) {
        const int v = oracle_links(m, s);
        if (v > best_sum) {
            best_sum = v;
            best = s;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Gang assignment oracle: try every member -> node map and check each pod's
// static predicates plus combined capacity and pod slots.

inline bool oracle_gang_fits(const std::vector<Pod>& members, const ClusterState& s) {
    std::vector<NodeId> ids;
    for (const auto& [id, _] : s.nodes()) ids.push_back(id);
    if (members.empty()) return true;
    if (ids.empty()) return false;
    const std::size_t m = members.size();
    std::vector<std::size_t> choice(m, 0);
    while (true) {
        std::map<NodeId, std::vector<const Pod*>> extra;
        for (std::size_t i = 0; i < m; ++i) extra[ids[choice[i]]].push_back(&members[i]);
        bool ok = true;
        for (const auto& [nid, pods] : extra) {
            const Node& n = s.node(nid);
            const auto on = bound_on(s, nid);
            Resources used;
            for (const Pod* q : on) used += q->requests;
            for (const Pod* q : pods) used += q->requests;
            ok = ok && used.cpu <= n.capacity.cpu && used.memory <= n.capacity.memory && used.gpu <= n.capacity.gpu &&
                 static_cast<int>(on.size() + pods.size()) <= n.max_pods && !n.memory_pressure && !n.pid_pressure;
            for (const Pod* q : pods) {
                for (const auto& t : n.taints) ok = ok && q->tolerations.contains(t);
            }
        }
        if (ok) return true;
        std::size_t i = 0;
        while (i < m && ++choice[i] == ids.size()) choice[i++] = 0;
        if (i == m) return false;
    }
}

// ---------------------------------------------------------------------------
// Preemption oracle: cheapest (victim count, priority sum, node id) over all
// subsets of strictly-lower-priority pods on each node, closed under groups.

struct OraclePlan {
    NodeId node;
    std::size_t count = 0;
    long long priority_sum = 0;
};

inline std::optional<OraclePlan> oracle_preempt(const Pod& pod, const ClusterState& s) {
    std::optional<OraclePlan> best;
    for (const auto& [nid, n] : s.nodes()) {
        std::vector<const Pod*> lower;
        for (const Pod* q : bound_on(s, nid)) {
            if (q->priority < pod.priority) lower.push_back(q);
        }
        for (std::uint32_t bits = 1; bits < (1u << lower.size()); ++bits) {
            std::set<PodId> victims;
            for (std::size_t i = 0; i < lower.size(); ++i) {
                if (bits & (1u << i)) victims.insert(lower[i]->id);
            }
            std::set<PodId> closed = victims;
            for (const PodId& v : victims) {
                const Pod& q = s.pod(v);
                if (!q.group_id) continue;
                for (const auto& [oid, other] : s.pods()) {
                    if (other.group_id == q.group_id && s.node_of(oid)) closed.insert(oid);
                }
            }
            bool lower_only = true;
            for (const PodId& v : closed) lower_only = lower_only && s.pod(v).priority < pod.priority;
            if (!lower_only) continue;
            ClusterState scratch = s;
            for (const PodId& v : closed) scratch.release(v, PodState::Preempted);
            if (!oracle_feasible(pod, scratch.node(nid), scratch)) continue;
            long long sum = 0;
            for (const PodId& v : closed) sum += s.pod(v).priority;
            OraclePlan plan{nid, closed.size(), sum};
            if (!best || std::tie(plan.count, plan.priority_sum, plan.node) <
                             std::tie(best->count, best->priority_sum, best->node)) {
                best = plan;
            }
        }
    }
    return best;
}

}  // namespace testkit
