#include "orchestra/scoring.hpp"

#include "orchestra/predicates.hpp"

#include <algorithm>
#include <cmath>

namespace orchestra {

std::string_view to_string(Scorer s) noexcept {
    switch (s) {
        case Scorer::LeastRequested: return "least_requested";
        case Scorer::BinPack: return "binpack";
        case Scorer::ZoneSpread: return "zone_spread";
        case Scorer::SoftAffinity: return "soft_affinity";
        case Scorer::GpuTopology: return "gpu_topology";
        case Scorer::TorAffinity: return "tor_affinity";
    }
    return "?";
}

Scorer scorer_from_string(std::string_view name) {
    for (Scorer s : kAllScorers) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown scorer '" + std::string(name) + "'");
}

ScoreProfile::ScoreProfile(std::string name, std::map<Scorer, double> weights)
    : name_(std::move(name)), weights_(std::move(weights)) {
    bool any_positive = false;
    for (const auto& [s, w] : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ConfigError("profile '" + name_ + "': weight of " + std::string(to_string(s)) +
                              " must be finite and >= 0");
        }
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) {
        throw ConfigError("profile '" + name_ + "' needs at least one positive weight");
    }
}

double ScoreProfile::weight(Scorer s) const {
    auto it = weights_.find(s);
    return it == weights_.end() ? 0.0 : it->second;
}

const std::map<std::string, ScoreProfile>& builtin_profiles() {
    static const std::map<std::string, ScoreProfile> profiles = [] {
        std::map<std::string, ScoreProfile> m;
        auto add = [&m](ScoreProfile p) { m.emplace(p.name(), std::move(p)); };
        add(ScoreProfile("spread", {{Scorer::LeastRequested, 2.0},
                                    {Scorer::ZoneSpread, 1.0},
                                    {Scorer::SoftAffinity, 1.0}}));
        add(ScoreProfile("binpack", {{Scorer::BinPack, 2.0},
                                     {Scorer::SoftAffinity, 1.0},
                                     {Scorer::GpuTopology, 0.5}}));
        add(ScoreProfile("topology", {{Scorer::GpuTopology, 2.0},
                                      {Scorer::TorAffinity, 2.0},
                                      {Scorer::BinPack, 1.0},
                                      {Scorer::SoftAffinity, 1.0}}));
        add(ScoreProfile("balanced", {{Scorer::LeastRequested, 1.0},
                                      {Scorer::ZoneSpread, 1.0},
                                      {Scorer::SoftAffinity, 1.0},
                                      {Scorer::GpuTopology, 1.0},
                                      {Scorer::TorAffinity, 1.0}}));
        return m;
    }();
    return profiles;
}

namespace {

double headroom(std::int64_t free, std::int64_t request, std::int64_t capacity) {
    if (capacity <= 0) return 0.0;
    return 100.0 * static_cast<double>(free - request) / static_cast<double>(capacity);
}

bool in_spread_set(const Pod& pod, const Pod& other) {
    if (pod.group_id) return other.group_id == pod.group_id;
    return other.queue_id == pod.queue_id;
}

}  // namespace

double least_requested_score(const Pod& pod, const Node& node, const ClusterState& state) {
    const Resources& fr = state.free(node.id);
    const double cpu = headroom(fr.cpu, pod.requests.cpu, node.capacity.cpu);
    const double mem = headroom(fr.memory, pod.requests.memory, node.capacity.memory);
    return std::clamp((cpu + mem) / 2.0, 0.0, 100.0);
}

double binpack_score(const Pod& pod, const Node& node, const ClusterState& state) {
    return 100.0 - least_requested_score(pod, node, state);
}

double zone_spread_score(const Pod& pod, const Node& node, const ClusterState& state) {
    if (!pod.spread_topology_key) return 50.0;
    const std::string& key = *pod.spread_topology_key;
    auto value = node.label(key);
    if (!value) return 0.0;
    int in_domain = 0;
    int total = 0;
    for (const auto& [nid, other_node] : state.nodes()) {
        auto ov = other_node.label(key);
        const bool same = ov && *ov == *value;
        for (const PodId& pid : state.pods_on(nid)) {
            if (pid == pod.id) continue;
            if (!in_spread_set(pod, state.pod(pid))) continue;
            ++total;
            if (same) ++in_domain;
        }
    }
    return 100.0 * (1.0 - static_cast<double>(in_domain) / static_cast<double>(1 + total));
}

double soft_affinity_score(const Pod& pod, const Node& node, const ClusterState& state) {
    double weight_sum = 0.0;
    double hit = 0.0;
    for (const auto& term : pod.affinity) {
        if (term.hard) continue;
        weight_sum += term.weight;
        if (term_matches_in_scope(term, pod, node, state)) hit += term.weight;
    }
    for (const auto& term : pod.anti_affinity) {
        if (term.hard) continue;
        weight_sum += term.weight;
        if (!term_matches_in_scope(term, pod, node, state)) hit += term.weight;
    }
    if (weight_sum <= 0.0) return 0.0;
    return 100.0 * hit / weight_sum;
}

double gpu_topology_score(const Pod& pod, const Node& node, const ClusterState& state) {
    const std::int64_t k = pod.gpu_count();
    if (k == 0) return 50.0;
    if (!node.gpu_topology) {
        return k <= state.free(node.id).gpu ? 50.0 : 0.0;
    }
    const std::vector<bool> mask = state.gpu_free_mask(node.id);
    const auto free_count = std::count(mask.begin(), mask.end(), true);
    if (k > free_count) return 0.0;
    if (k <= 1) return 100.0;
    const GpuTopology& topo = *node.gpu_topology;
    const int best = max_pairwise_links(topo, static_cast<int>(k));
    if (best == 0) return 100.0;
    const int achieved = topo.pairwise_links(best_gpu_set(topo, mask, static_cast<int>(k)));
    return 100.0 * static_cast<double>(achieved) / static_cast<double>(best);
}

double tor_affinity_score(const Pod& pod, const Node& node, const ClusterState& state,
                          const NetworkTopology& network) {
    const auto& here = network.locate(node.id);
    if (!pod.group_id) return 50.0;
    const PodGroup* group = state.group(*pod.group_id);
    if (group == nullptr) return 50.0;
    bool any_placed = false;
    bool same_zone = false;
    for (const PodId& member : group->member_ids) {
        if (member == pod.id) continue;
        auto where = state.node_of(member);
        if (!where) continue;
        any_placed = true;
        const auto& loc = network.locate(*where);
        if (loc.tor == here.tor) return 100.0;
        if (loc.zone == here.zone) same_zone = true;
    }
    if (!any_placed) return 50.0;
    return same_zone ? 50.0 : 0.0;
}

double score(Scorer s, const Pod& pod, const Node& node, const ScoringContext& ctx) {
    switch (s) {
        case Scorer::LeastRequested: return least_requested_score(pod, node, ctx.state);
        case Scorer::BinPack: return binpack_score(pod, node, ctx.state);
        case Scorer::ZoneSpread: return zone_spread_score(pod, node, ctx.state);
        case Scorer::SoftAffinity: return soft_affinity_score(pod, node, ctx.state);
        case Scorer::GpuTopology: return gpu_topology_score(pod, node, ctx.state);
        case Scorer::TorAffinity: return tor_affinity_score(pod, node, ctx.state, ctx.network);
    }
    return 0.0;
}

std::vector<RankedNode> aggregate_and_rank(const Pod& pod, const std::vector<NodeId>& feasible,
                                           const ScoreProfile& profile, const ClusterState& state) {
    return aggregate_and_rank(pod, feasible, profile, state, state.network());
}

std::vector<RankedNode> aggregate_and_rank(const Pod& pod, const std::vector<NodeId>& feasible,
                                           const ScoreProfile& profile, const ClusterState& state,
                                           const NetworkTopology& network) {
    const ScoringContext ctx{state, network};
    struct Row {
        RankedNode ranked;
        double ratio;
    };
    std::vector<Row> rows;
    rows.reserve(feasible.size());
    for (const NodeId& id : feasible) {
        const Node& node = state.node(id);
        double total = 0.0;
        for (const auto& [s, w] : profile.weights()) {
            if (w > 0.0) total += w * score(s, pod, node, ctx);
        }
        rows.push_back({{id, total}, network.ratio(network.locate(id).tor)});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.ranked.total != b.ranked.total) return a.ranked.total > b.ranked.total;
        if (a.ratio != b.ratio) return a.ratio < b.ratio;
        return a.ranked.node < b.ranked.node;
    });
    std::vector<RankedNode> out;
    out.reserve(rows.size());
    for (auto& r : rows) out.push_back(std::move(r.ranked));
    return out;
}

}  // namespace orchestra
