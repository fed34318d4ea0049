#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "orchestra/cluster.hpp"
#include "orchestra/topology.hpp"

namespace orchestra {

enum class Scorer { LeastRequested, BinPack, ZoneSpread, SoftAffinity, GpuTopology, TorAffinity };

inline constexpr std::array<Scorer, 6> kAllScorers = {
    Scorer::LeastRequested, Scorer::BinPack,     Scorer::ZoneSpread,
    Scorer::SoftAffinity,   Scorer::GpuTopology, Scorer::TorAffinity,
};

[[nodiscard]] std::string_view to_string(Scorer s) noexcept;
/// Inverse of to_string ("least_requested", "binpack", ...). Throws ConfigError.
[[nodiscard]] Scorer scorer_from_string(std::string_view name);

/// Named weight vector over scorers. Weights are >= 0 with at least one > 0.
class ScoreProfile {
public:
    ScoreProfile() = default;
    /// Throws ConfigError if the weights are invalid.
    ScoreProfile(std::string name, std::map<Scorer, double> weights);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] const std::map<Scorer, double>& weights() const noexcept { return weights_; }
    [[nodiscard]] double weight(Scorer s) const;

private:
    std::string name_;
    std::map<Scorer, double> weights_;
};

/// spread, binpack, topology and balanced.
[[nodiscard]] const std::map<std::string, ScoreProfile>& builtin_profiles();

// Individual scorers. Each returns a value in [0, 100].

/// Mean over cpu and memory of 100 * (free - request) / capacity.
[[nodiscard]] double least_requested_score(const Pod& pod, const Node& node, const ClusterState& state);
/// 100 - least_requested_score; favors fuller nodes.
[[nodiscard]] double binpack_score(const Pod& pod, const Node& node, const ClusterState& state);
/// 100 * (1 - same_set_in_domain / (1 + same_set_total)); 50 without a spread key.
[[nodiscard]] double zone_spread_score(const Pod& pod, const Node& node, const ClusterState& state);
/// Weighted share of soft terms satisfied on the node; 0 without soft terms.
[[nodiscard]] double soft_affinity_score(const Pod& pod, const Node& node, const ClusterState& state);
/// Achieved NVLink pair sum over the all-free optimum; 100 for k <= 1, 50 off-topology.
[[nodiscard]] double gpu_topology_score(const Pod& pod, const Node& node, const ClusterState& state);
/// 100 same ToR as a placed group member, 50 same zone, 0 otherwise; 50 for
/// ungrouped pods and for the first member of a group.
[[nodiscard]] double tor_affinity_score(const Pod& pod, const Node& node, const ClusterState& state,
                                        const NetworkTopology& network);

struct ScoringContext {
    const ClusterState& state;
    const NetworkTopology& network;
};

[[nodiscard]] double score(Scorer s, const Pod& pod, const Node& node, const ScoringContext& ctx);

struct RankedNode {
    NodeId node;
    double total = 0.0;

    friend bool operator==(const RankedNode&, const RankedNode&) = default;
};

/// Weighted totals, best first. Ties go to the ToR with the lower
/// convergence ratio, then to the smaller node id.
[[nodiscard]] std::vector<RankedNode> aggregate_and_rank(const Pod& pod, const std::vector<NodeId>& feasible,
                                                         const ScoreProfile& profile, const ClusterState& state);
[[nodiscard]] std::vector<RankedNode> aggregate_and_rank(const Pod& pod, const std::vector<NodeId>& feasible,
                                                         const ScoreProfile& profile, const ClusterState& state,
                                                         const NetworkTopology& network);

}  // namespace orchestra
