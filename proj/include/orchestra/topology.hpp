#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "orchestra/resources.hpp"

namespace orchestra {

/// Intra-node GPU interconnect: symmetric matrix of NVLink channel counts.
/// A zero entry means the pair talks over PCIe only.
class GpuTopology {
public:
    GpuTopology() = default;
    /// Throws ConfigError unless `links` is square, symmetric, non-negative with a zero diagonal.
    GpuTopology(std::string name, std::vector<std::vector<int>> links);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] int n_gpus() const noexcept { return static_cast<int>(links_.size()); }
    [[nodiscard]] const std::vector<std::vector<int>>& links() const noexcept { return links_; }

    /// Channel count between two GPUs. Throws std::out_of_range on a bad index.
    [[nodiscard]] int nvlink_links(int gpu_a, int gpu_b) const;

    /// Sum of channel counts over all unordered pairs in `gpus`.
    [[nodiscard]] int pairwise_links(const std::vector<int>& gpus) const;

    /// Per-pair count <= 2 and per-GPU total <= 6 (the DGX-1 V100 wiring limits).
    [[nodiscard]] bool satisfies_v100_limits() const;

    friend bool operator==(const GpuTopology&, const GpuTopology&) = default;

private:
    std::string name_;
    std::vector<std::vector<int>> links_;
};

/// 8-GPU hybrid cube-mesh (DGX-1 V100). Row 0 is (1,1,2,2,0,0,0) to GPUs 1..7.
[[nodiscard]] const GpuTopology& v100_profile();

/// 8-GPU NVSwitch fabric (A100): every pair gets the same channel count.
[[nodiscard]] const GpuTopology& a100_profile();

/// Link count used between every A100 pair.
inline constexpr int kA100PairLinks = 12;

/// Looks up "v100" or "a100". Throws ConfigError otherwise.
[[nodiscard]] GpuTopology gpu_profile_by_name(const std::string& name);

class InsufficientGpus : public Error {
public:
    using Error::Error;
};

/// The free k-subset maximizing the pairwise link sum; ties go to the
/// lexicographically smallest index set. `free_mask[i]` marks GPU i free.
/// Throws InsufficientGpus when fewer than k GPUs are free.
[[nodiscard]] std::vector<int> best_gpu_set(const GpuTopology& topology,
                                            const std::vector<bool>& free_mask, int k);

/// Pairwise link sum of the best k-subset when every GPU is free.
[[nodiscard]] int max_pairwise_links(const GpuTopology& topology, int k);

/// zone -> ToR -> nodes, plus per-switch convergence ratios (lower is better).
class NetworkTopology {
public:
    struct Location {
        std::string zone;
        std::string tor;
    };

    /// Throws ConfigError if the node is already placed or the ToR sits in another zone.
    void add_node(const std::string& node_id, const std::string& zone, const std::string& tor);
    void set_convergence_ratio(const std::string& tor, double ratio);

    /// Throws ConfigError if the node is not in the tree.
    [[nodiscard]] const Location& locate(const std::string& node_id) const;
    [[nodiscard]] bool contains(const std::string& node_id) const { return nodes_.contains(node_id); }

    /// Ratio of a ToR switch, 1.0 when unconfigured.
    [[nodiscard]] double ratio(const std::string& tor) const;

    [[nodiscard]] const std::map<std::string, std::map<std::string, std::set<std::string>>>& tree()
        const noexcept {
        return tree_;
    }

private:
    std::map<std::string, std::map<std::string, std::set<std::string>>> tree_;
    std::map<std::string, std::string> tor_zone_;
    std::map<std::string, Location> nodes_;
    std::map<std::string, double> ratio_;
};

}  // namespace orchestra
