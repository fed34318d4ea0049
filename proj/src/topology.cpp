#include "orchestra/topology.hpp"

#include <functional>
#include <numeric>
#include <stdexcept>

namespace orchestra {

GpuTopology::GpuTopology(std::string name, std::vector<std::vector<int>> links)
    : name_(std::move(name)), links_(std::move(links)) {
    const std::size_t n = links_.size();
    if (n == 0) {
        throw ConfigError("gpu topology '" + name_ + "' has no GPUs");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (links_[i].size() != n) {
            throw ConfigError("gpu topology '" + name_ + "' is not square");
        }
        if (links_[i][i] != 0) {
            throw ConfigError("gpu topology '" + name_ + "' has a nonzero diagonal");
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (links_[i][j] < 0) {
                throw ConfigError("gpu topology '" + name_ + "' has a negative link count");
            }
            if (links_[i][j] != links_[j][i]) {
                throw ConfigError("gpu topology '" + name_ + "' is not symmetric");
            }
        }
    }
}

int GpuTopology::nvlink_links(int gpu_a, int gpu_b) const {
    if (gpu_a < 0 || gpu_b < 0 || gpu_a >= n_gpus() || gpu_b >= n_gpus()) {
        throw std::out_of_range("gpu index out of range for topology '" + name_ + "'");
    }
    return links_[gpu_a][gpu_b];
}

int GpuTopology::pairwise_links(const std::vector<int>& gpus) const {
    int sum = 0;
    for (std::size_t i = 0; i < gpus.size(); ++i) {
        for (std::size_t j = i + 1; j < gpus.size(); ++j) {
            sum += nvlink_links(gpus[i], gpus[j]);
        }
    }
    return sum;
}

bool GpuTopology::satisfies_v100_limits() const {
    for (const auto& row : links_) {
        int total = 0;
        for (int c : row) {
            if (c > 2) return false;
            total += c;
        }
        if (total > 6) return false;
    }
    return true;
}

namespace {

// Hybrid cube-mesh completion of the DGX-1 wiring. Every GPU has exactly six
// channels; row 0 is fixed by the published GPU0 connectivity.
const std::vector<std::vector<int>> kV100Links = {
    // 0  1  2  3  4  5  6  7
    {0, 1, 1, 2, 2, 0, 0, 0},
    {1, 0, 2, 1, 0, 2, 0, 0},
    {1, 2, 0, 2, 0, 0, 1, 0},
    {2, 1, 2, 0, 0, 0, 0, 1},
    {2, 0, 0, 0, 0, 1, 1, 2},
    {0, 2, 0, 0, 1, 0, 2, 1},
    {0, 0, 1, 0, 1, 2, 0, 2},
    {0, 0, 0, 1, 2, 1, 2, 0},
};

std::vector<std::vector<int>> uniform_links(int n, int count) {
    std::vector<std::vector<int>> m(n, std::vector<int>(n, count));
    for (int i = 0; i < n; ++i) m[i][i] = 0;
    return m;
}

}  // namespace

const GpuTopology& v100_profile() {
    static const GpuTopology topo("v100", kV100Links);
    return topo;
}

const GpuTopology& a100_profile() {
    static const GpuTopology topo("a100", uniform_links(8, kA100PairLinks));
    return topo;
}

GpuTopology gpu_profile_by_name(const std::string& name) {
    if (name == "v100") return v100_profile();
    if (name == "a100") return a100_profile();
    throw ConfigError("unknown gpu topology profile '" + name + "'");
}

std::vector<int> best_gpu_set(const GpuTopology& topology, const std::vector<bool>& free_mask, int k) {
    if (static_cast<int>(free_mask.size()) != topology.n_gpus()) {
        throw std::invalid_argument("free mask size does not match topology");
    }
    std::vector<int> free;
    for (int i = 0; i < topology.n_gpus(); ++i) {
        if (free_mask[i]) free.push_back(i);
    }
    if (k < 0 || k > static_cast<int>(free.size())) {
        throw InsufficientGpus("need " + std::to_string(k) + " GPUs, " + std::to_string(free.size()) +
                               " free");
    }
    if (k == 0) return {};

    // Lexicographic enumeration keeps the first maximum, which is the
    // lexicographically smallest among ties.
    std::vector<int> best;
    int best_sum = -1;
    std::vector<int> pick;
    pick.reserve(k);
    std::function<void(std::size_t, int)> rec = [&](std::size_t start, int partial) {
        if (static_cast<int>(pick.size()) == k) {
            if (partial > best_sum) {
                best_sum = partial;
                best = pick;
            }
            return;
        }
        const std::size_t remaining = static_cast<std::size_t>(k) - pick.size();
        for (std::size_t i = start; i + remaining <= free.size(); ++i) {
            int add = 0;
            for (int p : pick) add += topology.links()[p][free[i]];
            pick.push_back(free[i]);
            rec(i + 1, partial + add);
            pick.pop_back();
        }
    };
    rec(0, 0);
    return best;
}

int max_pairwise_links(const GpuTopology& topology, int k) {
    const std::vector<bool> all(topology.n_gpus(), true);
    return topology.pairwise_links(best_gpu_set(topology, all, k));
}

void NetworkTopology::add_node(const std::string& node_id, const std::string& zone,
                               const std::string& tor) {
    if (nodes_.contains(node_id)) {
        throw ConfigError("node '" + node_id + "' placed twice in the network tree");
    }
    if (auto it = tor_zone_.find(tor); it != tor_zone_.end() && it->second != zone) {
        throw ConfigError("ToR '" + tor + "' appears under zones '" + it->second + "' and '" + zone + "'");
    }
    tor_zone_[tor] = zone;
    tree_[zone][tor].insert(node_id);
    nodes_[node_id] = Location{zone, tor};
}

void NetworkTopology::set_convergence_ratio(const std::string& tor, double ratio) {
    if (!(ratio > 0.0)) {
        throw ConfigError("convergence ratio of '" + tor + "' must be positive");
    }
    ratio_[tor] = ratio;
}

const NetworkTopology::Location& NetworkTopology::locate(const std::string& node_id) const {
    auto it = nodes_.find(node_id);
    if (it == nodes_.end()) {
        throw ConfigError("node '" + node_id + "' is not in the network tree");
    }
    return it->second;
}

double NetworkTopology::ratio(const std::string& tor) const {
    auto it = ratio_.find(tor);
    return it == ratio_.end() ? 1.0 : it->second;
}

}  // namespace orchestra
