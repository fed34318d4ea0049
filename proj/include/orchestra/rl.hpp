#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "orchestra/queueing.hpp"

namespace orchestra {

enum class Trend { Down, Flat, Up };

[[nodiscard]] const char* to_string(Trend t) noexcept;

/// Discretized cluster condition the agent conditions on: 10 utilization
/// deciles x 4 pending-count bands x 3 trends = 120 states.
struct DiscreteState {
    int utilization_bucket = 0;  // 0..9
    int pending_bucket = 0;      // 0: none, 1: 1-5, 2: 6-20, 3: >20
    Trend trend = Trend::Flat;

    static constexpr int kCount = 10 * 4 * 3;

    [[nodiscard]] int index() const noexcept {
        return (utilization_bucket * 4 + pending_bucket) * 3 + static_cast<int>(trend);
    }
    [[nodiscard]] static DiscreteState from_index(int index);
    [[nodiscard]] std::string label() const;

    friend bool operator==(const DiscreteState&, const DiscreteState&) = default;
};

[[nodiscard]] int utilization_bucket(double utilization) noexcept;
[[nodiscard]] int pending_bucket(std::size_t pending) noexcept;
/// Up above current * 1.1, down below current * 0.9, flat otherwise.
[[nodiscard]] Trend classify_trend(double forecast, double current) noexcept;

/// Buckets cluster CPU utilization, pending-pod count and forecast trend.
[[nodiscard]] DiscreteState featurize_state(const ClusterState& state, const PendingQueues& queues,
                                            double forecast, double current);

/// Tabular action values over DiscreteState x score-profile actions.
class PolicyState {
public:
    PolicyState() = default;
    /// Throws ConfigError on empty actions or out-of-range hyperparameters.
    PolicyState(std::vector<std::string> actions, double epsilon, double alpha, double gamma);

    [[nodiscard]] const std::vector<std::string>& actions() const noexcept { return actions_; }
    [[nodiscard]] std::size_t num_actions() const noexcept { return actions_.size(); }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    void set_epsilon(double epsilon);

    [[nodiscard]] double q(const DiscreteState& s, std::size_t action) const;
    void set_q(const DiscreteState& s, std::size_t action, double value);
    [[nodiscard]] double max_q(const DiscreteState& s) const;
    /// argmax_a q(s, a), ties to the lowest index.
    [[nodiscard]] std::size_t greedy(const DiscreteState& s) const;

    [[nodiscard]] const std::vector<double>& table() const noexcept { return q_; }

    friend bool operator==(const PolicyState&, const PolicyState&) = default;

private:
    std::vector<std::string> actions_;
    double epsilon_ = 0.0;
    double alpha_ = 0.1;
    double gamma_ = 0.9;
    std::vector<double> q_;
};

using Rng = std::mt19937_64;

/// Epsilon-greedy choice. Draws one uniform number, plus one more when exploring.
[[nodiscard]] std::size_t select_action(const PolicyState& policy, const DiscreteState& s, Rng& rng);

/// One-step Q-learning update. `next` = nullopt treats the transition as
/// terminal. Throws std::invalid_argument for a non-finite reward.
void q_update(PolicyState& policy, const DiscreteState& s, std::size_t action, double reward,
              const std::optional<DiscreteState>& next);

struct RewardConfig {
    double lambda = 0.5;
    double delay_norm = 60.0;  // simulated seconds
};

/// One metrics tick as seen by the reward.
struct TickSample {
    double cpu_utilization = 0.0;
    double mean_pending_delay = 0.0;  // seconds
};

/// mean(cpu utilization) - lambda * mean(pending delay) / delay_norm.
/// Throws std::invalid_argument on an empty window.
[[nodiscard]] double compute_reward(std::span<const TickSample> window, const RewardConfig& config = {});

inline constexpr int kPolicyFormatVersion = 1;

[[nodiscard]] std::string serialize_policy(const PolicyState& policy);
/// Throws ConfigError on a malformed document or version mismatch.
[[nodiscard]] PolicyState parse_policy(const std::string& text);
void save_policy(const PolicyState& policy, const std::filesystem::path& path);
[[nodiscard]] PolicyState load_policy(const std::filesystem::path& path);

}  // namespace orchestra
