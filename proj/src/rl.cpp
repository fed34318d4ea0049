#include "orchestra/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace orchestra {

using nlohmann::json;

const char* to_string(Trend t) noexcept {
    switch (t) {
        case Trend::Down: return "down";
        case Trend::Flat: return "flat";
        case Trend::Up: return "up";
    }
    return "?";
}

DiscreteState DiscreteState::from_index(int index) {
    if (index < 0 || index >= kCount) throw std::out_of_range("discrete state index out of range");
    DiscreteState s;
    s.trend = static_cast<Trend>(index % 3);
    s.pending_bucket = (index / 3) % 4;
    s.utilization_bucket = index / 12;
    return s;
}

std::string DiscreteState::label() const {
    return "u" + std::to_string(utilization_bucket) + "-p" + std::to_string(pending_bucket) + "-" +
           to_string(trend);
}

int utilization_bucket(double utilization) noexcept {
    if (!(utilization > 0.0)) return 0;
    return std::min(9, static_cast<int>(std::floor(utilization * 10.0)));
}

int pending_bucket(std::size_t pending) noexcept {
    if (pending == 0) return 0;
    if (pending <= 5) return 1;
    if (pending <= 20) return 2;
    return 3;
}

Trend classify_trend(double forecast, double current) noexcept {
    if (forecast > current * 1.1) return Trend::Up;
    if (forecast < current * 0.9) return Trend::Down;
    return Trend::Flat;
}

DiscreteState featurize_state(const ClusterState& state, const PendingQueues& queues, double forecast,
                              double current) {
    const Resources cap = state.total_capacity();
    const Resources used = state.total_used();
    const double util = cap.cpu > 0 ? static_cast<double>(used.cpu) / static_cast<double>(cap.cpu) : 0.0;
    return DiscreteState{utilization_bucket(util), pending_bucket(queues.size()), classify_trend(forecast, current)};
}

PolicyState::PolicyState(std::vector<std::string> actions, double epsilon, double alpha, double gamma)
    : actions_(std::move(actions)), alpha_(alpha), gamma_(gamma) {
    if (actions_.empty()) throw ConfigError("policy needs at least one action");
    set_epsilon(epsilon);
    if (!(alpha_ > 0.0 && alpha_ <= 1.0)) throw ConfigError("alpha must be in (0, 1]");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ConfigError("gamma must be in [0, 1)");
    q_.assign(static_cast<std::size_t>(DiscreteState::kCount) * actions_.size(), 0.0);
}

void PolicyState::set_epsilon(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must be in [0, 1]");
    epsilon_ = epsilon;
}

double PolicyState::q(const DiscreteState& s, std::size_t action) const {
    return q_.at(static_cast<std::size_t>(s.index()) * actions_.size() + action);
}

void PolicyState::set_q(const DiscreteState& s, std::size_t action, double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("q-values must be finite");
    q_.at(static_cast<std::size_t>(s.index()) * actions_.size() + action) = value;
}

double PolicyState::max_q(const DiscreteState& s) const {
    return q(s, greedy(s));
}

std::size_t PolicyState::greedy(const DiscreteState& s) const {
    std::size_t best = 0;
    for (std::size_t a = 1; a < actions_.size(); ++a) {
        if (q(s, a) > q(s, best)) best = a;
    }
    return best;
}

std::size_t select_action(const PolicyState& policy, const DiscreteState& s, Rng& rng) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < policy.epsilon()) {
        std::uniform_int_distribution<std::size_t> pick(0, policy.num_actions() - 1);
        return pick(rng);
    }
    return policy.greedy(s);
}

void q_update(PolicyState& policy, const DiscreteState& s, std::size_t action, double reward,
              const std::optional<DiscreteState>& next) {
    if (!std::isfinite(reward)) throw std::invalid_argument("reward must be finite");
    const double bootstrap = next ? policy.max_q(*next) : 0.0;
    const double old = policy.q(s, action);
    policy.set_q(s, action, old + policy.alpha() * (reward + policy.gamma() * bootstrap - old));
}

double compute_reward(std::span<const TickSample> window, const RewardConfig& config) {
    if (window.empty()) throw std::invalid_argument("reward window is empty");
    if (!(config.delay_norm > 0.0)) throw std::invalid_argument("delay_norm must be positive");
    double util = 0.0;
    double delay = 0.0;
    for (const auto& t : window) {
        util += t.cpu_utilization;
        delay += t.mean_pending_delay;
    }
    const double n = static_cast<double>(window.size());
    return util / n - config.lambda * (delay / n) / config.delay_norm;
}

std::string serialize_policy(const PolicyState& policy) {
    json doc;
    doc["format"] = "orchestra-policy";
    doc["version"] = kPolicyFormatVersion;
    doc["actions"] = policy.actions();
    doc["epsilon"] = policy.epsilon();
    doc["alpha"] = policy.alpha();
    doc["gamma"] = policy.gamma();
    json q = json::object();
    for (int i = 0; i < DiscreteState::kCount; ++i) {
        const DiscreteState s = DiscreteState::from_index(i);
        json row = json::array();
        for (std::size_t a = 0; a < policy.num_actions(); ++a) row.push_back(policy.q(s, a));
        q[s.label()] = std::move(row);
    }
    doc["q"] = std::move(q);
    return doc.dump(2) + "\n";
}

PolicyState parse_policy(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("policy file is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "orchestra-policy") {
            throw ConfigError("not an orchestra policy file");
        }
        if (doc.at("version").get<int>() != kPolicyFormatVersion) {
            throw ConfigError("unsupported policy version " + doc.at("version").dump());
        }
        PolicyState policy(doc.at("actions").get<std::vector<std::string>>(), doc.at("epsilon").get<double>(),
                           doc.at("alpha").get<double>(), doc.at("gamma").get<double>());
        const json& q = doc.at("q");
        for (int i = 0; i < DiscreteState::kCount; ++i) {
            const DiscreteState s = DiscreteState::from_index(i);
            auto it = q.find(s.label());
            if (it == q.end()) continue;
            const auto row = it->get<std::vector<double>>();
            if (row.size() != policy.num_actions()) {
                throw ConfigError("q row '" + s.label() + "' has the wrong number of actions");
            }
            for (std::size_t a = 0; a < row.size(); ++a) policy.set_q(s, a, row[a]);
        }
        return policy;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed policy file: ") + e.what());
    }
}

void save_policy(const PolicyState& policy, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write policy file " + path.string());
    out << serialize_policy(policy);
    if (!out) throw IoError("failed writing policy file " + path.string());
}

PolicyState load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read policy file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_policy(ss.str());
}

}  // namespace orchestra
