#include "orchestra/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace orchestra {

using nlohmann::json;

namespace {

// Strict view over one JSON object: every key must be consumed before finish().
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_, "expected an object");
    }

    [[nodiscard]] std::string at(const std::string& key) const { return path_ + "." + key; }
    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    const json* child(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const json& required(const std::string& key) {
        const json* c = child(key);
        if (c == nullptr) throw SchemaError(at(key), "missing required key '" + key + "'");
        return *c;
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const json* c = fallback ? child(key) : &required(key);
        if (c == nullptr) return *fallback;
        if (!c->is_number()) throw SchemaError(at(key), "expected a number");
        const double v = c->get<double>();
        if (!std::isfinite(v)) throw SchemaError(at(key), "expected a finite number");
        return v;
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
        const json* c = fallback ? child(key) : &required(key);
        if (c == nullptr) return *fallback;
        if (!c->is_number_integer()) throw SchemaError(at(key), "expected an integer");
        return c->get<std::int64_t>();
    }

    std::int64_t non_negative(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
        const std::int64_t v = integer(key, fallback);
        if (v < 0) throw SchemaError(at(key), "must be >= 0");
        return v;
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        const json* c = fallback ? child(key) : &required(key);
        if (c == nullptr) return *fallback;
        if (!c->is_string()) throw SchemaError(at(key), "expected a string");
        return c->get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* c = child(key);
        if (c == nullptr) return fallback;
        if (!c->is_boolean()) throw SchemaError(at(key), "expected a boolean");
        return c->get<bool>();
    }

    std::vector<std::string> strings(const std::string& key) {
        const json* c = child(key);
        if (c == nullptr) return {};
        if (!c->is_array()) throw SchemaError(at(key), "expected an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < c->size(); ++i) {
            if (!(*c)[i].is_string()) throw SchemaError(at(key) + "[" + std::to_string(i) + "]", "expected a string");
            out.push_back((*c)[i].get<std::string>());
        }
        return out;
    }

    Labels labels(const std::string& key) {
        const json* c = child(key);
        if (c == nullptr) return {};
        if (!c->is_object()) throw SchemaError(at(key), "expected an object of strings");
        Labels out;
        for (const auto& [k, v] : c->items()) {
            if (!v.is_string()) throw SchemaError(at(key) + "." + k, "expected a string");
            out[k] = v.get<std::string>();
        }
        return out;
    }

    /// Calls fn(element, path) for each entry of an optional array.
    template <typename Fn>
    void each(const std::string& key, Fn fn) {
        const json* c = child(key);
        if (c == nullptr) return;
        if (!c->is_array()) throw SchemaError(at(key), "expected an array");
        for (std::size_t i = 0; i < c->size(); ++i) fn((*c)[i], at(key) + "[" + std::to_string(i) + "]");
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) throw SchemaError(at(k), "unknown key '" + k + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

double positive(Reader& r, const std::string& key, std::optional<double> fallback = std::nullopt) {
    const double v = r.number(key, fallback);
    if (!(v > 0.0)) throw SchemaError(r.at(key), "must be > 0");
    return v;
}

double non_negative_number(Reader& r, const std::string& key, std::optional<double> fallback = std::nullopt) {
    const double v = r.number(key, fallback);
    if (v < 0.0) throw SchemaError(r.at(key), "must be >= 0");
    return v;
}

double fraction(Reader& r, const std::string& key, double fallback) {
    const double v = r.number(key, fallback);
    if (v < 0.0 || v > 1.0) throw SchemaError(r.at(key), "must be in [0, 1]");
    return v;
}

std::optional<GpuTopology> parse_gpu_topology(const json* j, const std::string& path, std::int64_t gpus) {
    if (j == nullptr) return std::nullopt;
    try {
        if (j->is_string()) {
            const auto name = j->get<std::string>();
            if (name == "none") return std::nullopt;
            return gpu_profile_by_name(name);
        }
        if (j->is_array()) {
            std::vector<std::vector<int>> links;
            for (const auto& row : *j) {
                if (!row.is_array()) throw SchemaError(path, "matrix rows must be arrays");
                std::vector<int> r;
                for (const auto& v : row) {
                    if (!v.is_number_integer()) throw SchemaError(path, "matrix entries must be integers");
                    r.push_back(v.get<int>());
                }
                links.push_back(std::move(r));
            }
            return GpuTopology("custom", std::move(links));
        }
    } catch (const SchemaError&) {
        throw;
    } catch (const ConfigError& e) {
        throw SchemaError(path, e.what());
    }
    (void)gpus;
    throw SchemaError(path, "expected \"v100\", \"a100\", \"none\" or a link matrix");
}

NodeGroupSpec parse_node_group(const json& j, const std::string& path) {
    Reader r(j, path);
    NodeGroupSpec g;
    g.name = r.string("name");
    g.count = static_cast<int>(r.non_negative("count"));
    g.capacity.cpu = r.non_negative("cpu");
    g.capacity.memory = r.non_negative("memory");
    g.capacity.gpu = r.non_negative("gpu", 0);
    g.max_pods = static_cast<int>(r.integer("max_pods", 110));
    if (g.max_pods <= 0) throw SchemaError(r.at("max_pods"), "must be > 0");
    g.gpu_topology = parse_gpu_topology(r.child("gpu_topology"), r.at("gpu_topology"), g.capacity.gpu);
    if (g.gpu_topology && g.gpu_topology->n_gpus() != g.capacity.gpu) {
        throw SchemaError(r.at("gpu_topology"), "topology size disagrees with gpu count");
    }
    auto zones = r.strings("zones");
    if (!zones.empty()) g.zones = std::move(zones);
    g.tors = r.strings("tors");
    for (auto& t : r.strings("taints")) g.taints.insert(std::move(t));
    g.labels = r.labels("labels");
    g.memory_pressure = r.boolean("memory_pressure", false);
    g.pid_pressure = r.boolean("pid_pressure", false);
    r.finish();
    return g;
}

AffinityTerm parse_term(const json& j, const std::string& path) {
    Reader r(j, path);
    AffinityTerm t;
    t.match_labels = r.labels("match_labels");
    if (t.match_labels.empty()) throw SchemaError(r.at("match_labels"), "needs at least one label");
    t.topology_key = r.string("topology_key", "");
    t.hard = r.boolean("hard", true);
    t.weight = static_cast<int>(r.integer("weight", 1));
    if (t.weight <= 0) throw SchemaError(r.at("weight"), "must be > 0");
    r.finish();
    return t;
}

PodTemplate parse_template(const json& j, const std::string& path) {
    Reader r(j, path);
    PodTemplate t;
    t.name = r.string("name");
    t.queue = r.string("queue", "default");
    t.priority = static_cast<int>(r.integer("priority", 0));
    t.requests.cpu = r.non_negative("cpu", 0);
    t.requests.memory = r.non_negative("memory", 0);
    t.requests.gpu = r.non_negative("gpu", 0);
    t.duration = positive(r, "duration", 60.0);
    const auto dist = r.string("duration_distribution", "fixed");
    if (dist != "fixed" && dist != "exponential") {
        throw SchemaError(r.at("duration_distribution"), "expected \"fixed\" or \"exponential\"");
    }
    t.exponential_duration = dist == "exponential";
    t.gang_size = static_cast<int>(r.integer("gang_size", 1));
    if (t.gang_size < 1) throw SchemaError(r.at("gang_size"), "must be >= 1");
    t.min_member = static_cast<int>(r.integer("min_member", 0));
    if (t.min_member < 0 || t.min_member > t.gang_size) {
        throw SchemaError(r.at("min_member"), "must be in [0, gang_size]");
    }
    t.labels = r.labels("labels");
    for (auto& s : r.strings("tolerations")) t.tolerations.insert(std::move(s));
    r.each("volumes", [&](const json& v, const std::string& p) {
        Reader vr(v, p);
        Volume vol;
        vol.id = vr.string("id");
        if (vr.has("zone")) vol.zone = vr.string("zone");
        vr.finish();
        t.volumes.push_back(std::move(vol));
    });
    r.each("affinity", [&](const json& v, const std::string& p) { t.affinity.push_back(parse_term(v, p)); });
    r.each("anti_affinity", [&](const json& v, const std::string& p) { t.anti_affinity.push_back(parse_term(v, p)); });
    if (r.has("spread_key")) t.spread_key = r.string("spread_key");
    r.finish();
    return t;
}

ArrivalPhase parse_phase(const json& j, const std::string& path) {
    Reader r(j, path);
    ArrivalPhase p;
    p.start = non_negative_number(r, "start");
    p.end = non_negative_number(r, "end");
    if (p.end < p.start) throw SchemaError(r.at("end"), "must be >= start");
    p.rate = non_negative_number(r, "rate");
    if (const json* mix = r.child("mix")) {
        if (!mix->is_object()) throw SchemaError(r.at("mix"), "expected an object of weights");
        for (const auto& [k, v] : mix->items()) {
            if (!v.is_number() || v.get<double>() < 0.0) throw SchemaError(r.at("mix") + "." + k, "expected a weight >= 0");
            p.mix[k] = v.get<double>();
        }
    }
    r.finish();
    return p;
}

ServiceSpec parse_service(const json& j, const std::string& path) {
    Reader r(j, path);
    ServiceSpec s;
    s.name = r.string("name");
    s.template_name = r.string("template");
    s.min_replicas = static_cast<int>(r.non_negative("min_replicas", 1));
    s.max_replicas = static_cast<int>(r.non_negative("max_replicas", 10));
    if (s.max_replicas < s.min_replicas) throw SchemaError(r.at("max_replicas"), "must be >= min_replicas");
    s.initial_replicas = static_cast<int>(r.non_negative("initial_replicas", s.min_replicas));
    s.target_cpu_utilization = positive(r, "target_cpu_utilization", 0.6);
    if (r.has("target_memory_utilization")) s.target_memory_utilization = positive(r, "target_memory_utilization");
    s.memory_per_cpu_utilization = non_negative_number(r, "memory_per_cpu_utilization", 1.0);
    s.capacity_per_replica = positive(r, "capacity_per_replica", 100.0);
    s.base_load = non_negative_number(r, "base_load", 0.0);
    r.each("load", [&](const json& v, const std::string& p) {
        Reader lr(v, p);
        LoadPhase l;
        l.start = non_negative_number(lr, "start");
        l.end = non_negative_number(lr, "end");
        if (l.end < l.start) throw SchemaError(lr.at("end"), "must be >= start");
        l.load = non_negative_number(lr, "load");
        lr.finish();
        s.load.push_back(l);
    });
    r.finish();
    return s;
}

CaConfig parse_ca(const json& j, const std::string& path) {
    Reader r(j, path);
    CaConfig c;
    c.enabled = r.boolean("enabled", true);
    c.node_group = r.string("node_group");
    c.scale_up_delay = non_negative_number(r, "scale_up_delay", c.scale_up_delay);
    c.scale_down_delay = non_negative_number(r, "scale_down_delay", c.scale_down_delay);
    c.scale_down_utilization = fraction(r, "scale_down_utilization", c.scale_down_utilization);
    c.provision_delay = non_negative_number(r, "provision_delay", c.provision_delay);
    c.min_nodes = static_cast<int>(r.non_negative("min_nodes", c.min_nodes));
    c.max_nodes = static_cast<int>(r.non_negative("max_nodes", c.max_nodes));
    if (c.max_nodes < c.min_nodes) throw SchemaError(r.at("max_nodes"), "must be >= min_nodes");
    r.finish();
    return c;
}

FailureSpec parse_failure(const json& j, const std::string& path) {
    Reader r(j, path);
    FailureSpec f;
    f.time = non_negative_number(r, "time");
    if (r.has("node")) f.node = r.string("node");
    if (r.has("zone")) f.zone = r.string("zone");
    if (f.node.has_value() == f.zone.has_value()) {
        throw SchemaError(path, "exactly one of 'node' or 'zone' is required");
    }
    if (r.has("recover_after")) f.recover_after = positive(r, "recover_after");
    r.finish();
    return f;
}

RlConfig parse_rl(const json& j, const std::string& path) {
    Reader r(j, path);
    RlConfig c;
    auto actions = r.strings("actions");
    if (r.has("actions")) {
        if (actions.empty()) throw SchemaError(r.at("actions"), "needs at least one action");
        c.actions = std::move(actions);
    }
    c.epsilon = fraction(r, "epsilon", c.epsilon);
    c.epsilon_decay = fraction(r, "epsilon_decay", c.epsilon_decay);
    c.epsilon_min = fraction(r, "epsilon_min", c.epsilon_min);
    c.alpha = fraction(r, "alpha", c.alpha);
    if (!(c.alpha > 0.0)) throw SchemaError(r.at("alpha"), "must be in (0, 1]");
    c.gamma = fraction(r, "gamma", c.gamma);
    if (c.gamma >= 1.0) throw SchemaError(r.at("gamma"), "must be in [0, 1)");
    if (r.has("forecast")) {
        try {
            c.forecast = forecast_kind_from_string(r.string("forecast"));
        } catch (const ConfigError& e) {
            throw SchemaError(r.at("forecast"), e.what());
        }
    }
    c.forecast_window = static_cast<int>(r.integer("forecast_window", c.forecast_window));
    if (c.forecast_window < 1) throw SchemaError(r.at("forecast_window"), "must be >= 1");
    c.forecast_alpha = fraction(r, "forecast_alpha", c.forecast_alpha);
    if (!(c.forecast_alpha > 0.0)) throw SchemaError(r.at("forecast_alpha"), "must be in (0, 1]");
    r.finish();
    return c;
}

}  // namespace

Node NodeGroupSpec::make_node(int index) const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", index);
    return make_node(name + "-" + buf, index);
}

Node NodeGroupSpec::make_node(const NodeId& id, int index) const {
    Node n;
    n.id = id;
    n.capacity = capacity;
    n.taints = taints;
    n.labels = labels;
    n.memory_pressure = memory_pressure;
    n.pid_pressure = pid_pressure;
    n.max_pods = max_pods;
    n.gpu_topology = gpu_topology;
    const std::size_t zi = static_cast<std::size_t>(index) % zones.size();
    n.labels["zone"] = zones[zi];
    if (tors.empty()) {
        n.labels["tor"] = zones[zi] + "-tor";
    } else {
        n.labels["tor"] = tors[static_cast<std::size_t>(index) % tors.size()];
    }
    n.labels["node-group"] = name;
    n.labels["hostname"] = id;
    return n;
}

const PodTemplate& WorkloadSpec::find_template(const std::string& name) const {
    for (const auto& t : templates) {
        if (t.name == name) return t;
    }
    throw ConfigError("unknown pod template '" + name + "'");
}

double ServiceSpec::load_at(double t) const {
    double value = base_load;
    for (const auto& p : load) {
        if (t >= p.start && t < p.end) value = p.load;
    }
    return value;
}

const NodeGroupSpec& Scenario::node_group(const std::string& group) const {
    for (const auto& g : node_groups) {
        if (g.name == group) return g;
    }
    throw ConfigError("unknown node group '" + group + "'");
}

const ScoreProfile& Scenario::score_profile(const std::string& profile_name) const {
    auto it = profiles.find(profile_name);
    if (it == profiles.end()) throw ConfigError("unknown score profile '" + profile_name + "'");
    return it->second;
}

void validate_scenario(const Scenario& s) {
    if (!(s.duration > 0.0)) throw SchemaError("$.duration", "must be > 0");
    if (!(s.metric_interval > 0.0)) throw SchemaError("$.metric_interval", "must be > 0");
    if (!(s.agent_interval > 0.0)) throw SchemaError("$.agent_interval", "must be > 0");

    std::set<std::string> groups;
    std::set<NodeId> node_ids;
    std::set<std::string> zones;
    for (std::size_t i = 0; i < s.node_groups.size(); ++i) {
        const auto& g = s.node_groups[i];
        const std::string path = "$.nodes[" + std::to_string(i) + "]";
        if (!groups.insert(g.name).second) throw SchemaError(path + ".name", "duplicate node group '" + g.name + "'");
        if (g.zones.empty()) throw SchemaError(path + ".zones", "needs at least one zone");
        for (int k = 0; k < g.count; ++k) {
            const Node n = g.make_node(k);
            node_ids.insert(n.id);
            zones.insert(n.labels.at("zone"));
        }
    }

    std::set<QueueId> queues;
    for (std::size_t i = 0; i < s.queues.size(); ++i) {
        if (!queues.insert(s.queues[i].id).second) {
            throw SchemaError("$.queues[" + std::to_string(i) + "].id", "duplicate queue '" + s.queues[i].id + "'");
        }
    }

    std::set<std::string> templates;
    for (std::size_t i = 0; i < s.workload.templates.size(); ++i) {
        const auto& t = s.workload.templates[i];
        const std::string path = "$.workload.templates[" + std::to_string(i) + "]";
        if (!templates.insert(t.name).second) throw SchemaError(path + ".name", "duplicate template '" + t.name + "'");
        if (!queues.contains(t.queue)) throw SchemaError(path + ".queue", "unknown queue '" + t.queue + "'");
    }
    for (std::size_t i = 0; i < s.workload.phases.size(); ++i) {
        for (const auto& [name, w] : s.workload.phases[i].mix) {
            if (!templates.contains(name)) {
                throw SchemaError("$.workload.phases[" + std::to_string(i) + "].mix." + name,
                                  "unknown template '" + name + "'");
            }
        }
        if (s.workload.phases[i].rate > 0.0 && s.workload.templates.empty()) {
            throw SchemaError("$.workload.phases[" + std::to_string(i) + "]", "arrivals need at least one template");
        }
    }
    for (std::size_t i = 0; i < s.workload.arrivals.size(); ++i) {
        if (!templates.contains(s.workload.arrivals[i].template_name)) {
            throw SchemaError("$.workload.arrivals[" + std::to_string(i) + "].template",
                              "unknown template '" + s.workload.arrivals[i].template_name + "'");
        }
    }
    std::set<std::string> services;
    for (std::size_t i = 0; i < s.services.size(); ++i) {
        const auto& svc = s.services[i];
        const std::string path = "$.services[" + std::to_string(i) + "]";
        if (!services.insert(svc.name).second) throw SchemaError(path + ".name", "duplicate service '" + svc.name + "'");
        if (!templates.contains(svc.template_name)) {
            throw SchemaError(path + ".template", "unknown template '" + svc.template_name + "'");
        }
        if (s.workload.find_template(svc.template_name).gang_size != 1) {
            throw SchemaError(path + ".template", "service replicas cannot be gang members");
        }
    }
    if (s.ca.enabled && !groups.contains(s.ca.node_group)) {
        throw SchemaError("$.autoscaler.ca.node_group", "unknown node group '" + s.ca.node_group + "'");
    }
    for (std::size_t i = 0; i < s.failures.size(); ++i) {
        const auto& f = s.failures[i];
        const std::string path = "$.failures[" + std::to_string(i) + "]";
        if (f.node && !node_ids.contains(*f.node)) throw SchemaError(path + ".node", "unknown node '" + *f.node + "'");
        if (f.zone && !zones.contains(*f.zone)) throw SchemaError(path + ".zone", "unknown zone '" + *f.zone + "'");
    }
    if (s.mode == PolicyMode::Static && !s.profiles.contains(s.profile)) {
        throw SchemaError("$.policy.profile", "unknown score profile '" + s.profile + "'");
    }
    for (std::size_t i = 0; i < s.rl.actions.size(); ++i) {
        if (!s.profiles.contains(s.rl.actions[i])) {
            throw SchemaError("$.rl.actions[" + std::to_string(i) + "]", "unknown score profile '" + s.rl.actions[i] + "'");
        }
    }
    if (s.mode == PolicyMode::RlEval && !s.policy_file) {
        throw SchemaError("$.policy.policy_file", "rl-eval needs a policy file");
    }
}

Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError("$", std::string("invalid JSON: ") + e.what());
    }
    Reader r(doc, "$");
    Scenario s;
    s.name = r.string("name", "scenario");
    s.seed = static_cast<std::uint64_t>(r.non_negative("seed", 0));
    s.duration = positive(r, "duration");
    s.metric_interval = positive(r, "metric_interval", 5.0);
    s.agent_interval = positive(r, "agent_interval", 10.0);

    r.each("nodes", [&](const json& j, const std::string& p) { s.node_groups.push_back(parse_node_group(j, p)); });
    if (!r.has("nodes")) throw SchemaError("$.nodes", "missing required key 'nodes'");

    if (const json* net = r.child("network")) {
        Reader nr(*net, "$.network");
        if (const json* cr = nr.child("convergence_ratio")) {
            if (!cr->is_object()) throw SchemaError("$.network.convergence_ratio", "expected an object");
            for (const auto& [tor, v] : cr->items()) {
                if (!v.is_number() || !(v.get<double>() > 0.0)) {
                    throw SchemaError("$.network.convergence_ratio." + tor, "expected a positive number");
                }
                s.convergence_ratio[tor] = v.get<double>();
            }
        }
        nr.finish();
    }

    r.each("queues", [&](const json& j, const std::string& p) {
        Reader qr(j, p);
        QueueSpec q;
        q.id = qr.string("id");
        constexpr std::int64_t kUnbounded = std::numeric_limits<std::int32_t>::max();
        if (const json* quota = qr.child("quota")) {
            Reader quota_r(*quota, qr.at("quota"));
            q.quota.cpu = quota_r.non_negative("cpu", kUnbounded);
            q.quota.memory = quota_r.non_negative("memory", kUnbounded);
            q.quota.gpu = quota_r.non_negative("gpu", kUnbounded);
            quota_r.finish();
        } else {
            q.quota = Resources{kUnbounded, kUnbounded, kUnbounded};
        }
        q.weight = positive(qr, "weight", 1.0);
        qr.finish();
        s.queues.push_back(std::move(q));
    });
    if (s.queues.empty()) {
        constexpr std::int64_t kUnbounded = std::numeric_limits<std::int32_t>::max();
        s.queues.push_back(QueueSpec{"default", Resources{kUnbounded, kUnbounded, kUnbounded}, 1.0});
    }

    s.profiles = builtin_profiles();
    r.each("profiles", [&](const json& j, const std::string& p) {
        Reader pr(j, p);
        const std::string name = pr.string("name");
        std::map<Scorer, double> weights;
        const json& w = pr.required("weights");
        if (!w.is_object()) throw SchemaError(pr.at("weights"), "expected an object");
        for (const auto& [k, v] : w.items()) {
            const std::string kp = pr.at("weights") + "." + k;
            if (!v.is_number()) throw SchemaError(kp, "expected a number");
            try {
                weights[scorer_from_string(k)] = v.get<double>();
            } catch (const ConfigError& e) {
                throw SchemaError(kp, e.what());
            }
        }
        pr.finish();
        try {
            s.profiles.insert_or_assign(name, ScoreProfile(name, std::move(weights)));
        } catch (const ConfigError& e) {
            throw SchemaError(pr.at("weights"), e.what());
        }
    });

    if (const json* wl = r.child("workload")) {
        Reader wr(*wl, "$.workload");
        wr.each("templates", [&](const json& j, const std::string& p) { s.workload.templates.push_back(parse_template(j, p)); });
        wr.each("phases", [&](const json& j, const std::string& p) { s.workload.phases.push_back(parse_phase(j, p)); });
        wr.each("arrivals", [&](const json& j, const std::string& p) {
            Reader ar(j, p);
            ScheduledArrival a;
            a.template_name = ar.string("template");
            a.time = non_negative_number(ar, "time");
            ar.finish();
            s.workload.arrivals.push_back(std::move(a));
        });
        wr.finish();
    }
    r.each("services", [&](const json& j, const std::string& p) { s.services.push_back(parse_service(j, p)); });

    if (const json* as = r.child("autoscaler")) {
        Reader ar(*as, "$.autoscaler");
        if (const json* hpa = ar.child("hpa")) {
            Reader hr(*hpa, "$.autoscaler.hpa");
            s.hpa_enabled = hr.boolean("enabled", true);
            hr.finish();
        }
        if (const json* ca = ar.child("ca")) s.ca = parse_ca(*ca, "$.autoscaler.ca");
        ar.finish();
    }
    r.each("failures", [&](const json& j, const std::string& p) { s.failures.push_back(parse_failure(j, p)); });

    if (const json* pol = r.child("policy")) {
        Reader pr(*pol, "$.policy");
        const std::string mode = pr.string("mode", "static");
        if (mode == "static") {
            s.mode = PolicyMode::Static;
        } else if (mode == "rl-train") {
            s.mode = PolicyMode::RlTrain;
        } else if (mode == "rl-eval") {
            s.mode = PolicyMode::RlEval;
        } else {
            throw SchemaError(pr.at("mode"), "expected \"static\", \"rl-train\" or \"rl-eval\"");
        }
        s.profile = pr.string("profile", s.profile);
        if (pr.has("policy_file")) {
            std::filesystem::path pf = pr.string("policy_file");
            if (pf.is_relative() && !base_dir.empty()) pf = base_dir / pf;
            s.policy_file = pf;
        }
        pr.finish();
    }
    if (const json* rl = r.child("rl")) s.rl = parse_rl(*rl, "$.rl");
    if (const json* rw = r.child("reward")) {
        Reader rr(*rw, "$.reward");
        s.reward.lambda = non_negative_number(rr, "lambda", s.reward.lambda);
        s.reward.delay_norm = positive(rr, "delay_norm", s.reward.delay_norm);
        rr.finish();
    }
    if (const json* sc = r.child("scheduler")) {
        Reader sr(*sc, "$.scheduler");
        s.scheduler.gang = sr.boolean("gang", true);
        s.scheduler.preemption = sr.boolean("preemption", true);
        s.scheduler.defragment_interval = non_negative_number(sr, "defragment_interval", 0.0);
        s.scheduler.defragment_on_gpu_unschedulable = sr.boolean("defragment_on_gpu_unschedulable", false);
        sr.finish();
    }
    r.finish();
    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read scenario file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.parent_path());
}

}  // namespace orchestra
