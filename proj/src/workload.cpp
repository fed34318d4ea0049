#include "orchestra/workload.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

namespace orchestra {

std::vector<Arrival> generate_workload(const WorkloadSpec& spec, std::uint64_t seed) {
    struct Draw {
        Arrival arrival;
        std::size_t phase;
    };
    std::mt19937_64 rng(seed);
    std::vector<Draw> draws;

    // Fixed arrivals sort ahead of every phase at equal times.
    for (const auto& a : spec.arrivals) {
        const std::size_t ti = static_cast<std::size_t>(&spec.find_template(a.template_name) - spec.templates.data());
        const PodTemplate& tmpl = spec.templates[ti];
        double duration = tmpl.duration;
        if (tmpl.exponential_duration) duration = std::exponential_distribution<double>(1.0 / tmpl.duration)(rng);
        draws.push_back(Draw{Arrival{a.time, ti, duration, 0}, 0});
    }
    const std::size_t phase_base = 1;

    for (std::size_t pi = 0; pi < spec.phases.size(); ++pi) {
        const ArrivalPhase& phase = spec.phases[pi];
        if (phase.rate < 0.0) throw ConfigError("arrival rate must be >= 0");
        if (phase.rate == 0.0 || phase.end <= phase.start) continue;
        if (spec.templates.empty()) throw ConfigError("arrivals need at least one pod template");

        std::vector<double> weights(spec.templates.size(), phase.mix.empty() ? 1.0 : 0.0);
        for (const auto& [name, w] : phase.mix) {
            const auto it = std::find_if(spec.templates.begin(), spec.templates.end(),
                                         [&name](const PodTemplate& t) { return t.name == name; });
            if (it == spec.templates.end()) throw ConfigError("unknown pod template '" + name + "'");
            weights[static_cast<std::size_t>(it - spec.templates.begin())] = w;
        }
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        std::exponential_distribution<double> gap(phase.rate);

        for (double t = phase.start + gap(rng); t < phase.end; t += gap(rng)) {
            const std::size_t ti = pick(rng);
            const PodTemplate& tmpl = spec.templates[ti];
            double duration = tmpl.duration;
            if (tmpl.exponential_duration) duration = std::exponential_distribution<double>(1.0 / tmpl.duration)(rng);
            draws.push_back(Draw{Arrival{t, ti, duration, 0}, phase_base + pi});
        }
    }

    std::stable_sort(draws.begin(), draws.end(), [](const Draw& a, const Draw& b) {
        if (a.arrival.time != b.arrival.time) return a.arrival.time < b.arrival.time;
        return a.phase < b.phase;
    });
    std::vector<Arrival> out;
    out.reserve(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
        out.push_back(draws[i].arrival);
        out.back().ordinal = i;
    }
    return out;
}

Pod make_pod(const PodTemplate& tmpl, const PodId& id, double arrival_time, double duration) {
    Pod p;
    p.id = id;
    p.queue_id = tmpl.queue;
    p.priority = tmpl.priority;
    p.requests = tmpl.requests;
    p.labels = tmpl.labels;
    p.labels.emplace("app", tmpl.name);
    p.tolerations = tmpl.tolerations;
    for (Volume v : tmpl.volumes) {
        for (auto pos = v.id.find("{pod}"); pos != std::string::npos; pos = v.id.find("{pod}", pos)) {
            v.id.replace(pos, 5, id);
            pos += id.size();
        }
        p.volumes.push_back(std::move(v));
    }
    p.affinity = tmpl.affinity;
    p.anti_affinity = tmpl.anti_affinity;
    p.spread_topology_key = tmpl.spread_key;
    p.duration = duration;
    p.arrival_time = arrival_time;
    return p;
}

ArrivalBatch instantiate(const PodTemplate& tmpl, const Arrival& arrival) {
    char ordinal[24];
    std::snprintf(ordinal, sizeof(ordinal), "%05llu", static_cast<unsigned long long>(arrival.ordinal));
    const std::string base = tmpl.name + "-" + ordinal;

    ArrivalBatch batch;
    if (tmpl.gang_size <= 1) {
        batch.pods.push_back(make_pod(tmpl, base, arrival.time, arrival.duration));
        return batch;
    }
    PodGroup group;
    group.id = base;
    group.min_member = tmpl.min_member > 0 ? tmpl.min_member : tmpl.gang_size;
    for (int k = 0; k < tmpl.gang_size; ++k) {
        Pod p = make_pod(tmpl, base + "-" + std::to_string(k), arrival.time, arrival.duration);
        p.group_id = group.id;
        p.labels["group"] = group.id;
        group.member_ids.insert(p.id);
        batch.pods.push_back(std::move(p));
    }
    batch.group = std::move(group);
    return batch;
}

}  // namespace orchestra
