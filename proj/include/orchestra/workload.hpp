#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "orchestra/cluster.hpp"
#include "orchestra/scenario.hpp"

namespace orchestra {

/// One arrival drawn by the workload generator. A gang template yields a
/// single arrival that instantiates every member at once.
struct Arrival {
    double time = 0.0;
    std::size_t template_index = 0;
    double duration = 0.0;
    std::uint64_t ordinal = 0;  // position in the generated sequence

    friend bool operator==(const Arrival&, const Arrival&) = default;
};

/// Fixed arrivals plus Poisson arrivals for every phase, merged in time
/// order (ties: fixed arrivals in listed order, then by phase and draw order). Identical (spec, seed) gives an identical sequence.
/// Throws ConfigError on a negative rate or an empty template list with
/// a positive rate.
[[nodiscard]] std::vector<Arrival> generate_workload(const WorkloadSpec& spec, std::uint64_t seed);

/// Pods created for one arrival, plus their group for gang templates.
struct ArrivalBatch {
    std::vector<Pod> pods;
    std::optional<PodGroup> group;
};

/// Ids are "<template>-<ordinal>" for single pods, "<template>-<ordinal>-<k>"
/// for gang members (group id "<template>-<ordinal>").
[[nodiscard]] ArrivalBatch instantiate(const PodTemplate& tmpl, const Arrival& arrival);

/// A pod built from `tmpl` with the given id, arrival time and duration.
[[nodiscard]] Pod make_pod(const PodTemplate& tmpl, const PodId& id, double arrival_time, double duration);

}  // namespace orchestra
