#include <gtest/gtest.h>

#include <json.hpp>

#include "orchestra/report.hpp"
#include "orchestra/simulator.hpp"
#include "testkit.hpp"

using namespace orchestra;
using testkit::node;
using testkit::pod;

namespace {

Scenario scenario(const std::string& name) {
    return load_scenario(std::string(ORCHESTRA_SCENARIO_DIR) + "/" + name + ".json");
}

struct Cluster {
    ClusterState state;
    PendingQueues queues;

    Cluster() { queues.add_queue({"default", {1 << 30, 1 << 30, 1 << 30}, 1.0}); }

    void run_on(Pod p, const NodeId& n) {
        const PodId id = p.id;
        const Resources r = p.requests;
        state.add_pod(std::move(p));
        state.bind(id, n);
        state.start(id);
        queues.charge("default", r);
    }
};

}  // namespace

TEST(EventOrder, KindThenSequence) {
    SimEvent complete{10.0, EventKind::PodComplete, 5};
    SimEvent arrival{10.0, EventKind::PodArrival, 1};
    SimEvent agent{10.0, EventKind::AgentTick, 0};
    SimEvent earlier{9.0, EventKind::AgentTick, 9};
    EXPECT_TRUE(event_before(complete, arrival));
    EXPECT_TRUE(event_before(arrival, agent));
    EXPECT_TRUE(event_before(earlier, complete));
    SimEvent a2{10.0, EventKind::PodArrival, 2};
    EXPECT_TRUE(event_before(arrival, a2));
    EXPECT_FALSE(event_before(a2, arrival));
}

TEST(InjectFailure, EmptyNode) {
    Cluster c;
    c.state.add_node(node("a", {1000, 1000, 0}));
    const auto r = inject_failure(c.state, c.queues, "a", false);
    EXPECT_EQ(r.removed, (std::vector<NodeId>{"a"}));
    EXPECT_TRUE(r.requeued.empty());
    EXPECT_FALSE(c.state.has_node("a"));
}

TEST(InjectFailure, TwoRunningPodsRequeued) {
    Cluster c;
    c.state.add_node(node("a", {1000, 1000, 0}));
    c.state.add_node(node("b", {1000, 1000, 0}));
    c.run_on(pod("p1", {100, 100, 0}), "a");
    c.run_on(pod("p2", {100, 100, 0}), "a");
    c.run_on(pod("p3", {100, 100, 0}), "b");
    const auto r = inject_failure(c.state, c.queues, "a", false);
    EXPECT_EQ(r.requeued, (std::vector<PodId>{"p1", "p2"}));
    EXPECT_EQ(c.state.pod("p1").state, PodState::Pending);
    EXPECT_EQ(c.state.pod("p2").state, PodState::Pending);
    EXPECT_EQ(c.state.pod("p3").state, PodState::Running);
    EXPECT_TRUE(c.queues.contains("p1"));
    EXPECT_EQ(c.queues.usage("default"), (Resources{100, 100, 0}));
}

TEST(InjectFailure, ZoneScoped) {
    Cluster c;
    for (int i = 0; i < 3; ++i) c.state.add_node(node("z1-" + std::to_string(i), {1000, 1000, 0}, "z1"));
    c.state.add_node(node("z2-0", {1000, 1000, 0}, "z2"));
    for (int i = 0; i < 3; ++i) c.run_on(pod("p" + std::to_string(i), {100, 100, 0}), "z1-" + std::to_string(i));
    c.run_on(pod("safe", {100, 100, 0}), "z2-0");
    const auto r = inject_failure(c.state, c.queues, "z1", true);
    EXPECT_EQ(r.removed.size(), 3u);
    EXPECT_EQ(r.requeued.size(), 3u);
    EXPECT_EQ(c.state.nodes().size(), 1u);
    EXPECT_EQ(c.state.pod("safe").state, PodState::Running);
}

TEST(InjectFailure, GangGoesDownTogether) {
    Cluster c;
    c.state.add_node(node("a", {1000, 1000, 0}));
    c.state.add_node(node("b", {1000, 1000, 0}));
    c.state.add_group({"g", 2, {"g0", "g1"}});
    for (auto [id, n] : std::vector<std::pair<std::string, std::string>>{{"g0", "a"}, {"g1", "b"}}) {
        Pod p = pod(id, {100, 100, 0});
        p.group_id = "g";
        c.run_on(p, n);
    }
    const auto r = inject_failure(c.state, c.queues, "a", false);
    EXPECT_EQ(r.requeued, (std::vector<PodId>{"g0", "g1"}));
    EXPECT_FALSE(c.state.node_of("g1").has_value());
}

TEST(InjectFailure, UnknownTargets) {
    Cluster c;
    c.state.add_node(node("a", {1000, 1000, 0}));
    EXPECT_THROW((void)inject_failure(c.state, c.queues, "nope", false), ConfigError);
    EXPECT_THROW((void)inject_failure(c.state, c.queues, "nowhere", true), ConfigError);
}

TEST(Percentile, NearestRank) {
    EXPECT_EQ(percentile({}, 0.95), 0.0);
    EXPECT_EQ(percentile({5, 1, 3, 2, 4}, 0.5), 3.0);
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) v.push_back(i);
    EXPECT_EQ(percentile(v, 0.95), 19.0);
    EXPECT_EQ(percentile(v, 1.0), 20.0);
}

TEST(Run, EmptyWorkloadIsIdle) {
    const auto r = run_scenario(scenario("empty"));
    EXPECT_FALSE(r.report.halted);
    EXPECT_EQ(r.report.arrived, 0u);
    EXPECT_EQ(r.report.decisions, 0u);
    ASSERT_FALSE(r.report.rows.empty());
    for (const auto& row : r.report.rows) {
        EXPECT_EQ(row.cpu_util, 0.0);
        EXPECT_EQ(row.mem_util, 0.0);
        EXPECT_EQ(row.pending, 0u);
    }
    EXPECT_EQ(r.report.rows.front().time, 0.0);
    EXPECT_EQ(r.report.rows.size(), 120u / 5u + 1u);
}

TEST(Run, DeterministicBytes) {
    for (const char* name : {"promotion_spike", "zone_failure", "gpu_fragmentation", "two_gangs"}) {
        const Scenario s = scenario(name);
        const auto a = run_scenario(s);
        const auto b = run_scenario(s);
        EXPECT_EQ(a.trace, b.trace) << name;
        EXPECT_EQ(metrics_csv(a.report), metrics_csv(b.report)) << name;
        EXPECT_EQ(summary_json(s, a.report), summary_json(s, b.report)) << name;
    }
}

TEST(Run, ConservationAndSafetyAcrossScenarios) {
    for (const char* name : {"promotion_spike", "zone_failure", "gpu_fragmentation", "two_gangs", "empty"}) {
        for (std::uint64_t seed : {0u, 1u, 2u}) {
            Scenario s = scenario(name);
            s.seed = seed;
            const auto r = run_scenario(s);
            const auto& m = r.report;
            ASSERT_FALSE(m.halted) << name << " " << m.halt_reason;
            EXPECT_EQ(m.arrived, m.completed + m.pending + m.running + m.failed_in_flight) << name << " seed " << seed;
            for (const auto& [pod, delay] : m.scheduling_delay) EXPECT_GE(delay, 0.0);
            double last = 0.0;
            for (const auto& line : r.trace) {
                const auto rec = nlohmann::json::parse(line);
                const double t = rec.at("time").get<double>();
                ASSERT_GE(t, last) << name;
                last = t;
            }
        }
    }
}

// Every pod that fails is later bound again or still pending at the horizon.
TEST(Run, FailedPodsNeverVanish) {
    const Scenario s = scenario("zone_failure");
    const auto r = run_scenario(s);
    std::map<std::string, std::string> last;  // pod -> last lifecycle event seen
    std::set<std::string> failed;
    for (const auto& line : r.trace) {
        const auto rec = nlohmann::json::parse(line);
        const std::string type = rec.at("type");
        if (type == "event" && (rec.at("kind") == "node_fail" || rec.at("kind") == "zone_fail")) {
            for (const auto& p : rec.at("pods")) {
                failed.insert(p.get<std::string>());
                last[p.get<std::string>()] = "failed";
            }
        } else if (type == "event" && rec.at("kind") == "complete") {
            for (const auto& p : rec.at("pods")) last[p.get<std::string>()] = "complete";
        } else if (type == "decision" && rec.contains("node") && !rec.at("node").is_null()) {
            last[rec.at("pod").get<std::string>()] = "bound";
            if (rec.contains("placements")) {
                for (const auto& [p, n] : rec.at("placements").items()) last[p] = "bound";
            }
        }
    }
    ASSERT_FALSE(failed.empty());
    const std::uint64_t outstanding = r.report.pending + r.report.failed_in_flight;
    std::uint64_t still_failed = 0;
    for (const auto& p : failed) still_failed += last[p] == "failed" ? 1 : 0;
    EXPECT_LE(still_failed, outstanding);
    EXPECT_GT(r.report.failures_requeued, 0u);
}

TEST(Run, TwoGangsCompleteOnlyWithGate) {
    Scenario on = scenario("two_gangs");
    const auto a = run_scenario(on);
    EXPECT_EQ(a.report.completed, 12u);
    Scenario off = on;
    off.scheduler.gang = false;
    const auto b = run_scenario(off);
    EXPECT_EQ(b.report.completed, 0u);
    EXPECT_EQ(b.report.running, 10u);
}

TEST(Compare, ModeWithItselfIsIdentical) {
    const auto rows = compare_runs(scenario("promotion_spike"), {"static:spread", "static:spread"});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].summary.p95_delay, rows[1].summary.p95_delay);
    EXPECT_EQ(rows[0].summary.mean_cpu_util, rows[1].summary.mean_cpu_util);
    EXPECT_EQ(rows[0].summary.mean_fragmentation, rows[1].summary.mean_fragmentation);
    EXPECT_EQ(rows[0].completed, rows[1].completed);
    EXPECT_THROW((void)compare_runs(scenario("empty"), {"static:spread"}), ConfigError);
}

TEST(Compare, ModeGrammar) {
    const RunMode m = parse_mode("static:binpack/ca=off/gang=on");
    EXPECT_EQ(m.profile, "binpack");
    EXPECT_EQ(m.ca, std::optional<bool>(false));
    EXPECT_EQ(m.gang, std::optional<bool>(true));
    EXPECT_TRUE(parse_mode("scenario").from_scenario);
    EXPECT_EQ(parse_mode("rl:p.json").policy, PolicyMode::RlEval);
    EXPECT_THROW((void)parse_mode("dynamic:x"), ConfigError);
    EXPECT_THROW((void)parse_mode("static:spread/ca=maybe"), ConfigError);
    EXPECT_THROW((void)parse_mode("static:spread/turbo=on"), ConfigError);
}

TEST(Train, EpisodesAndEpsilonSchedule) {
    Scenario s = scenario("promotion_spike");
    s.duration = 200;
    const auto r = train_policy(s, 3);
    ASSERT_EQ(r.episodes.size(), 3u);
    EXPECT_DOUBLE_EQ(r.episodes[0].epsilon, std::max(s.rl.epsilon_min, s.rl.epsilon));
    EXPECT_DOUBLE_EQ(r.episodes[2].epsilon, std::max(s.rl.epsilon_min, s.rl.epsilon * s.rl.epsilon_decay * s.rl.epsilon_decay));
    EXPECT_EQ(r.policy.actions(), s.rl.actions);
    const auto again = train_policy(s, 3);
    EXPECT_EQ(again.policy, r.policy);
    EXPECT_THROW((void)train_policy(s, 0), ConfigError);
}

TEST(Report, CsvShapes) {
    const Scenario s = scenario("empty");
    const auto r = run_scenario(s);
    const std::string csv = metrics_csv(r.report);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.report.rows.size() + 1);
    const auto summary = nlohmann::json::parse(summary_json(s, r.report));
    EXPECT_EQ(summary.at("scenario"), "empty");
    std::vector<EpisodeStats> eps{{0, 1.0, 0.1, 1.0}, {1, 0.9, 0.2, 2.0}};
    const std::string rewards = rewards_csv(eps);
    EXPECT_EQ(std::count(rewards.begin(), rewards.end(), '\n'), 3);
}
