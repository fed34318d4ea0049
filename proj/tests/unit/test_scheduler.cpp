#include <gtest/gtest.h>

#include "orchestra/predicates.hpp"
#include "orchestra/scheduler.hpp"
#include "testkit.hpp"

using namespace orchestra;
using testkit::node;
using testkit::pod;

namespace {

struct World {
    ClusterState state;
    PendingQueues queues;
    Scheduler scheduler;

    World() { queues.add_queue({"default", {1 << 30, 1 << 30, 1 << 30}, 1.0}); }

    void submit(Pod p) {
        const PodId id = p.id;
        const QueueId q = p.queue_id;
        state.add_pod(std::move(p));
        queues.push(q, id);
    }
    // Binds directly, charging the queue as the scheduler would.
    void place(Pod p, const NodeId& n) {
        const PodId id = p.id;
        const Resources r = p.requests;
        state.add_pod(std::move(p));
        state.bind(id, n);
        state.start(id);
        queues.charge("default", r);
    }
    ScheduleDecision step(const std::string& profile = "spread") {
        auto d = scheduler.schedule_one(queues, state, builtin_profiles().at(profile));
        EXPECT_TRUE(d.has_value());
        return *d;
    }
};

}  // namespace

TEST(ScheduleOne, SingleNodeBinds) {
    World w;
    w.state.add_node(node("a", {1000, 1000, 0}));
    w.submit(pod("p", {100, 100, 0}));
    const auto d = w.step();
    EXPECT_EQ(d.outcome, Outcome::Bound);
    EXPECT_EQ(d.node, std::optional<NodeId>("a"));
    EXPECT_EQ(w.queues.usage("default"), (Resources{100, 100, 0}));
    EXPECT_FALSE(w.queues.contains("p"));
}

TEST(ScheduleOne, NothingQueuedReturnsNullopt) {
    World w;
    EXPECT_FALSE(w.scheduler.schedule_one(w.queues, w.state, builtin_profiles().at("spread")).has_value());
}

TEST(ScheduleOne, NoFeasibleNodeNoVictimsIsUnschedulable) {
    World w;
    w.state.add_node(node("a", {1000, 1000, 0}));
    w.submit(pod("p", {2000, 100, 0}));
    const auto d = w.step();
    EXPECT_EQ(d.outcome, Outcome::Unschedulable);
    EXPECT_EQ(d.reason, "no feasible node");
    EXPECT_EQ(d.predicate_failures.at("GeneralPredicates"), 1);
    EXPECT_TRUE(w.queues.is_parked("p"));
    EXPECT_EQ(w.state.pod("p").state, PodState::Pending);
}

TEST(ScheduleOne, BinPackPicksFullerNode) {
    World w;
    w.state.add_node(node("x", {1000, 1000, 0}));
    w.state.add_node(node("y", {1000, 1000, 0}));
    w.place(pod("fx", {100, 100, 0}), "x");
    w.place(pod("fy", {600, 600, 0}), "y");
    w.submit(pod("p", {100, 100, 0}));
    EXPECT_EQ(w.step("binpack").node, std::optional<NodeId>("y"));
}

TEST(Preempt, NoLowerPriorityPods) {
    ClusterState s;
    s.add_node(node("a", {1000, 1000, 0}));
    s.add_pod(pod("x", {1000, 1000, 0}, 5));
    s.bind("x", "a");
    EXPECT_FALSE(preempt(pod("p", {500, 500, 0}, 5), s).has_value());
    EXPECT_FALSE(preempt(pod("p", {500, 500, 0}, 3), s).has_value());
}

TEST(Preempt, EvictsOnlyWhatIsNeeded) {
    ClusterState s;
    s.add_node(node("a", {1000, 1000, 0}));
    s.add_pod(pod("low", {500, 500, 0}, 1));
    s.add_pod(pod("mid", {500, 500, 0}, 5));
    s.bind("low", "a");
    s.bind("mid", "a");
    const auto plan = preempt(pod("p", {500, 500, 0}, 9), s);
    ASSERT_TRUE(plan.has_value());
    EXPECT_EQ(plan->node, "a");
    EXPECT_EQ(plan->victims, (std::vector<PodId>{"low"}));
}

TEST(Preempt, GroupVictimsGoTogether) {
    ClusterState s;
    s.add_node(node("a", {1000, 1000, 0}));
    s.add_node(node("b", {1000, 1000, 0}));
    s.add_group({"g", 2, {"g0", "g1"}});
    for (auto [id, n] : std::vector<std::pair<std::string, std::string>>{{"g0", "a"}, {"g1", "b"}}) {
        Pod p = pod(id, {1000, 1000, 0}, 1);
        p.group_id = "g";
        s.add_pod(p);
        s.bind(id, n);
    }
    const auto plan = preempt(pod("p", {1000, 1000, 0}, 5), s);
    ASSERT_TRUE(plan.has_value());
    EXPECT_EQ(plan->victims, (std::vector<PodId>{"g0", "g1"}));
}

TEST(ScheduleOne, PreemptionEvictsAndRequeues) {
    World w;
    w.state.add_node(node("a", {1000, 1000, 0}));
    w.place(pod("low", {800, 800, 0}, 1), "a");
    w.submit(pod("hi", {500, 500, 0}, 9));
    const auto d = w.step();
    EXPECT_EQ(d.outcome, Outcome::PreemptedAndBound);
    EXPECT_EQ(d.victims, (std::vector<PodId>{"low"}));
    EXPECT_EQ(w.state.pod("low").state, PodState::Pending);
    EXPECT_TRUE(w.queues.contains("low"));
    EXPECT_EQ(w.queues.usage("default"), (Resources{500, 500, 0}));
}

// Random crowded nodes: preempt() agrees with subset enumeration on
// (victim count, priority sum, node), every victim is strictly lower, and
// the preemptor is feasible after eviction.
TEST(PreemptProperty, MatchesSubsetOracle) {
    int found = 0;
    for (std::uint64_t seed = 0; seed < 400; ++seed) {
        std::mt19937_64 rng(seed);
        ClusterState s;
        const auto n = testkit::uniform(rng, 1, 3);
        for (std::int64_t i = 0; i < n; ++i) {
            Node nd = node("n" + std::to_string(i), {4000, 4096, 0}, "z" + std::to_string(i % 2));
            nd.max_pods = static_cast<int>(testkit::uniform(rng, 3, 6));
            s.add_node(nd);
        }
        int next_group = 0;
        for (int i = 0; i < 12; ++i) {
            Pod p = pod("b" + std::to_string(i), {testkit::uniform(rng, 1, 4) * 500, testkit::uniform(rng, 1, 4) * 512, 0},
                        static_cast<int>(testkit::uniform(rng, 0, 6)));
            p.labels["app"] = testkit::pick(rng, testkit::label_values());
            if (testkit::coin(rng, 0.2)) p.volumes.push_back({"v" + std::to_string(i % 3), std::nullopt});
            s.add_pod(p);
            try {
                s.bind(p.id, "n" + std::to_string(testkit::uniform(rng, 0, n - 1)));
            } catch (const BindError&) {
                s.erase_pod(p.id);
            }
        }
        // Pair up some bound pods into two-member groups.
        std::vector<PodId> bound;
        for (const auto& [id, p] : s.pods()) bound.push_back(id);
        for (std::size_t i = 0; i + 1 < bound.size(); i += 2) {
            if (!testkit::coin(rng, 0.3)) continue;
            const GroupId g = "g" + std::to_string(next_group++);
            s.add_group({g, 2, {bound[i], bound[i + 1]}});
            ClusterState rebuilt;
            for (const auto& [nid, nd] : s.nodes()) rebuilt.add_node(nd);
            for (const auto& [gid, grp] : s.groups()) rebuilt.add_group(grp);
            for (const auto& [pid, p] : s.pods()) {
                Pod c = p;
                c.state = PodState::Pending;
                if (pid == bound[i] || pid == bound[i + 1]) c.group_id = g;
                rebuilt.add_pod(c);
                rebuilt.bind(pid, *s.node_of(pid));
            }
            s = std::move(rebuilt);
        }
        Pod pre = pod("pre", {testkit::uniform(rng, 1, 6) * 500, testkit::uniform(rng, 1, 6) * 512, 0},
                      static_cast<int>(testkit::uniform(rng, 1, 7)));
        if (testkit::coin(rng, 0.3)) {
            pre.anti_affinity.push_back({{{"app", testkit::pick(rng, testkit::label_values())}}, "", true, 1});
        }
        if (testkit::coin(rng, 0.2)) pre.volumes.push_back({"v0", std::nullopt});
        if (!filter_feasible(pre, s).empty()) continue;

        const auto plan = preempt(pre, s);
        const auto oracle = testkit::oracle_preempt(pre, s);
        ASSERT_EQ(plan.has_value(), oracle.has_value()) << "seed " << seed;
        if (!plan) continue;
        ++found;
        long long sum = 0;
        for (const PodId& v : plan->victims) {
            ASSERT_LT(s.pod(v).priority, pre.priority);
            sum += s.pod(v).priority;
        }
        ASSERT_EQ(plan->node, oracle->node) << "seed " << seed;
        ASSERT_EQ(plan->victims.size(), oracle->count) << "seed " << seed;
        ASSERT_EQ(sum, oracle->priority_sum) << "seed " << seed;
        ClusterState after = s;
        for (const PodId& v : plan->victims) after.release(v, PodState::Preempted);
        ASSERT_TRUE(is_feasible(pre, after.node(plan->node), after));
    }
    EXPECT_GT(found, 50);
}

namespace {

void submit_gang(World& w, const GroupId& g, int size, Resources each) {
    std::set<PodId> ids;
    for (int i = 0; i < size; ++i) ids.insert(g + "-" + std::to_string(i));
    w.state.add_group({g, size, ids});
    for (const auto& id : ids) {
        Pod p = pod(id, each);
        p.group_id = g;
        w.submit(p);
    }
}

}  // namespace

TEST(GangSchedule, BothMembersBindInOneDecision) {
    World w;
    w.state.add_node(node("a", {1000, 1000, 0}));
    w.state.add_node(node("b", {1000, 1000, 0}));
    submit_gang(w, "g", 2, {800, 800, 0});
    const auto d = w.step();
    EXPECT_EQ(d.outcome, Outcome::GangBound);
    EXPECT_EQ(d.placements.size(), 2u);
    EXPECT_EQ(w.state.pod("g-0").state, PodState::Scheduled);
    EXPECT_EQ(w.state.pod("g-1").state, PodState::Scheduled);
    EXPECT_NE(d.placements.at("g-0"), d.placements.at("g-1"));
}

TEST(GangSchedule, DeferredWithoutPartialBinds) {
    World w;
    w.state.add_node(node("a", {1000, 1000, 0}));
    w.state.add_node(node("b", {1000, 1000, 0}));
    submit_gang(w, "g", 3, {800, 800, 0});
    const auto d = w.step();
    EXPECT_EQ(d.outcome, Outcome::GangDeferred);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(w.state.pod("g-" + std::to_string(i)).state, PodState::Pending);
    EXPECT_EQ(w.state.free("a"), (Resources{1000, 1000, 0}));
    EXPECT_EQ(w.queues.usage("default"), (Resources{}));
}

TEST(GangSchedule, GangOffBindsMembersIndividually) {
    World w;
    w.scheduler = Scheduler(SchedulerConfig{false, true});
    w.state.add_node(node("a", {1000, 1000, 0}));
    w.state.add_node(node("b", {1000, 1000, 0}));
    submit_gang(w, "g", 3, {800, 800, 0});
    EXPECT_EQ(w.step().outcome, Outcome::Bound);
    EXPECT_EQ(w.step().outcome, Outcome::Bound);
    EXPECT_EQ(w.step().outcome, Outcome::Unschedulable);
}

// Two gangs that each need 60% of the cluster, members interleaved in the
// queue. With the gate exactly one gang is placed whole; without it both end
// up partially placed and neither can ever complete.
TEST(GangSchedule, InterleavedSixtyPercentGangs) {
    for (bool gang : {true, false}) {
        World w;
        w.scheduler = Scheduler(SchedulerConfig{gang, false});
        for (int i = 0; i < 10; ++i) w.state.add_node(node("n" + std::to_string(i), {1000, 1000, 0}));
        std::set<PodId> a;
        std::set<PodId> b;
        for (int i = 0; i < 6; ++i) {
            a.insert("a-" + std::to_string(i));
            b.insert("b-" + std::to_string(i));
        }
        w.state.add_group({"a", 6, a});
        w.state.add_group({"b", 6, b});
        for (int i = 0; i < 6; ++i) {
            for (const char* g : {"a", "b"}) {
                Pod p = pod(std::string(g) + "-" + std::to_string(i), {1000, 1000, 0});
                p.group_id = g;
                w.submit(p);
            }
        }
        while (w.scheduler.schedule_one(w.queues, w.state, builtin_profiles().at("spread"))) {
        }
        int bound_a = 0;
        int bound_b = 0;
        for (const auto& id : a) bound_a += w.state.node_of(id) ? 1 : 0;
        for (const auto& id : b) bound_b += w.state.node_of(id) ? 1 : 0;
        if (gang) {
            EXPECT_EQ(std::set<int>({bound_a, bound_b}), std::set<int>({0, 6}));
        } else {
            EXPECT_EQ(bound_a, 5);
            EXPECT_EQ(bound_b, 5);
        }
    }
}

TEST(Fragmentation, ScoreIsFreeModuloReference) {
    ClusterState s;
    for (const char* id : {"g1", "g2"}) {
        Node n = node(id, {64000, 65536, 8});
        n.gpu_topology = v100_profile();
        s.add_node(n);
    }
    s.add_node(node("cpu", {64000, 65536, 0}));
    EXPECT_EQ(fragmentation_score(s), 0);
    s.add_pod(pod("x", {1, 1, 3}));
    s.bind("x", "g1");
    // Reference falls back to the node GPU capacity 8: 5 % 8 + 8 % 8 = 5.
    EXPECT_EQ(reference_gpu_request(s), 8);
    EXPECT_EQ(fragmentation_score(s), 5);
    // A pending 4-GPU pod sets the reference to 4: 5 % 4 + 8 % 4 = 1.
    s.add_pod(pod("want", {1, 1, 4}));
    EXPECT_EQ(fragmentation_score(s), 1);
    EXPECT_EQ(fragmentation_score(s, 2), 1);
}

TEST(Defragment, EmptyAndConsolidated) {
    ClusterState s;
    EXPECT_TRUE(defragment(s).empty());
    Node n = node("g1", {64000, 65536, 8});
    n.gpu_topology = v100_profile();
    s.add_node(n);
    n.id = "g2";
    n.labels["hostname"] = "g2";
    s.add_node(n);
    EXPECT_TRUE(defragment(s).empty());
    s.add_pod(pod("a", {1, 1, 1}));
    s.add_pod(pod("b", {1, 1, 1}));
    s.bind("a", "g1");
    s.bind("b", "g1");
    EXPECT_TRUE(defragment(s).empty());
}

TEST(Defragment, ConsolidatesTwoSingleGpuPods) {
    ClusterState s;
    for (const char* id : {"g1", "g2"}) {
        Node n = node(id, {64000, 65536, 8});
        n.gpu_topology = v100_profile();
        s.add_node(n);
    }
    s.add_pod(pod("a", {1000, 1000, 1}));
    s.add_pod(pod("b", {1000, 1000, 1}));
    s.bind("a", "g1");
    s.bind("b", "g2");
    const auto before = fragmentation_score(s);
    const auto plan = defragment(s);
    ASSERT_EQ(plan.size(), 1u);
    apply_plan(plan, s);
    EXPECT_EQ(s.node_of("a"), s.node_of("b"));
    // Recount directly: one node must have all 8 GPUs free.
    int whole = 0;
    for (const auto& id : {"g1", "g2"}) whole += s.free(id).gpu == 8 ? 1 : 0;
    EXPECT_EQ(whole, 1);
    EXPECT_LT(fragmentation_score(s), before);
    s.check_invariants();
}

TEST(DefragmentProperty, NeverBreaksPredicatesOrRaisesScore) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(seed);
        ClusterState s;
        const auto n = testkit::uniform(rng, 2, 5);
        for (std::int64_t i = 0; i < n; ++i) {
            Node nd = node("g" + std::to_string(i), {32000, 32768, 8}, "z" + std::to_string(i % 2));
            nd.gpu_topology = v100_profile();
            if (testkit::coin(rng, 0.2)) nd.taints.insert("spot");
            s.add_node(nd);
        }
        for (int i = 0; i < 10; ++i) {
            Pod p = pod("p" + std::to_string(i), {testkit::uniform(rng, 1, 8) * 1000, 1024, testkit::uniform(rng, 1, 4)});
            p.labels["app"] = testkit::pick(rng, testkit::label_values());
            if (testkit::coin(rng, 0.2)) p.anti_affinity.push_back({{{"app", "web"}}, "", true, 1});
            if (testkit::coin(rng, 0.5)) p.tolerations.insert("spot");
            s.add_pod(p);
            const auto feas = filter_feasible(p, s);
            if (feas.empty()) {
                s.erase_pod(p.id);
                continue;
            }
            // Filtering only checks the incoming pod's terms; keep start states that are already consistent.
            ClusterState trial = s;
            trial.bind(p.id, testkit::pick(rng, feas));
            if (!bound_constraints_hold(trial)) {
                s.erase_pod(p.id);
                continue;
            }
            s = std::move(trial);
            s.start(p.id);
        }
        if (testkit::coin(rng, 0.5)) s.add_pod(pod("pending", {1, 1, testkit::uniform(rng, 1, 8)}));
        const auto before = fragmentation_score(s);
        const auto plan = defragment(s);
        apply_plan(plan, s);
        ASSERT_NO_THROW(s.check_invariants());
        ASSERT_TRUE(bound_constraints_hold(s));
        ASSERT_LE(fragmentation_score(s), before);
        if (!plan.empty()) ASSERT_LT(fragmentation_score(s), before);
    }
}
