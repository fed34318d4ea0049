#include "orchestra/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <queue>

#include <json.hpp>

#include "orchestra/autoscaler.hpp"
#include "orchestra/forecast.hpp"
#include "orchestra/predicates.hpp"
#include "orchestra/scheduler.hpp"
#include "orchestra/workload.hpp"

namespace orchestra {

using nlohmann::json;

const char* to_string(EventKind k) noexcept {
    switch (k) {
        case EventKind::PodComplete: return "pod_complete";
        case EventKind::NodeFail: return "node_fail";
        case EventKind::ZoneFail: return "zone_fail";
        case EventKind::PodArrival: return "pod_arrival";
        case EventKind::NodeAdd: return "node_add";
        case EventKind::NodeRemove: return "node_remove";
        case EventKind::MetricTick: return "metric_tick";
        case EventKind::AgentTick: return "agent_tick";
    }
    return "?";
}

bool event_before(const SimEvent& a, const SimEvent& b) noexcept {
    if (a.time != b.time) return a.time < b.time;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.sequence < b.sequence;
}

namespace {

/// Bound members of the group `pod` belongs to, or just `pod`.
std::vector<PodId> eviction_unit(const ClusterState& state, const PodId& pod) {
    const Pod& p = state.pod(pod);
    std::vector<PodId> unit;
    if (p.group_id) {
        if (const PodGroup* g = state.group(*p.group_id)) {
            for (const PodId& m : g->member_ids) {
                if (state.node_of(m)) unit.push_back(m);
            }
            return unit;
        }
    }
    unit.push_back(pod);
    return unit;
}

}  // namespace

FailureResult inject_failure(ClusterState& state, PendingQueues& queues, const std::string& target, bool zone) {
    FailureResult result;
    if (zone) {
        for (const auto& [id, n] : state.nodes()) {
            if (n.label("zone") == target) result.removed.push_back(id);
        }
        if (result.removed.empty()) throw ConfigError("unknown or empty zone '" + target + "'");
    } else {
        if (!state.has_node(target)) throw ConfigError("unknown node '" + target + "'");
        result.removed.push_back(target);
    }

    std::set<PodId> doomed;
    for (const NodeId& n : result.removed) {
        for (const PodId& p : state.pods_on(n)) {
            for (PodId& m : eviction_unit(state, p)) doomed.insert(std::move(m));
        }
    }
    for (const PodId& p : doomed) evict_and_requeue(p, PodState::Failed, queues, state);
    for (const NodeId& n : result.removed) state.remove_node(n);
    result.requeued.assign(doomed.begin(), doomed.end());
    return result;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double rank = std::ceil(q * static_cast<double>(values.size()));
    const std::size_t idx = static_cast<std::size_t>(std::max(1.0, rank)) - 1;
    return values[std::min(idx, values.size() - 1)];
}

Summary summarize(const MetricsReport& report) {
    Summary s;
    if (!report.rows.empty()) {
        const double n = static_cast<double>(report.rows.size());
        for (const auto& r : report.rows) {
            s.mean_cpu_util += r.cpu_util;
            s.mean_mem_util += r.mem_util;
            s.mean_gpu_util += r.gpu_util;
            s.mean_fragmentation += static_cast<double>(r.fragmentation);
            s.mean_imbalance += r.imbalance;
        }
        s.mean_cpu_util /= n;
        s.mean_mem_util /= n;
        s.mean_gpu_util /= n;
        s.mean_fragmentation /= n;
        s.mean_imbalance /= n;
    }
    std::vector<double> delays;
    for (const auto& [p, d] : report.scheduling_delay) delays.push_back(d);
    for (const auto& [p, d] : report.censored_delay) delays.push_back(d);
    if (!delays.empty()) {
        s.mean_delay = std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(delays.size());
        s.p95_delay = percentile(std::move(delays), 0.95);
    }
    if (!report.rewards.empty()) {
        s.mean_reward = std::accumulate(report.rewards.begin(), report.rewards.end(), 0.0) /
                        static_cast<double>(report.rewards.size());
    }
    return s;
}

namespace {

struct EventLater {
    bool operator()(const SimEvent& a, const SimEvent& b) const noexcept { return event_before(b, a); }
};

constexpr std::size_t kGroupCompletion = 1;

class Simulation {
public:
    Simulation(const Scenario& scenario, const RunOptions& options)
        : sc_(scenario),
          opts_(options),
          scheduler_(SchedulerConfig{scenario.scheduler.gang, scenario.scheduler.preemption}),
          rl_rng_(options.rl_seed) {}

    RunResult run() {
        setup();
        // Every event at one timestamp is applied before the scheduler runs.
        while (!events_.empty() && !report_.halted) {
            if (events_.top().time > sc_.duration) break;
            now_ = events_.top().time;
            EventKind kind = events_.top().kind;
            try {
                while (!events_.empty() && events_.top().time == now_) {
                    const SimEvent e = events_.top();
                    events_.pop();
                    kind = e.kind;
                    handle(e);
                }
                schedule_pending();
                state_.check_invariants();
            } catch (const Error& err) {
                halt(std::string(to_string(kind)) + ": " + err.what());
            }
        }
        finish();
        return RunResult{std::move(report_), std::move(trace_)};
    }

private:
    struct ServiceState {
        const ServiceSpec* spec = nullptr;
        const PodTemplate* tmpl = nullptr;
        std::vector<PodId> replicas;
        int created = 0;
    };

    // ---- setup / teardown ----

    void setup() {
        for (const auto& q : sc_.queues) queues_.add_queue(q);
        for (const auto& g : sc_.node_groups) {
            for (int i = 0; i < g.count; ++i) state_.add_node(g.make_node(i));
            next_node_index_[g.name] = g.count;
        }
        for (const auto& [tor, r] : sc_.convergence_ratio) state_.set_convergence_ratio(tor, r);

        switch (sc_.mode) {
            case PolicyMode::Static:
                profile_ = sc_.profile;
                break;
            case PolicyMode::RlTrain:
            case PolicyMode::RlEval:
                if (opts_.policy != nullptr) {
                    policy_ = opts_.policy;
                } else if (sc_.mode == PolicyMode::RlEval) {
                    if (!sc_.policy_file) throw ConfigError("rl-eval needs a policy file");
                    owned_policy_ = load_policy(*sc_.policy_file);
                    policy_ = &*owned_policy_;
                } else {
                    owned_policy_.emplace(sc_.rl.actions, sc_.rl.epsilon, sc_.rl.alpha, sc_.rl.gamma);
                    policy_ = &*owned_policy_;
                }
                for (const auto& a : policy_->actions()) {
                    if (!sc_.profiles.contains(a)) throw ConfigError("policy action '" + a + "' is not a score profile");
                }
                profile_ = policy_->actions().front();
                break;
        }
        (void)sc_.score_profile(profile_);

        arrivals_ = generate_workload(sc_.workload, sc_.seed);
        for (std::size_t i = 0; i < arrivals_.size(); ++i) {
            push(arrivals_[i].time, EventKind::PodArrival, {}, 0, i);
        }
        for (std::size_t i = 0; i < sc_.failures.size(); ++i) {
            const auto& f = sc_.failures[i];
            if (f.node) push(f.time, EventKind::NodeFail, *f.node, 0, i);
            if (f.zone) push(f.time, EventKind::ZoneFail, *f.zone, 0, i);
        }
        push(0.0, EventKind::MetricTick);
        if (sc_.mode != PolicyMode::Static) push(0.0, EventKind::AgentTick);

        for (const auto& svc : sc_.services) {
            ServiceState s;
            s.spec = &svc;
            s.tmpl = &sc_.workload.find_template(svc.template_name);
            services_.push_back(std::move(s));
        }
        for (std::size_t i = 0; i < services_.size(); ++i) {
            for (int k = 0; k < services_[i].spec->initial_replicas; ++k) add_replica(i);
        }
        schedule_pending();
    }

    void finish() {
        for (const auto& [id, p] : state_.pods()) {
            switch (p.state) {
                case PodState::Pending:
                    ++report_.pending;
                    if (!report_.scheduling_delay.contains(id)) {
                        report_.censored_delay[id] = std::max(0.0, std::min(now_, sc_.duration) - p.arrival_time);
                    }
                    break;
                case PodState::Scheduled:
                case PodState::Running: ++report_.running; break;
                case PodState::Preempted:
                case PodState::Failed: ++report_.failed_in_flight; break;
                case PodState::Completed: break;
            }
        }
    }

    void halt(const std::string& reason) {
        report_.halted = true;
        report_.halt_reason = reason;
        emit(json{{"type", "halt"}, {"time", now_}, {"reason", reason}});
    }

    // ---- plumbing ----

    void push(double time, EventKind kind, std::string subject = {}, std::uint64_t epoch = 0, std::size_t index = 0) {
        events_.push(SimEvent{time, kind, seq_++, std::move(subject), epoch, index});
    }

    void emit(const json& record) {
        std::string line = record.dump();
        if (opts_.on_trace) opts_.on_trace(line);
        trace_.push_back(std::move(line));
    }

    void emit_event(const std::string& kind, const std::vector<PodId>& pods, json extra = json::object()) {
        json rec{{"type", "event"}, {"time", now_}, {"kind", kind}, {"pods", pods}};
        for (auto& [k, v] : extra.items()) rec[k] = v;
        emit(rec);
    }

    const ScoreProfile& profile() const { return sc_.score_profile(profile_); }

    // A pod went back to Pending: restart its clock and invalidate any completion.
    void on_requeued(const PodId& pod) {
        pending_since_[pod] = now_;
        ++pod_epoch_[pod];
        const Pod& p = state_.pod(pod);
        if (p.group_id && group_running_.erase(*p.group_id) > 0) ++group_epoch_[*p.group_id];
        dirty_ = true;
    }

    void forget(const PodId& pod) {
        pending_since_.erase(pod);
        blocked_since_.erase(pod);
        pod_epoch_.erase(pod);
    }

    // ---- event handlers ----

    void handle(const SimEvent& e) {
        switch (e.kind) {
            case EventKind::PodArrival: on_arrival(arrivals_[e.index]); break;
            case EventKind::PodComplete: on_complete(e); break;
            case EventKind::NodeFail: on_failure(e, false); break;
            case EventKind::ZoneFail: on_failure(e, true); break;
            case EventKind::NodeAdd: on_node_add(e); break;
            case EventKind::NodeRemove: on_node_remove(e); break;
            case EventKind::MetricTick: on_metric_tick(); break;
            case EventKind::AgentTick: on_agent_tick(); break;
        }
    }

    void admit(std::vector<Pod> pods, const std::optional<PodGroup>& group) {
        std::vector<PodId> ids;
        if (group) state_.add_group(*group);
        for (Pod& p : pods) {
            const PodId id = p.id;
            const QueueId q = p.queue_id;
            state_.add_pod(std::move(p));
            queues_.push(q, id);
            pending_since_[id] = now_;
            ids.push_back(id);
            ++report_.arrived;
        }
        json extra = json::object();
        if (group) {
            extra["group"] = group->id;
            extra["min_member"] = group->min_member;
        }
        emit_event("arrival", ids, std::move(extra));
    }

    void on_arrival(const Arrival& a) {
        ArrivalBatch batch = instantiate(sc_.workload.templates[a.template_index], a);
        admit(std::move(batch.pods), batch.group);
    }

    void add_replica(std::size_t service) {
        ServiceState& s = services_[service];
        const PodId id = s.spec->name + "-r" + std::to_string(s.created++);
        Pod p = make_pod(*s.tmpl, id, now_, std::numeric_limits<double>::infinity());
        p.labels["service"] = s.spec->name;
        s.replicas.push_back(id);
        replica_of_[id] = service;
        std::vector<Pod> pods;
        pods.push_back(std::move(p));
        admit(std::move(pods), std::nullopt);
    }

    // Terminates a pod that will not run again. It must be Pending or bound.
    void retire(const PodId& pod) {
        const Pod& p = state_.pod(pod);
        if (p.state == PodState::Pending) {
            queues_.remove(pod);
        } else {
            const Resources r = p.requests;
            const QueueId q = p.queue_id;
            state_.release(pod, PodState::Completed);
            queues_.refund(q, r);
        }
        if (auto it = replica_of_.find(pod); it != replica_of_.end()) {
            auto& reps = services_[it->second].replicas;
            reps.erase(std::remove(reps.begin(), reps.end(), pod), reps.end());
            replica_of_.erase(it);
        }
        state_.erase_pod(pod);
        forget(pod);
        ++report_.completed;
        dirty_ = true;
    }

    void on_complete(const SimEvent& e) {
        std::vector<PodId> done;
        if (e.index == kGroupCompletion) {
            const GroupId& gid = e.subject;
            if (!group_running_.contains(gid) || group_epoch_[gid] != e.epoch) return;
            const PodGroup* g = state_.group(gid);
            if (g == nullptr) return;
            double arrival = now_;
            for (const PodId& m : g->member_ids) {
                if (state_.has_pod(m)) {
                    arrival = std::min(arrival, state_.pod(m).arrival_time);
                    done.push_back(m);
                }
            }
            group_running_.erase(gid);
            report_.job_completion_times.push_back(now_ - arrival);
        } else {
            const PodId& pid = e.subject;
            if (!state_.has_pod(pid) || pod_epoch_[pid] != e.epoch || state_.pod(pid).state != PodState::Running) return;
            report_.job_completion_times.push_back(now_ - state_.pod(pid).arrival_time);
            done.push_back(pid);
        }
        for (const PodId& p : done) retire(p);
        emit_event("complete", done);
    }

    void on_failure(const SimEvent& e, bool zone) {
        const bool exists = zone ? std::any_of(state_.nodes().begin(), state_.nodes().end(),
                                               [&e](const auto& kv) { return kv.second.label("zone") == e.subject; })
                                 : state_.has_node(e.subject);
        if (!exists) {
            emit_event("failure_skipped", {}, json{{"target", e.subject}});
            return;
        }
        std::vector<Node> lost;
        for (const auto& [id, n] : state_.nodes()) {
            if (zone ? n.label("zone") == e.subject : id == e.subject) lost.push_back(n);
        }
        const FailureResult r = inject_failure(state_, queues_, e.subject, zone);
        for (const PodId& p : r.requeued) on_requeued(p);
        report_.failures_requeued += r.requeued.size();
        for (const NodeId& n : r.removed) underutil_since_.erase(n);
        if (const auto& after = sc_.failures[e.index].recover_after) {
            for (Node& n : lost) {
                const NodeId id = n.id;
                recovering_[id] = std::move(n);
                push(now_ + *after, EventKind::NodeAdd, id);
            }
        }
        emit_event(zone ? "zone_fail" : "node_fail", r.requeued, json{{"target", e.subject}, {"nodes", r.removed}});
        dirty_ = true;
    }

    void on_node_add(const SimEvent& e) {
        Node node;
        if (auto it = recovering_.find(e.subject); !e.subject.empty() && it != recovering_.end()) {
            node = std::move(it->second);
            recovering_.erase(it);
            if (state_.has_node(node.id)) return;
        } else {
            --ca_provisioning_;
            const NodeGroupSpec& shape = sc_.node_group(sc_.ca.node_group);
            int& index = next_node_index_[shape.name];
            node = shape.make_node(index++);
            while (state_.has_node(node.id)) node = shape.make_node(index++);
            ++report_.nodes_added;
        }
        const NodeId id = node.id;
        state_.add_node(std::move(node));
        emit_event("node_add", {}, json{{"node", id}});
        dirty_ = true;
    }

    void on_node_remove(const SimEvent& e) {
        if (!state_.has_node(e.subject)) return;
        std::set<PodId> drained;
        for (const PodId& p : state_.pods_on(e.subject)) {
            for (PodId& m : eviction_unit(state_, p)) drained.insert(std::move(m));
        }
        for (const PodId& p : drained) {
            evict_and_requeue(p, PodState::Preempted, queues_, state_);
            on_requeued(p);
        }
        state_.remove_node(e.subject);
        underutil_since_.erase(e.subject);
        ++report_.nodes_removed;
        emit_event("drain", {drained.begin(), drained.end()}, json{{"node", e.subject}});
        dirty_ = true;
    }

    void on_metric_tick() {
        record_metrics();
        if (sc_.hpa_enabled) run_hpa();
        if (sc_.ca.enabled) run_ca();
        if (sc_.scheduler.defragment_interval > 0.0 && now_ - last_defrag_ >= sc_.scheduler.defragment_interval) {
            run_defrag();
        }
        if (now_ + sc_.metric_interval <= sc_.duration) push(now_ + sc_.metric_interval, EventKind::MetricTick);
    }

    void record_metrics() {
        MetricsRow row;
        row.time = now_;
        const Resources cap = state_.total_capacity();
        const Resources used = state_.total_used();
        auto ratio = [](std::int64_t a, std::int64_t b) { return b > 0 ? static_cast<double>(a) / b : 0.0; };
        row.cpu_util = ratio(used.cpu, cap.cpu);
        row.mem_util = ratio(used.memory, cap.memory);
        row.gpu_util = ratio(used.gpu, cap.gpu);
        row.pending = queues_.size();
        row.nodes = state_.nodes().size();
        std::int64_t pending_cpu = 0;
        for (const auto& [id, p] : state_.pods()) {
            if (p.state == PodState::Scheduled || p.state == PodState::Running) ++row.running;
            if (p.state == PodState::Pending) pending_cpu += p.requests.cpu;
        }
        row.fragmentation = fragmentation_score(state_);
        double lo = 1.0;
        double hi = 0.0;
        for (const auto& [id, n] : state_.nodes()) {
            const double u = ratio(n.capacity.cpu - state_.free(id).cpu, n.capacity.cpu);
            lo = std::min(lo, u);
            hi = std::max(hi, u);
        }
        row.imbalance = state_.nodes().empty() ? 0.0 : hi - lo;
        row.preemptions = report_.preemptions;
        if (!pending_since_.empty()) {
            double total = 0.0;
            for (const auto& [p, since] : pending_since_) total += now_ - since;
            row.mean_pending_delay = total / static_cast<double>(pending_since_.size());
        }
        row.profile = profile_;
        samples_.push_back(TickSample{row.cpu_util, row.mean_pending_delay});
        load_history_.push_back(ratio(used.cpu + pending_cpu, cap.cpu));
        report_.rows.push_back(std::move(row));
    }

    void run_hpa() {
        for (std::size_t i = 0; i < services_.size(); ++i) {
            ServiceState& s = services_[i];
            const ServiceSpec& spec = *s.spec;
            const int current = std::max<int>(1, static_cast<int>(s.replicas.size()));
            const double util = spec.load_at(now_) / (current * spec.capacity_per_replica);
            std::optional<double> mem_util;
            if (spec.target_memory_utilization) mem_util = util * spec.memory_per_cpu_utilization;
            const int desired = hpa_desired_replicas(current, util, spec.target_cpu_utilization, mem_util,
                                                     spec.target_memory_utilization, spec.min_replicas,
                                                     spec.max_replicas);
            const int have = static_cast<int>(s.replicas.size());
            if (desired > have) {
                for (int k = have; k < desired; ++k) add_replica(i);
            } else if (desired < have) {
                // Pending replicas go first, newest first; then bound ones, newest first.
                std::vector<PodId> order;
                for (auto it = s.replicas.rbegin(); it != s.replicas.rend(); ++it) {
                    if (state_.pod(*it).state == PodState::Pending) order.push_back(*it);
                }
                for (auto it = s.replicas.rbegin(); it != s.replicas.rend(); ++it) {
                    if (state_.pod(*it).state != PodState::Pending) order.push_back(*it);
                }
                order.resize(static_cast<std::size_t>(have - desired));
                for (const PodId& p : order) retire(p);
                emit_event("scale_down", order, json{{"service", spec.name}});
            }
        }
    }

    void run_ca() {
        for (const auto& [id, n] : state_.nodes()) {
            if (node_utilization(state_, id) < sc_.ca.scale_down_utilization) {
                underutil_since_.emplace(id, now_);
            } else {
                underutil_since_.erase(id);
            }
        }
        const NodeGroupSpec& shape = sc_.node_group(sc_.ca.node_group);
        for (int guard = 0; guard <= sc_.ca.max_nodes; ++guard) {
            CaObservation obs{now_, blocked_since_, underutil_since_, ca_provisioning_};
            const CaDecision d = ca_decide(state_, obs, sc_.ca, shape);
            if (d.kind == CaDecision::Kind::AddNode) {
                ++ca_provisioning_;
                push(now_ + sc_.ca.provision_delay, EventKind::NodeAdd);
                emit_event("scale_up", {}, json{{"node_group", shape.name}, {"reason", d.reason}});
                continue;
            }
            if (d.kind == CaDecision::Kind::RemoveNode) {
                SimEvent removal{now_, EventKind::NodeRemove, seq_++, d.node, 0, 0};
                on_node_remove(removal);
            }
            break;
        }
    }

    void run_defrag() {
        last_defrag_ = now_;
        DefragRecord rec;
        rec.time = now_;
        rec.before = fragmentation_score(state_);
        const std::vector<Migration> plan = defragment(state_);
        if (!plan.empty()) {
            apply_plan(plan, state_);
            json moves = json::array();
            std::vector<PodId> pods;
            for (const auto& m : plan) {
                moves.push_back(json{{"pod", m.pod}, {"from", m.from}, {"to", m.to}});
                pods.push_back(m.pod);
            }
            emit_event("migrate", pods, json{{"moves", moves}});
            dirty_ = true;
        }
        rec.after = fragmentation_score(state_);
        rec.migrations = plan.size();
        report_.migrations += plan.size();
        report_.defrag.push_back(rec);
    }

    void on_agent_tick() {
        const double current = load_history_.empty() ? 0.0 : load_history_.back();
        double forecast = current;
        if (load_history_.size() >= static_cast<std::size_t>(sc_.rl.forecast_window)) {
            const ForecastModel m =
                fit_forecast(load_history_, sc_.rl.forecast, sc_.rl.forecast_window, sc_.rl.forecast_alpha);
            const int horizon = std::max(1, static_cast<int>(std::lround(sc_.agent_interval / sc_.metric_interval)));
            forecast = predict_load(m, horizon);
        }
        const DiscreteState s = featurize_state(state_, queues_, forecast, current);
        const bool training = sc_.mode == PolicyMode::RlTrain;

        json rec{{"type", "agent"}, {"time", now_}, {"state", s.label()}};
        if (last_ && !samples_.empty()) {
            const double reward = compute_reward(samples_, sc_.reward);
            report_.rewards.push_back(reward);
            rec["reward"] = reward;
            if (training) q_update(*policy_, last_->first, last_->second, reward, s);
        }
        samples_.clear();

        const std::size_t action = training ? select_action(*policy_, s, rl_rng_) : policy_->greedy(s);
        profile_ = policy_->actions().at(action);
        last_ = std::make_pair(s, action);
        rec["action"] = profile_;
        emit(rec);
        if (now_ + sc_.agent_interval <= sc_.duration) push(now_ + sc_.agent_interval, EventKind::AgentTick);
    }

    // ---- scheduling ----

    void schedule_pending() {
        for (int pass = 0; pass < 2; ++pass) {
            if (dirty_) {
                queues_.unpark_all();
                dirty_ = false;
            }
            for (;;) {
                bool bound_any = false;
                while (auto d = scheduler_.schedule_one(queues_, state_, profile())) {
                    bound_any |= d->bound();
                    on_decision(*d);
                }
                if (!bound_any) break;
                // New bindings can satisfy parked pods' hard affinity terms.
                std::size_t unparked = 0;
                queues_.unpark_if([this, &unparked](const PodId& p) {
                    const auto& aff = state_.pod(p).affinity;
                    const bool hard = std::any_of(aff.begin(), aff.end(), [](const AffinityTerm& t) { return t.hard; });
                    unparked += hard ? 1 : 0;
                    return hard;
                });
                if (unparked == 0) break;
            }
            if (!defrag_requested_) break;
            defrag_requested_ = false;
            const std::size_t before = report_.migrations;
            run_defrag();
            if (report_.migrations == before) break;
        }
    }

    void on_decision(const ScheduleDecision& d) {
        ++report_.decisions;
        json rec{{"type", "decision"}, {"time", now_}, {"pod", d.pod}, {"outcome", to_string(d.outcome)}};
        rec["node"] = d.node ? json(*d.node) : json(nullptr);
        json scores = json::array();
        for (const auto& r : d.scores) scores.push_back(json{{"node", r.node}, {"score", r.total}});
        rec["scores"] = std::move(scores);
        rec["victims"] = d.victims;
        if (!d.reason.empty()) rec["reason"] = d.reason;
        if (d.group) rec["group"] = *d.group;
        if (!d.placements.empty()) rec["placements"] = d.placements;
        if (!d.predicate_failures.empty()) rec["predicate_failures"] = d.predicate_failures;
        emit(rec);

        for (const PodId& v : d.victims) {
            ++report_.preemptions;
            on_requeued(v);
        }
        switch (d.outcome) {
            case Outcome::Bound:
            case Outcome::PreemptedAndBound: on_bound(d.pod); break;
            case Outcome::GangBound:
                for (const auto& [p, n] : d.placements) on_bound(p);
                break;
            case Outcome::Unschedulable:
                blocked_since_.emplace(d.pod, now_);
                if (sc_.scheduler.defragment_on_gpu_unschedulable && state_.pod(d.pod).requests.gpu > 0) {
                    defrag_requested_ = true;
                }
                break;
            case Outcome::GangDeferred:
                if (d.group) {
                    if (const PodGroup* g = state_.group(*d.group)) {
                        for (const PodId& m : pending_members(*g, state_)) blocked_since_.emplace(m, now_);
                    }
                }
                break;
        }
    }

    void on_bound(const PodId& pid) {
        const Pod& p = state_.pod(pid);
        report_.scheduling_delay.emplace(pid, now_ - p.arrival_time);
        pending_since_.erase(pid);
        blocked_since_.erase(pid);

        if (!p.group_id) {
            state_.start(pid);
            if (std::isfinite(p.duration)) push(now_ + p.duration, EventKind::PodComplete, pid, pod_epoch_[pid]);
            return;
        }
        const GroupId gid = *p.group_id;
        if (group_running_.contains(gid)) {
            if (p.state == PodState::Scheduled) state_.start(pid);
            return;
        }
        const PodGroup* g = state_.group(gid);
        std::vector<PodId> waiting;
        for (const PodId& m : g->member_ids) {
            if (state_.has_pod(m) && state_.pod(m).state == PodState::Scheduled) waiting.push_back(m);
        }
        if (static_cast<int>(waiting.size()) < g->min_member) return;
        for (const PodId& m : waiting) state_.start(m);
        group_running_.insert(gid);
        if (std::isfinite(p.duration)) {
            push(now_ + p.duration, EventKind::PodComplete, gid, group_epoch_[gid], kGroupCompletion);
        }
    }

    const Scenario& sc_;
    RunOptions opts_;
    ClusterState state_;
    PendingQueues queues_;
    Scheduler scheduler_;
    std::string profile_;

    std::priority_queue<SimEvent, std::vector<SimEvent>, EventLater> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::vector<Arrival> arrivals_;

    MetricsReport report_;
    std::vector<std::string> trace_;

    std::map<PodId, std::uint64_t> pod_epoch_;
    std::map<GroupId, std::uint64_t> group_epoch_;
    std::set<GroupId> group_running_;
    std::map<PodId, double> pending_since_;
    std::map<PodId, double> blocked_since_;
    std::map<NodeId, double> underutil_since_;
    std::map<NodeId, Node> recovering_;
    std::map<std::string, int> next_node_index_;
    int ca_provisioning_ = 0;
    bool dirty_ = false;
    bool defrag_requested_ = false;
    double last_defrag_ = 0.0;

    std::vector<ServiceState> services_;
    std::map<PodId, std::size_t> replica_of_;

    PolicyState* policy_ = nullptr;
    std::optional<PolicyState> owned_policy_;
    Rng rl_rng_;
    std::vector<double> load_history_;
    std::vector<TickSample> samples_;
    std::optional<std::pair<DiscreteState, std::size_t>> last_;
};

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
    Simulation sim(scenario, options);
    return sim.run();
}

TrainingResult train_policy(const Scenario& scenario, int episodes, std::optional<PolicyState> initial) {
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    TrainingResult result;
    result.policy = initial ? std::move(*initial)
                            : PolicyState(scenario.rl.actions, scenario.rl.epsilon, scenario.rl.alpha, scenario.rl.gamma);
    Scenario s = scenario;
    s.mode = PolicyMode::RlTrain;
    for (int e = 0; e < episodes; ++e) {
        const double eps = std::max(scenario.rl.epsilon_min, scenario.rl.epsilon * std::pow(scenario.rl.epsilon_decay, e));
        result.policy.set_epsilon(eps);
        RunOptions opts;
        opts.policy = &result.policy;
        opts.rl_seed = scenario.seed + static_cast<std::uint64_t>(e) + 1;
        const RunResult run = run_scenario(s, opts);
        if (run.report.halted) throw Error("episode " + std::to_string(e) + " halted: " + run.report.halt_reason);
        EpisodeStats st;
        st.episode = e;
        st.epsilon = eps;
        st.total_reward = std::accumulate(run.report.rewards.begin(), run.report.rewards.end(), 0.0);
        st.mean_reward = run.report.rewards.empty() ? 0.0 : st.total_reward / static_cast<double>(run.report.rewards.size());
        result.episodes.push_back(st);
    }
    return result;
}

RunMode parse_mode(const std::string& text) {
    RunMode m;
    m.label = text;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t pos; (pos = text.find('/', start)) != std::string::npos; start = pos + 1) {
        parts.push_back(text.substr(start, pos - start));
    }
    parts.push_back(text.substr(start));

    const std::string& head = parts.front();
    if (head == "scenario") {
        m.from_scenario = true;
    } else if (head.starts_with("static:") && head.size() > 7) {
        m.policy = PolicyMode::Static;
        m.profile = head.substr(7);
    } else if (head.starts_with("rl:") && head.size() > 3) {
        m.policy = PolicyMode::RlEval;
        m.policy_file = head.substr(3);
    } else {
        throw ConfigError("bad mode '" + text + "': expected static:<profile>, rl:<policy file> or scenario");
    }
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        const std::string key = parts[i].substr(0, eq);
        const std::string value = eq == std::string::npos ? "" : parts[i].substr(eq + 1);
        if (value != "on" && value != "off") throw ConfigError("bad mode option '" + parts[i] + "': expected on or off");
        const bool on = value == "on";
        if (key == "ca") {
            m.ca = on;
        } else if (key == "gang") {
            m.gang = on;
        } else if (key == "defrag") {
            m.defrag = on;
        } else {
            throw ConfigError("unknown mode option '" + key + "'");
        }
    }
    return m;
}

Scenario apply_mode(const Scenario& scenario, const RunMode& mode) {
    Scenario s = scenario;
    if (!mode.from_scenario) {
        s.mode = mode.policy;
        if (mode.policy == PolicyMode::Static) s.profile = mode.profile;
        if (mode.policy_file) s.policy_file = *mode.policy_file;
    }
    if (mode.ca) {
        if (*mode.ca && s.ca.node_group.empty()) throw ConfigError("mode '" + mode.label + "' enables CA without a node group");
        s.ca.enabled = *mode.ca;
    }
    if (mode.gang) s.scheduler.gang = *mode.gang;
    if (mode.defrag) {
        if (*mode.defrag) {
            if (s.scheduler.defragment_interval <= 0.0) s.scheduler.defragment_interval = 10.0 * s.metric_interval;
        } else {
            s.scheduler.defragment_interval = 0.0;
            s.scheduler.defragment_on_gpu_unschedulable = false;
        }
    }
    validate_scenario(s);
    return s;
}

std::vector<ComparisonRow> compare_runs(const Scenario& scenario, const std::vector<std::string>& modes) {
    if (modes.size() < 2) throw ConfigError("compare needs at least two modes");
    std::vector<Scenario> variants;
    for (const auto& m : modes) variants.push_back(apply_mode(scenario, parse_mode(m)));

    std::vector<std::future<RunResult>> futures;
    for (const auto& v : variants) {
        futures.push_back(std::async(std::launch::async, [&v] { return run_scenario(v); }));
    }
    std::vector<ComparisonRow> rows;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const RunResult r = futures[i].get();
        ComparisonRow row;
        row.mode = modes[i];
        row.summary = summarize(r.report);
        row.completed = r.report.completed;
        row.preemptions = r.report.preemptions;
        row.nodes_added = r.report.nodes_added;
        row.halted = r.report.halted;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace orchestra
