#include "guiagent/sim/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "guiagent/ensemble.hpp"

namespace guiagent::sim {
namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json action_json(const Action& a) {
    return ordered_json::parse(serialize_action(a));
}

ordered_json proposal_json(const Proposal& p) {
    ordered_json out;
    out["agent"] = p.agent_index;
    out["action"] = action_json(p.action);
    out["thought"] = p.thought;
    return out;
}

ordered_json decision_json(const EnsembleDecision& d) {
    ordered_json out;
    out["action"] = action_json(d.action);
    out["source_agent"] = d.source_agent;
    out["thought"] = d.thought;
    ordered_json tally = ordered_json::object();
    for (const auto& [type, count] : d.vote_tally) tally[to_string(type)] = count;
    out["tally"] = tally;
    return out;
}

ordered_json calibration_json(const CorrectionOutcome& c) {
    ordered_json out;
    out["verdict"] = to_string(c.verdict);
    out["final"] = {c.final_point.x, c.final_point.y};
    if (c.chosen_box) {
        out["chosen_box"] = {c.chosen_box->x1, c.chosen_box->y1, c.chosen_box->x2,
                             c.chosen_box->y2};
    }
    if (c.distance) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *c.distance);
        out["distance"] = std::string(buf);
    }
    return out;
}

std::string slot_key(const Slot& s) { return s.relation + "." + s.field; }

// Replay adapter that logs one trace record per executed step.
class TracingReplayEnv : public ReplayEnv {
public:
    TracingReplayEnv(World& world, const std::string& device_id, TraceLog& trace)
        : world_(world), device_id_(device_id), trace_(trace) {}

    std::uint64_t current_digest() override {
        return hash_screen(world_.device(device_id_).fg.screen);
    }

    void execute(const Action& action) override {
        StepResult step = step_device(world_, device_id_, action);
        world_.clock += world_.config.action_ticks;
        ordered_json rec;
        rec["tick"] = world_.clock;
        rec["device"] = device_id_;
        rec["digest"] = digest_hex(step.pre_digest);
        rec["mode"] = "replay";
        rec["step"] = steps_;
        rec["executed"] = action_json(action);
        rec["state_changed"] = step.state_changed;
        trace_.append(std::move(rec));
        ++steps_;
    }

    int steps() const { return steps_; }

private:
    World& world_;
    std::string device_id_;
    TraceLog& trace_;
    int steps_ = 0;
};

} // namespace

std::string TraceLog::to_jsonl() const {
    std::string out;
    for (const auto& rec : records) out += rec.dump() + "\n";
    return out;
}

const FeedbackRule* FeedbackResponder::rule_for(const std::string& request) const {
    for (const auto& r : rules_) {
        if (r.request == request) return &r;
    }
    return nullptr;
}

std::optional<std::string> FeedbackResponder::next_reply(const std::string& request) {
    const FeedbackRule* rule = rule_for(request);
    if (!rule) return std::nullopt;
    std::size_t& used = consumed_[request];
    if (used >= rule->replies.size()) return std::nullopt;
    return rule->replies[used++];
}

PipelineResult run_pipeline(World& world, const std::string& device_id,
                            const std::string& instruction, const PipelineOptions& options,
                            TraceLog& trace) {
    PipelineResult result;
    const long start_clock = world.clock;
    const long start_invocations = world.policy_invocations;
    SimDevice& dev = world.device(device_id);

    auto session_record = [&](const char* route) {
        ordered_json rec;
        rec["session"] = ordered_json::object();
        rec["session"]["device"] = device_id;
        rec["session"]["instruction"] = instruction;
        rec["session"]["route"] = route;
        rec["session"]["final_status"] = to_string(result.final_status);
        rec["session"]["steps"] = result.steps;
        rec["session"]["ticks"] = result.ticks;
        rec["session"]["policy_invocations"] = result.policy_invocations;
        trace.append(std::move(rec));
    };

    // Function-call route: user-selected tool, one deterministic step.
    TaskRoute route = plan_path(options.function_call, world.registry);
    if (route.kind == TaskRoute::Kind::FunctionCall) {
        WorldToolHost host(world);
        ordered_json rec;
        rec["device"] = device_id;
        rec["digest"] = digest_hex(hash_screen(dev.fg.screen));
        rec["mode"] = "call";
        ordered_json executed;
        executed["CALL"] = route.call->function;
        executed["ARGS"] = route.call->args;
        rec["executed"] = executed;
        ordered_json tool_result = execute(*route.call, host); // ToolFault propagates
        world.clock += world.config.function_call_ticks;
        rec["tick"] = world.clock;
        rec["result"] = tool_result;
        rec["state_changed"] = true;
        trace.append(std::move(rec));

        result.final_status = TaskStatus::Finish;
        result.function_route = true;
        result.steps = 1;
        result.ticks = world.clock - start_clock;
        session_record("function_call");
        return result;
    }

    // Memory injection: resolve slots from the store (or the current screen).
    SlotLexicon lexicon;
    std::vector<Slot> slots = lexicon.parse_slots(instruction);
    ContextResolution context =
        inject_context(world.memory, instruction, slots, &dev.fg.screen, world.clock);

    // Experience match: replay the archived trajectory when the query matches.
    if (options.use_experience) {
        const ExperienceEntry* hit = world.pool.match(instruction);
        if (hit) {
            TracingReplayEnv env(world, device_id, trace);
            ReplayResult rr = replay(*hit, env, options.validated_replay);
            result.steps = env.steps();
            if (rr.completed) {
                result.final_status = TaskStatus::Finish;
                result.replay_route = true;
                result.ticks = world.clock - start_clock;
                result.policy_invocations = world.policy_invocations - start_invocations;
                session_record("replay");
                return result;
            }
            ordered_json rec;
            rec["tick"] = world.clock;
            rec["device"] = device_id;
            rec["mode"] = "replay_diverged";
            rec["step"] = static_cast<long>(*rr.diverged_at);
            rec["expected_digest"] = digest_hex(hit->steps[*rr.diverged_at].pre_digest);
            rec["observed_digest"] = digest_hex(hash_screen(dev.fg.screen));
            trace.append(std::move(rec));
            // fall through to the standard pipeline from the current state
        }
    }

    // Standard route: scripted policies behind the model interface.
    const std::string& script =
        world.script_for(options.policy_key.empty() ? instruction : options.policy_key);
    PolicyFactory factory = [&](int agent_index, std::uint64_t seed) -> std::unique_ptr<Policy> {
        auto base = std::make_unique<ScriptedPolicy>(agent_index, script);
        if (options.ensemble_n > 1) {
            return std::make_unique<JitterPolicy>(std::move(base), seed,
                                                  options.jitter_amplitude);
        }
        return base;
    };
    std::vector<std::uint64_t> seeds = options.seeds;
    if (seeds.empty()) {
        for (int i = 0; i < options.ensemble_n; ++i) {
            seeds.push_back(world.seed * 1000003ull + static_cast<std::uint64_t>(i));
        }
    }
    auto agents = spawn_ensemble(factory, options.ensemble_n, seeds);

    FeedbackResponder responder(world.feedback);
    StepContext ctx;
    ctx.instruction = instruction;
    ctx.context_block = context.context_block;
    for (const auto& [slot, value] : context.resolved) ctx.slots[slot_key(slot)] = value;

    std::vector<ExperienceStep> executed_steps;
    const long run_start_tick = world.clock;
    bool success = false;

    for (int round = 0; round < world.config.step_cap; ++round) {
        ctx.screen = &dev.fg.screen;
        const std::uint64_t pre_digest = hash_screen(dev.fg.screen);

        std::vector<Proposal> proposals;
        proposals.reserve(agents.size());
        for (auto& agent : agents) proposals.push_back(agent->propose(ctx));
        world.policy_invocations += static_cast<long>(agents.size());
        world.clock += world.config.policy_call_ticks; // agents run concurrently

        EnsembleDecision decision = decide(proposals);

        ordered_json rec;
        rec["device"] = device_id;
        rec["digest"] = digest_hex(pre_digest);
        rec["mode"] = "policy";
        rec["proposals"] = ordered_json::array();
        for (const auto& p : proposals) rec["proposals"].push_back(proposal_json(p));
        rec["decision"] = decision_json(decision);

        // need_feedback: pause for the scripted responder.
        if (decision.action.status && *decision.action.status == TaskStatus::NeedFeedback) {
            const std::string& request = decision.thought;
            const FeedbackRule* rule = responder.rule_for(request);
            std::optional<std::string> accepted;
            for (int attempt = 0; attempt < 2; ++attempt) { // re-prompt once on bad replies
                std::optional<std::string> reply = responder.next_reply(request);
                if (!reply) break;
                if (rule && rule->slot) {
                    try {
                        world.memory.update({rule->slot->relation, rule->slot->field, *reply},
                                            world.clock);
                    } catch (const MemoryError&) {
                        continue; // failed field validation, re-prompt
                    }
                    ctx.slots[slot_key(*rule->slot)] = *reply;
                }
                accepted = *reply;
                break;
            }
            world.clock += world.config.action_ticks;
            rec["tick"] = world.clock;
            rec["feedback_request"] = request;
            rec["executed"] = action_json(decision.action);
            rec["state_changed"] = false;
            if (accepted) {
                ctx.feedback[request] = *accepted;
                rec["feedback"] = "accepted";
                trace.append(std::move(rec));
                ctx.history.push_back({pre_digest, decision.action});
                continue;
            }
            rec["feedback"] = "declined";
            trace.append(std::move(rec));
            result.final_status = TaskStatus::Impossible;
            result.steps = static_cast<int>(executed_steps.size());
            result.ticks = world.clock - start_clock;
            result.policy_invocations = world.policy_invocations - start_invocations;
            session_record("policy");
            return result;
        }

        // Calibration applies to point-bearing, non-swipe actions.
        Action executed = decision.action;
        std::optional<CorrectionOutcome> correction;
        ActionIntent intent = intent_of(executed);
        if (executed.point && intent != ActionIntent::Swipe) {
            correction = correct_point(*executed.point, dev.fg.screen, world.failure_memory);
            executed.point = correction->final_point;
            rec["calibration"] = calibration_json(*correction);
        }

        StepResult step = step_device(world, device_id, executed);
        world.clock += world.config.action_ticks;
        if (correction && correction->verdict == CorrectionVerdict::Corrected &&
            !step.state_changed) {
            record_failure(world.failure_memory, step.pre_digest, correction->final_point);
        }

        rec["tick"] = world.clock;
        rec["executed"] = action_json(executed);
        rec["state_changed"] = step.state_changed;
        trace.append(std::move(rec));

        executed_steps.push_back({pre_digest, executed});
        ctx.history.push_back({pre_digest, executed});

        if (executed.status && *executed.status == TaskStatus::Finish) {
            success = true;
            result.final_status = TaskStatus::Finish;
            break;
        }
        if (executed.status && *executed.status == TaskStatus::Impossible) {
            result.final_status = TaskStatus::Impossible;
            break;
        }
        if (round + 1 == world.config.step_cap) {
            result.final_status = TaskStatus::Impossible; // step cap exceeded
        }
    }

    result.steps = static_cast<int>(executed_steps.size());
    result.ticks = world.clock - start_clock;
    result.policy_invocations = world.policy_invocations - start_invocations;

    if (success && options.archive) {
        ExperienceEntry entry;
        entry.query = instruction;
        entry.status = ExpStatus::Success;
        entry.steps = std::move(executed_steps);
        entry.start_tick = run_start_tick;
        entry.end_tick = world.clock;
        world.pool.archive(std::move(entry));
    }
    session_record("policy");
    return result;
}

CrossDeviceResult run_cross_device(World& world, const AllocatedPlan& plan,
                                   const PipelineOptions& options) {
    CrossDeviceResult out{PlanResult{PlanOutcome::Completed, PlanStatus(plan.graph)}, {}, {}};
    PlanStatus status(plan.graph);

    auto plan_event = [&](long tick, const std::string& subtask, const char* transition) {
        ordered_json rec;
        rec["tick"] = tick;
        rec["subtask"] = subtask;
        rec["transition"] = transition;
        out.plan_events.push_back(std::move(rec));
    };

    struct BusMessage {
        std::string from, to, subtask;
        ordered_json payload;
        long deliver_tick = 0;
        bool delivered = false;
    };
    std::vector<BusMessage> bus;

    // Completion messages for cross-endpoint edges that must arrive before a
    // subtask becomes eligible on its device.
    auto cross_preds_delivered = [&](const std::string& st) {
        for (const auto& pred : plan.graph.predecessors(st)) {
            if (plan.endpoint_of(pred) == plan.endpoint_of(st)) continue;
            bool ok = false;
            for (const auto& m : bus) {
                if (m.subtask == pred && m.to == plan.endpoint_of(st) && m.delivered) {
                    ok = true;
                    break;
                }
            }
            if (!ok) return false;
        }
        return true;
    };

    while (true) {
        // Deliver every message whose time has come.
        for (auto& m : bus) {
            if (!m.delivered && m.deliver_tick <= world.clock) {
                m.delivered = true;
                ordered_json rec;
                rec["tick"] = m.deliver_tick;
                rec["bus"] = "deliver";
                rec["subtask"] = m.subtask;
                rec["from"] = m.from;
                rec["to"] = m.to;
                out.plan_events.push_back(std::move(rec));
            }
        }

        std::set<std::string> ready = ready_set(plan, status);
        std::optional<std::string> next;
        for (const auto& st : plan.graph.subtasks()) { // graph order for determinism
            if (ready.count(st.id) && cross_preds_delivered(st.id)) {
                next = st.id;
                break;
            }
        }
        if (!next) {
            // Nothing eligible: advance the clock to the next delivery, if any.
            long nearest = -1;
            for (const auto& m : bus) {
                if (!m.delivered && (nearest < 0 || m.deliver_tick < nearest)) {
                    nearest = m.deliver_tick;
                }
            }
            if (nearest < 0) break;
            world.clock = std::max(world.clock, nearest);
            continue;
        }

        const std::string& st_id = *next;
        const std::string& endpoint = plan.endpoint_of(st_id);
        const std::string& device_id = world.executing_device(endpoint);

        advance(status, plan.graph, st_id, SubtaskState::Running, ++world.clock);
        plan_event(world.clock, st_id, "running");

        PipelineOptions sub_options = options;
        sub_options.policy_key = st_id; // per-subtask scripts, default fallback
        bool ok = false;
        try {
            PipelineResult r =
                run_pipeline(world, device_id, plan.graph.subtask(st_id).description,
                             sub_options, out.device_traces[device_id]);
            ok = r.final_status == TaskStatus::Finish;
        } catch (const std::exception&) {
            ok = false; // endpoint faults count as subtask failure
        }

        long done_tick = ++world.clock;
        advance(status, plan.graph, st_id, ok ? SubtaskState::Completed : SubtaskState::Failed,
                done_tick);
        plan_event(done_tick, st_id, ok ? "completed" : "failed");
        if (!ok) {
            for (const auto& d : plan.graph.descendants(st_id)) {
                if (status.state(d) == SubtaskState::Skipped) {
                    plan_event(done_tick, d, "skipped");
                }
            }
        }

        if (ok) {
            for (const auto& [from, to] : plan.graph.edges()) {
                if (from != st_id) continue;
                if (plan.endpoint_of(to) == plan.endpoint_of(st_id)) continue;
                BusMessage m;
                m.from = plan.endpoint_of(st_id);
                m.to = plan.endpoint_of(to);
                m.subtask = st_id;
                auto it = world.payloads.find(st_id);
                m.payload = it != world.payloads.end() ? it->second : ordered_json::object();
                m.deliver_tick = done_tick + 1; // reliable, ordered, asynchronous
                ordered_json rec;
                rec["tick"] = done_tick;
                rec["bus"] = "send";
                rec["subtask"] = st_id;
                rec["from"] = m.from;
                rec["to"] = m.to;
                rec["payload"] = m.payload;
                out.plan_events.push_back(std::move(rec));
                bus.push_back(std::move(m));
            }
        }
    }

    out.plan_result.outcome =
        status.all_completed() ? PlanOutcome::Completed : PlanOutcome::Failed;
    out.plan_result.status = std::move(status);
    return out;
}

} // namespace guiagent::sim
