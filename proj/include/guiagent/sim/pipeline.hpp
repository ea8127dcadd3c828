#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "guiagent/policy.hpp"
#include "guiagent/sim/world.hpp"

namespace guiagent::sim {

// End-to-end pipeline wiring: memory injection, experience match/replay,
// then per step [ensemble propose -> calibrate -> execute] until a terminal
// status or the step cap. need_feedback pauses for the scripted responder.

struct TraceLog {
    std::vector<nlohmann::ordered_json> records;

    void append(nlohmann::ordered_json record) { records.push_back(std::move(record)); }
    std::string to_jsonl() const;
};

// Hands out scripted replies for need_feedback requests, consuming each
// rule's reply list in order. Absent rules (or exhausted lists) decline.
class FeedbackResponder {
public:
    explicit FeedbackResponder(const std::vector<FeedbackRule>& rules) : rules_(rules) {}

    const FeedbackRule* rule_for(const std::string& request) const;
    std::optional<std::string> next_reply(const std::string& request);

private:
    const std::vector<FeedbackRule>& rules_;
    std::map<std::string, std::size_t> consumed_;
};

struct PipelineOptions {
    int ensemble_n = 1;
    std::vector<std::uint64_t> seeds; // per-agent jitter seeds; derived from world seed if empty
    int jitter_amplitude = 15;        // applied when ensemble_n > 1
    bool use_experience = true;
    bool validated_replay = true;
    bool archive = true;
    std::optional<std::pair<std::string, nlohmann::ordered_json>> function_call;
    std::string policy_key; // script lookup override; defaults to the instruction
};

struct PipelineResult {
    TaskStatus final_status = TaskStatus::Impossible;
    bool replay_route = false;
    bool function_route = false;
    int steps = 0;              // executed actions / calls
    long ticks = 0;             // world-clock ticks consumed by this run
    long policy_invocations = 0; // policy calls made during this run
};

// Runs one instruction on one device. Mutates world state (screens, memory,
// experience pool, failure memory, clock) and appends one record per step to
// the trace, plus a final session record.
PipelineResult run_pipeline(World& world, const std::string& device_id,
                            const std::string& instruction, const PipelineOptions& options,
                            TraceLog& trace);

struct CrossDeviceResult {
    PlanResult plan_result;
    std::vector<nlohmann::ordered_json> plan_events; // transitions + bus send/deliver
    std::map<std::string, TraceLog> device_traces;
};

// Centralized planning, per-device execution. Subtask completion crosses
// devices through an ordered, reliable, asynchronous message bus (delivery =
// send tick + 1); a subtask whose predecessor ran elsewhere starts only after
// that predecessor's completion message has been delivered to its device.
CrossDeviceResult run_cross_device(World& world, const AllocatedPlan& plan,
                                   const PipelineOptions& options);

} // namespace guiagent::sim
