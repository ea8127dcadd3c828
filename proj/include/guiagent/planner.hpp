#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "guiagent/errors.hpp"

namespace guiagent {

// Task dependency graph, endpoint allocation, and the state-synchronization
// rule: a subtask may start only when every predecessor is Completed.

enum class PlannerErrc {
    CycleDetected,
    DanglingEdge,
    PartialAllocation,
    MixedEndpointKinds,
    UnknownEndpoint,
    UnknownSubtask,
    IllegalTransition,
    ExecutorError,
    UnclassifiableFeatureCombination,
};
using PlannerError = CodedError<PlannerErrc>;

struct Subtask {
    std::string id;
    std::string description;
};

class TaskGraph {
public:
    TaskGraph() = default;

    const std::vector<Subtask>& subtasks() const { return subtasks_; }
    const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
    bool has_subtask(const std::string& id) const { return index_.count(id) > 0; }
    const Subtask& subtask(const std::string& id) const;

    std::vector<std::string> predecessors(const std::string& id) const;
    // Transitive closure of out-edges from `id` (excluding `id` itself).
    std::set<std::string> descendants(const std::string& id) const;

private:
    friend TaskGraph build_graph(std::vector<Subtask>,
                                 std::vector<std::pair<std::string, std::string>>);
    std::vector<Subtask> subtasks_;
    std::vector<std::pair<std::string, std::string>> edges_;
    std::map<std::string, std::size_t> index_;
};

// Validates edge endpoints and acyclicity (Kahn). CycleDetected carries one
// witness cycle in the message.
TaskGraph build_graph(std::vector<Subtask> subtasks,
                      std::vector<std::pair<std::string, std::string>> edges);

enum class EndpointKind { Device, App };

struct Endpoint {
    std::string id;
    EndpointKind kind = EndpointKind::Device;
};

struct AllocatedPlan {
    TaskGraph graph;
    std::map<std::string, std::string> allocation; // subtask id -> endpoint id, total
    std::vector<Endpoint> endpoints;               // homogeneous kind within one plan

    const std::string& endpoint_of(const std::string& subtask_id) const {
        return allocation.at(subtask_id);
    }
};

// Requires a total mapping onto known endpoints of one kind. A single-device
// plan uses App endpoints (the k=1 reduction); multi-device plans use Device
// endpoints.
AllocatedPlan allocate(TaskGraph graph, std::map<std::string, std::string> mapping,
                       std::vector<Endpoint> endpoints);

enum class SubtaskState { Pending, Running, Completed, Failed, Skipped };
const char* to_string(SubtaskState s);

struct StatusEvent {
    long tick = 0;
    std::string subtask;
    SubtaskState to = SubtaskState::Pending;
};

// Per-subtask status plus the append-only transition log. Transitions are
// linearized by the scheduler (single logical writer).
class PlanStatus {
public:
    explicit PlanStatus(const TaskGraph& graph);

    // Rebuilds a status snapshot (e.g. when resuming a persisted plan). The
    // event log starts empty.
    static PlanStatus restore(const TaskGraph& graph,
                              const std::map<std::string, SubtaskState>& states);

    SubtaskState state(const std::string& id) const;
    const std::vector<StatusEvent>& events() const { return events_; }
    bool all_completed() const;
    bool any_failed() const;

private:
    friend void advance(PlanStatus&, const TaskGraph&, const std::string&, SubtaskState, long);
    std::map<std::string, SubtaskState> state_;
    std::vector<StatusEvent> events_;
};

// Subtasks eligible to start: Pending with every predecessor Completed.
std::set<std::string> ready_set(const AllocatedPlan& plan, const PlanStatus& status);

// Applies one transition (to Running, Completed or Failed). Failing a subtask
// marks its descendant closure Skipped. Throws IllegalTransition for anything
// outside Pending->Running->{Completed,Failed}.
void advance(PlanStatus& status, const TaskGraph& graph, const std::string& subtask,
             SubtaskState to, long tick);

enum class PlanOutcome { Completed, Failed };

struct PlanResult {
    PlanOutcome outcome = PlanOutcome::Completed;
    PlanStatus status;
};

// Executor callback: run one subtask on its endpoint, return true on success.
// Thrown exceptions are wrapped as subtask failure.
using SubtaskExecutor = std::function<bool(const std::string& endpoint, const Subtask&)>;

// Drives ready_set/advance to quiescence with a logical event clock. Each
// round starts every ready subtask (in graph order) before collecting their
// results, so independent subtasks overlap in the event log exactly as a
// concurrent scheduler would order them.
PlanResult run_plan(const AllocatedPlan& plan, const SubtaskExecutor& executor);

// ---------------------------------------------------------------------------
// Cross-task taxonomy
// ---------------------------------------------------------------------------

enum class AppTaskClass { PassiveLinkage, DataPassing, CollaborativeMulti };
enum class SyncMode { Realtime, Async };
enum class RoleRelation { MasterSlave, Peer };
enum class DeviceQuadrant { I, II, III, IV };

const char* to_string(AppTaskClass c);
const char* to_string(DeviceQuadrant q);

struct CrossTaskFeatures {
    bool needs_memory = false;
    bool proactive_switch = false;
    bool linear_flow = true;
    std::optional<SyncMode> sync;
    std::optional<RoleRelation> roles;
};

struct CrossTaskClass {
    std::optional<AppTaskClass> app_class;
    std::optional<DeviceQuadrant> device_class;
    bool executable = true; // collaborative multi-tasks and realtime quadrants are not
};

// App class from the three-dimension feature table; device quadrant from
// sync mode x role relationship when those dimensions are given.
CrossTaskClass classify_cross_task(const CrossTaskFeatures& features);

// ---------------------------------------------------------------------------
// Plan files and event logs
// ---------------------------------------------------------------------------

// Plan file: JSON {subtasks:[{id,description}], edges:[[from,to]],
// allocation:{id:endpoint}, endpoints:[{id,kind}]}.
AllocatedPlan load_plan(const std::string& plan_json);
std::string save_plan(const AllocatedPlan& plan);

// Event log: one JSON line {"tick":t,"subtask":id,"transition":state} per event.
std::string event_log_lines(const std::vector<StatusEvent>& events);

} // namespace guiagent
