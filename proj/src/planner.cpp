#include "guiagent/planner.hpp"

#include <algorithm>
#include <deque>

#include <json.hpp>

namespace guiagent {
namespace {

using ordered_json = nlohmann::ordered_json;

// Finds one directed cycle for the CycleDetected message.
std::string witness_cycle(const TaskGraph& g) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [from, to] : g.edges()) adj[from].push_back(to);

    std::map<std::string, int> mark; // 0 unvisited, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::string result;

    std::function<bool(const std::string&)> dfs = [&](const std::string& u) {
        mark[u] = 1;
        stack.push_back(u);
        for (const auto& v : adj[u]) {
            if (mark[v] == 1) {
                auto it = std::find(stack.begin(), stack.end(), v);
                for (; it != stack.end(); ++it) result += *it + " -> ";
                result += v;
                return true;
            }
            if (mark[v] == 0 && dfs(v)) return true;
        }
        stack.pop_back();
        mark[u] = 2;
        return false;
    };
    for (const auto& st : g.subtasks()) {
        if (mark[st.id] == 0 && dfs(st.id)) break;
    }
    return result;
}

} // namespace

const Subtask& TaskGraph::subtask(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw PlannerError(PlannerErrc::UnknownSubtask, "unknown subtask: " + id);
    }
    return subtasks_[it->second];
}

std::vector<std::string> TaskGraph::predecessors(const std::string& id) const {
    std::vector<std::string> preds;
    for (const auto& [from, to] : edges_) {
        if (to == id) preds.push_back(from);
    }
    return preds;
}

std::set<std::string> TaskGraph::descendants(const std::string& id) const {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [from, to] : edges_) adj[from].push_back(to);
    std::set<std::string> out;
    std::deque<std::string> frontier{id};
    while (!frontier.empty()) {
        std::string u = frontier.front();
        frontier.pop_front();
        for (const auto& v : adj[u]) {
            if (out.insert(v).second) frontier.push_back(v);
        }
    }
    out.erase(id);
    return out;
}

TaskGraph build_graph(std::vector<Subtask> subtasks,
                      std::vector<std::pair<std::string, std::string>> edges) {
    TaskGraph g;
    for (auto& st : subtasks) {
        if (g.index_.count(st.id)) {
            throw PlannerError(PlannerErrc::DanglingEdge, "duplicate subtask id: " + st.id);
        }
        g.index_[st.id] = g.subtasks_.size();
        g.subtasks_.push_back(std::move(st));
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (auto& e : edges) {
        if (!g.index_.count(e.first) || !g.index_.count(e.second)) {
            throw PlannerError(PlannerErrc::DanglingEdge,
                               "edge references unknown subtask: " + e.first + " -> " + e.second);
        }
        if (seen.insert(e).second) g.edges_.push_back(std::move(e));
    }

    // Kahn's algorithm: the graph is acyclic iff every node drains.
    std::map<std::string, int> indeg;
    for (const auto& st : g.subtasks_) indeg[st.id] = 0;
    for (const auto& [from, to] : g.edges_) indeg[to]++;
    std::deque<std::string> queue;
    for (const auto& st : g.subtasks_) {
        if (indeg[st.id] == 0) queue.push_back(st.id);
    }
    std::size_t drained = 0;
    while (!queue.empty()) {
        std::string u = queue.front();
        queue.pop_front();
        ++drained;
        for (const auto& [from, to] : g.edges_) {
            if (from == u && --indeg[to] == 0) queue.push_back(to);
        }
    }
    if (drained != g.subtasks_.size()) {
        throw PlannerError(PlannerErrc::CycleDetected, "cycle: " + witness_cycle(g));
    }
    return g;
}

AllocatedPlan allocate(TaskGraph graph, std::map<std::string, std::string> mapping,
                       std::vector<Endpoint> endpoints) {
    std::map<std::string, EndpointKind> known;
    for (const auto& ep : endpoints) known[ep.id] = ep.kind;
    if (!endpoints.empty()) {
        for (const auto& ep : endpoints) {
            if (ep.kind != endpoints.front().kind) {
                throw PlannerError(PlannerErrc::MixedEndpointKinds,
                                   "plan mixes device and app endpoints");
            }
        }
    }
    for (const auto& st : graph.subtasks()) {
        auto it = mapping.find(st.id);
        if (it == mapping.end()) {
            throw PlannerError(PlannerErrc::PartialAllocation,
                               "subtask not allocated: " + st.id);
        }
        if (!known.count(it->second)) {
            throw PlannerError(PlannerErrc::UnknownEndpoint, "unknown endpoint: " + it->second);
        }
    }
    return AllocatedPlan{std::move(graph), std::move(mapping), std::move(endpoints)};
}

const char* to_string(SubtaskState s) {
    switch (s) {
        case SubtaskState::Pending: return "pending";
        case SubtaskState::Running: return "running";
        case SubtaskState::Completed: return "completed";
        case SubtaskState::Failed: return "failed";
        case SubtaskState::Skipped: return "skipped";
    }
    return "?";
}

PlanStatus::PlanStatus(const TaskGraph& graph) {
    for (const auto& st : graph.subtasks()) state_[st.id] = SubtaskState::Pending;
}

PlanStatus PlanStatus::restore(const TaskGraph& graph,
                               const std::map<std::string, SubtaskState>& states) {
    PlanStatus status(graph);
    for (const auto& [id, st] : states) {
        if (!status.state_.count(id)) {
            throw PlannerError(PlannerErrc::UnknownSubtask, "unknown subtask: " + id);
        }
        status.state_[id] = st;
    }
    return status;
}

SubtaskState PlanStatus::state(const std::string& id) const {
    auto it = state_.find(id);
    if (it == state_.end()) {
        throw PlannerError(PlannerErrc::UnknownSubtask, "unknown subtask: " + id);
    }
    return it->second;
}

bool PlanStatus::all_completed() const {
    return std::all_of(state_.begin(), state_.end(),
                       [](const auto& kv) { return kv.second == SubtaskState::Completed; });
}

bool PlanStatus::any_failed() const {
    return std::any_of(state_.begin(), state_.end(),
                       [](const auto& kv) { return kv.second == SubtaskState::Failed; });
}

std::set<std::string> ready_set(const AllocatedPlan& plan, const PlanStatus& status) {
    std::set<std::string> ready;
    for (const auto& st : plan.graph.subtasks()) {
        if (status.state(st.id) != SubtaskState::Pending) continue;
        bool eligible = true;
        for (const auto& pred : plan.graph.predecessors(st.id)) {
            if (status.state(pred) != SubtaskState::Completed) {
                eligible = false;
                break;
            }
        }
        if (eligible) ready.insert(st.id);
    }
    return ready;
}

void advance(PlanStatus& status, const TaskGraph& graph, const std::string& subtask,
             SubtaskState to, long tick) {
    SubtaskState from = status.state(subtask);
    const bool legal = (from == SubtaskState::Pending && to == SubtaskState::Running) ||
                       (from == SubtaskState::Running &&
                        (to == SubtaskState::Completed || to == SubtaskState::Failed));
    if (!legal) {
        throw PlannerError(PlannerErrc::IllegalTransition,
                           subtask + ": " + to_string(from) + " -> " + to_string(to));
    }
    if (to == SubtaskState::Running) {
        for (const auto& pred : graph.predecessors(subtask)) {
            if (status.state(pred) != SubtaskState::Completed) {
                throw PlannerError(PlannerErrc::IllegalTransition,
                                   subtask + " cannot start: predecessor " + pred +
                                       " is " + to_string(status.state(pred)));
            }
        }
    }
    status.state_[subtask] = to;
    status.events_.push_back({tick, subtask, to});
    if (to == SubtaskState::Failed) {
        for (const auto& d : graph.descendants(subtask)) {
            if (status.state_[d] == SubtaskState::Pending) {
                status.state_[d] = SubtaskState::Skipped;
                status.events_.push_back({tick, d, SubtaskState::Skipped});
            }
        }
    }
}

PlanResult run_plan(const AllocatedPlan& plan, const SubtaskExecutor& executor) {
    PlanStatus status(plan.graph);
    long tick = 0;
    while (true) {
        std::set<std::string> ready = ready_set(plan, status);
        if (ready.empty()) break;

        // Start the whole wave before collecting results: this is the event
        // ordering a concurrent scheduler produces for independent subtasks.
        std::vector<std::string> wave;
        for (const auto& st : plan.graph.subtasks()) {
            if (ready.count(st.id)) wave.push_back(st.id);
        }
        for (const auto& id : wave) {
            advance(status, plan.graph, id, SubtaskState::Running, ++tick);
        }
        for (const auto& id : wave) {
            bool ok = false;
            try {
                ok = executor(plan.endpoint_of(id), plan.graph.subtask(id));
            } catch (const std::exception&) {
                ok = false; // endpoint faults count as subtask failure
            }
            advance(status, plan.graph, id, ok ? SubtaskState::Completed : SubtaskState::Failed,
                    ++tick);
        }
    }
    PlanOutcome outcome =
        status.all_completed() ? PlanOutcome::Completed : PlanOutcome::Failed;
    return PlanResult{outcome, std::move(status)};
}

const char* to_string(AppTaskClass c) {
    switch (c) {
        case AppTaskClass::PassiveLinkage: return "passive_linkage";
        case AppTaskClass::DataPassing: return "data_passing";
        case AppTaskClass::CollaborativeMulti: return "collaborative_multi";
    }
    return "?";
}

const char* to_string(DeviceQuadrant q) {
    switch (q) {
        case DeviceQuadrant::I: return "I";
        case DeviceQuadrant::II: return "II";
        case DeviceQuadrant::III: return "III";
        case DeviceQuadrant::IV: return "IV";
    }
    return "?";
}

CrossTaskClass classify_cross_task(const CrossTaskFeatures& f) {
    CrossTaskClass out;
    if (!f.needs_memory && !f.proactive_switch && f.linear_flow) {
        out.app_class = AppTaskClass::PassiveLinkage;
    } else if (f.needs_memory && f.proactive_switch && f.linear_flow) {
        out.app_class = AppTaskClass::DataPassing;
    } else if (f.needs_memory && f.proactive_switch && !f.linear_flow) {
        out.app_class = AppTaskClass::CollaborativeMulti;
    } else {
        throw PlannerError(PlannerErrc::UnclassifiableFeatureCombination,
                           "feature triple matches no known cross-app task type");
    }

    if (f.sync && f.roles) {
        if (*f.roles == RoleRelation::MasterSlave) {
            out.device_class =
                *f.sync == SyncMode::Async ? DeviceQuadrant::I : DeviceQuadrant::II;
        } else {
            out.device_class =
                *f.sync == SyncMode::Async ? DeviceQuadrant::III : DeviceQuadrant::IV;
        }
    }

    out.executable = out.app_class != AppTaskClass::CollaborativeMulti &&
                     (!out.device_class || *out.device_class == DeviceQuadrant::I ||
                      *out.device_class == DeviceQuadrant::III);
    return out;
}

AllocatedPlan load_plan(const std::string& plan_json) {
    ordered_json doc = ordered_json::parse(plan_json);
    std::vector<Subtask> subtasks;
    for (const auto& st : doc.at("subtasks")) {
        subtasks.push_back({st.at("id").get<std::string>(),
                            st.value("description", std::string{})});
    }
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& e : doc.at("edges")) {
        edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    std::map<std::string, std::string> mapping;
    for (const auto& [id, ep] : doc.at("allocation").items()) {
        mapping[id] = ep.get<std::string>();
    }
    std::vector<Endpoint> endpoints;
    for (const auto& ep : doc.at("endpoints")) {
        EndpointKind kind = ep.at("kind").get<std::string>() == "app" ? EndpointKind::App
                                                                      : EndpointKind::Device;
        endpoints.push_back({ep.at("id").get<std::string>(), kind});
    }
    return allocate(build_graph(std::move(subtasks), std::move(edges)), std::move(mapping),
                    std::move(endpoints));
}

std::string save_plan(const AllocatedPlan& plan) {
    ordered_json doc;
    doc["subtasks"] = ordered_json::array();
    for (const auto& st : plan.graph.subtasks()) {
        doc["subtasks"].push_back({{"id", st.id}, {"description", st.description}});
    }
    doc["edges"] = ordered_json::array();
    for (const auto& [from, to] : plan.graph.edges()) {
        doc["edges"].push_back({from, to});
    }
    doc["allocation"] = ordered_json::object();
    for (const auto& [id, ep] : plan.allocation) doc["allocation"][id] = ep;
    doc["endpoints"] = ordered_json::array();
    for (const auto& ep : plan.endpoints) {
        doc["endpoints"].push_back(
            {{"id", ep.id}, {"kind", ep.kind == EndpointKind::App ? "app" : "device"}});
    }
    return doc.dump();
}

std::string event_log_lines(const std::vector<StatusEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += "{\"tick\":" + std::to_string(e.tick) + ",\"subtask\":\"" + e.subtask +
               "\",\"transition\":\"" + to_string(e.to) + "\"}\n";
    }
    return out;
}

} // namespace guiagent
