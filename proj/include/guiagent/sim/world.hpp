#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "guiagent/action.hpp"
#include "guiagent/calibration.hpp"
#include "guiagent/dispatch.hpp"
#include "guiagent/errors.hpp"
#include "guiagent/experience.hpp"
#include "guiagent/memory_store.hpp"
#include "guiagent/planner.hpp"
#include "guiagent/screen.hpp"

namespace guiagent::sim {

// Deterministic multi-device environment: apps are screen graphs with
// explicit transitions, devices hold a foreground frame plus a back stack,
// and every mutation is driven by validated actions. A valid interaction is
// one that changes the screen digest.

enum class WorldErrc { SchemaError, DanglingReference, NoSuchDevice, NoSuchScreen };
using WorldError = CodedError<WorldErrc>;

// What a single (screen, trigger) pair does. Widget-index triggers fire only
// when the acted-on widget matches; type triggers may additionally require
// the typed text.
struct Transition {
    std::string screen;
    enum class On { Click, LongPress, Type, Press, Swipe } on = On::Click;
    int widget = -1;                        // Click / LongPress / Type
    std::optional<std::string> text;        // Type: exact match when present
    std::optional<SystemKey> key;           // Press
    std::optional<SwipeDirection> direction; // Swipe
    enum class Go { Screen, Launch, Home } go = Go::Screen;
    std::string target; // screen id or app id
};

struct SimApp {
    std::string id;
    std::map<std::string, Screen> screens;
    std::string initial;
    std::vector<Transition> transitions;
};

struct DeviceFrame {
    std::string app;
    std::string screen_id;
    Screen screen;             // live copy; typing mutates widget content
    std::optional<int> focus;  // focused input widget index
};

struct SimDevice {
    std::string id;
    std::vector<std::string> installed;
    std::string home_app;
    DeviceFrame fg;
    std::vector<DeviceFrame> back_stack;
};

struct CatalogEntry {
    std::string id;
    std::string title;
    long likes = 0;
    long coins = 0;
};

struct FeedbackRule {
    std::string request;
    std::vector<std::string> replies; // consumed in order; empty -> decline
    std::optional<Slot> slot;         // validate + store through the memory store
};

struct WorldConfig {
    int policy_call_ticks = 5; // one ensemble round (agents run concurrently)
    int action_ticks = 1;
    int function_call_ticks = 1;
    int step_cap = 30;
    int back_stack_cap = 10;
};

class World {
public:
    std::uint64_t seed = 0;
    WorldConfig config;

    std::map<std::string, SimApp> apps;
    std::map<std::string, SimDevice> devices;

    FunctionRegistry registry;
    std::map<std::string, std::string> policy_scripts; // key -> script JSON
    std::vector<FeedbackRule> feedback;
    std::map<std::string, nlohmann::ordered_json> payloads; // subtask -> bus payload
    std::optional<AllocatedPlan> plan;

    // Session state shared across runs in this world.
    MemoryStore memory;
    ExperiencePool pool;
    FailureMemory failure_memory;
    long clock = 0;
    long policy_invocations = 0;

    // Tool state.
    std::vector<nlohmann::ordered_json> mailbox;
    std::vector<CatalogEntry> catalog;
    std::set<std::string> failing_tools;

    SimDevice& device(const std::string& id);
    const SimApp& app(const std::string& id) const;

    // Picks the policy script for an instruction or subtask id; falls back to
    // the "default" script.
    const std::string& script_for(const std::string& key) const;

    // Puts every device back on its home screen with an empty back stack.
    // Session state (memory, pool, failure memory, clock) is untouched, so a
    // repeated instruction starts from the task's start state but keeps its
    // accumulated experience.
    void reset_devices();

    // Maps a plan endpoint to the device that executes it: device endpoints
    // map to themselves, app endpoints to the (single) device hosting them.
    const std::string& executing_device(const std::string& endpoint) const;
};

// Scenario file -> fully deterministic world. Validates app/screen references.
World load_world(const std::string& scenario_json);

struct StepResult {
    bool state_changed = false;
    std::uint64_t pre_digest = 0;
    std::uint64_t post_digest = 0;
};

// Executes one GUI action on a device: clicks resolve through hit-testing and
// the transition table, TYPE writes into the focused input field (replacing
// its content; typing an empty string clears the field), PRESS follows
// back-stack/home semantics, status and wait actions leave the device
// untouched. Focus is the most recently clicked input field; with no focus,
// TYPE falls back to the screen's only input field when there is exactly one.
// state_changed is defined as a digest change.
StepResult step_device(World& world, const std::string& device_id, const Action& action);

// ToolHost over world state: send_email appends to the mailbox, like/coin
// mutate the catalog, search ranks catalog titles by keyword hit.
class WorldToolHost : public ToolHost {
public:
    explicit WorldToolHost(World& world) : world_(world) {}
    nlohmann::ordered_json call(const BoundCall& call) override;

private:
    World& world_;
};

} // namespace guiagent::sim
