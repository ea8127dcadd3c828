#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "guiagent/ensemble.hpp"
#include "guiagent/errors.hpp"
#include "guiagent/rng.hpp"
#include "guiagent/screen.hpp"

namespace guiagent {

// Pluggable decision source standing in for the multimodal model: given the
// instruction, injected context, action history and current screen, produce
// one Proposal. Ships a scripted deterministic stub and a jittered stochastic
// wrapper; a remote-model adapter can implement the same interface.

enum class PolicyErrc { PolicyFault, BadScript };
using PolicyError = CodedError<PolicyErrc>;

struct HistoryStep {
    std::uint64_t digest = 0;
    Action action;
};

struct StepContext {
    std::string instruction;
    std::string context_block;                  // from the memory store, may be empty
    std::map<std::string, std::string> slots;    // "relation.field" -> value
    std::map<std::string, std::string> feedback; // request key -> user reply
    std::vector<HistoryStep> history;
    const Screen* screen = nullptr;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual Proposal propose(const StepContext& ctx) = 0;
    virtual int agent_index() const = 0;
};

// ----------------------------------------------------------------------------
// Scripted policy.
//
// Script: JSON list of per-step intents, consumed in order (one per call).
//   {"match": {...optional screen guard...},
//    "emit":  {...action template...},
//    "thought": "...", "request": "..."}
//
// Guards: {"content_equals": s} / {"content_contains": s} — some widget
// matches; {"screen_id": s} — current screen id equals s. A failed guard or
// an exhausted script proposes STATUS impossible.
//
// Emit templates: either a compact action record ({"POINT":..., ...}) or
// {"click_content": s} / {"long_press_content": s, "duration": ms} resolved
// to the matching widget's center at proposal time. TYPE text supports
// "$slot.relation.field" and "$feedback.key" substitution from the context.
// "request" marks a need_feedback emission's request key (carried as the
// proposal thought).
// ----------------------------------------------------------------------------
class ScriptedPolicy : public Policy {
public:
    ScriptedPolicy(int agent_index, const std::string& script_json);

    Proposal propose(const StepContext& ctx) override;
    int agent_index() const override { return agent_index_; }

private:
    int agent_index_;
    std::size_t cursor_ = 0;
    std::string script_json_;
};

// Adds seeded uniform jitter (default ±15 per-mille, clamped into range) to
// the point of every point-bearing proposal of an inner policy.
class JitterPolicy : public Policy {
public:
    JitterPolicy(std::unique_ptr<Policy> inner, std::uint64_t seed, int amplitude = 15);

    Proposal propose(const StepContext& ctx) override;
    int agent_index() const override { return inner_->agent_index(); }

private:
    std::unique_ptr<Policy> inner_;
    Rng rng_;
    int amplitude_;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(int agent_index, std::uint64_t seed)>;

// n independent policy instances with the given seeds (cycled if shorter than
// n). Same factory + same seeds reproduce identical behavior.
std::vector<std::unique_ptr<Policy>> spawn_ensemble(const PolicyFactory& factory, int n,
                                                    const std::vector<std::uint64_t>& seeds);

} // namespace guiagent
