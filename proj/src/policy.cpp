#include "guiagent/policy.hpp"

#include <algorithm>

#include <json.hpp>

namespace guiagent {
namespace {

using ordered_json = nlohmann::ordered_json;

const WidgetRecord* find_by_content(const Screen& screen, const std::string& content) {
    for (const auto& w : screen.widgets) {
        if (w.content == content) return &w;
    }
    return nullptr;
}

bool guard_matches(const ordered_json& guard, const StepContext& ctx) {
    if (!ctx.screen) return false;
    if (guard.contains("screen_id")) {
        if (ctx.screen->screen_id != guard.at("screen_id").get<std::string>()) return false;
    }
    if (guard.contains("content_equals")) {
        if (!find_by_content(*ctx.screen, guard.at("content_equals").get<std::string>())) {
            return false;
        }
    }
    if (guard.contains("content_contains")) {
        std::string needle = guard.at("content_contains").get<std::string>();
        bool found = false;
        for (const auto& w : ctx.screen->widgets) {
            if (w.content.find(needle) != std::string::npos) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

// "$slot.relation.field" / "$feedback.key" -> value from the context.
std::string substitute(const std::string& text, const StepContext& ctx) {
    if (text.rfind("$slot.", 0) == 0) {
        auto it = ctx.slots.find(text.substr(6));
        if (it != ctx.slots.end()) return it->second;
        return text;
    }
    if (text.rfind("$feedback.", 0) == 0) {
        auto it = ctx.feedback.find(text.substr(10));
        if (it != ctx.feedback.end()) return it->second;
        return text;
    }
    return text;
}

Action impossible_action() {
    Action a;
    a.status = TaskStatus::Impossible;
    return a;
}

} // namespace

ScriptedPolicy::ScriptedPolicy(int agent_index, const std::string& script_json)
    : agent_index_(agent_index), script_json_(script_json) {
    ordered_json doc = ordered_json::parse(script_json, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw PolicyError(PolicyErrc::BadScript, "policy script must be a JSON array");
    }
}

Proposal ScriptedPolicy::propose(const StepContext& ctx) {
    ordered_json script = ordered_json::parse(script_json_);
    if (cursor_ >= script.size()) {
        return {agent_index_, impossible_action(), "script exhausted"};
    }
    const ordered_json& entry = script[cursor_];

    if (entry.contains("match") && !guard_matches(entry.at("match"), ctx)) {
        return {agent_index_, impossible_action(), "screen guard failed"};
    }
    ++cursor_;

    std::string thought = entry.value("thought", std::string{});
    if (entry.contains("request")) thought = entry.at("request").get<std::string>();

    const ordered_json& emit = entry.at("emit");
    Action action;
    if (emit.contains("click_content") || emit.contains("long_press_content")) {
        const bool long_press = emit.contains("long_press_content");
        std::string content =
            emit.at(long_press ? "long_press_content" : "click_content").get<std::string>();
        if (!ctx.screen) {
            throw PolicyError(PolicyErrc::PolicyFault, "no screen to resolve content against");
        }
        const WidgetRecord* w = find_by_content(*ctx.screen, content);
        if (!w) {
            return {agent_index_, impossible_action(), "widget not found: " + content};
        }
        action.point = w->bbox.center();
        if (long_press) action.duration_ms = emit.value("duration", 1000);
    } else {
        ordered_json record = emit;
        if (record.contains("TYPE")) {
            record["TYPE"] = substitute(record["TYPE"].get<std::string>(), ctx);
        }
        action = parse_action(record.dump());
    }
    return {agent_index_, action, thought};
}

JitterPolicy::JitterPolicy(std::unique_ptr<Policy> inner, std::uint64_t seed, int amplitude)
    : inner_(std::move(inner)), rng_(seed), amplitude_(amplitude) {}

Proposal JitterPolicy::propose(const StepContext& ctx) {
    Proposal p = inner_->propose(ctx);
    if (p.action.point) {
        int dx = static_cast<int>(rng_.next_range(-amplitude_, amplitude_));
        int dy = static_cast<int>(rng_.next_range(-amplitude_, amplitude_));
        p.action.point->x = std::clamp(p.action.point->x + dx, 0, 1000);
        p.action.point->y = std::clamp(p.action.point->y + dy, 0, 1000);
    }
    return p;
}

std::vector<std::unique_ptr<Policy>> spawn_ensemble(const PolicyFactory& factory, int n,
                                                    const std::vector<std::uint64_t>& seeds) {
    std::vector<std::unique_ptr<Policy>> out;
    for (int i = 0; i < n; ++i) {
        std::uint64_t seed = seeds.empty() ? static_cast<std::uint64_t>(i)
                                           : seeds[static_cast<std::size_t>(i) % seeds.size()];
        out.push_back(factory(i, seed));
    }
    return out;
}

} // namespace guiagent

