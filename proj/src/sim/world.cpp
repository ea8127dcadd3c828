#include "guiagent/sim/world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace guiagent::sim {
namespace {

using ordered_json = nlohmann::ordered_json;

SwipeDirection dominant_direction(Point from, Point to) {
    int dx = to.x - from.x, dy = to.y - from.y;
    if (std::abs(dx) >= std::abs(dy)) {
        return dx >= 0 ? SwipeDirection::Right : SwipeDirection::Left;
    }
    return dy >= 0 ? SwipeDirection::Down : SwipeDirection::Up;
}

bool is_input_widget(const WidgetRecord& w) {
    std::string t = w.widget_type;
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return t.find("input") != std::string::npos;
}

Transition parse_transition(const ordered_json& t) {
    Transition out;
    out.screen = t.at("screen").get<std::string>();
    const ordered_json& on = t.at("on");
    if (on.contains("click")) {
        out.on = Transition::On::Click;
        out.widget = on.at("click").get<int>();
    } else if (on.contains("long_press")) {
        out.on = Transition::On::LongPress;
        out.widget = on.at("long_press").get<int>();
    } else if (on.contains("type")) {
        out.on = Transition::On::Type;
        out.widget = on.at("type").get<int>();
        if (on.contains("text")) out.text = on.at("text").get<std::string>();
    } else if (on.contains("press")) {
        out.on = Transition::On::Press;
        std::string k = on.at("press").get<std::string>();
        out.key = k == "HOME" ? SystemKey::Home : k == "BACK" ? SystemKey::Back : SystemKey::Enter;
    } else if (on.contains("swipe")) {
        out.on = Transition::On::Swipe;
        std::string d = on.at("swipe").get<std::string>();
        out.direction = d == "up"     ? SwipeDirection::Up
                        : d == "down" ? SwipeDirection::Down
                        : d == "left" ? SwipeDirection::Left
                                      : SwipeDirection::Right;
    } else {
        throw WorldError(WorldErrc::SchemaError, "transition needs click/long_press/type/press/swipe");
    }
    const ordered_json& go = t.at("go");
    if (go.contains("screen")) {
        out.go = Transition::Go::Screen;
        out.target = go.at("screen").get<std::string>();
    } else if (go.contains("launch")) {
        out.go = Transition::Go::Launch;
        out.target = go.at("launch").get<std::string>();
    } else if (go.contains("home")) {
        out.go = Transition::Go::Home;
    } else {
        throw WorldError(WorldErrc::SchemaError, "transition go needs screen/launch/home");
    }
    return out;
}

DeviceFrame fresh_frame(const World& world, const std::string& app_id) {
    const SimApp& app = world.app(app_id);
    auto it = app.screens.find(app.initial);
    return DeviceFrame{app_id, app.initial, it->second, std::nullopt};
}

void navigate(World& world, SimDevice& dev, const Transition& tr) {
    DeviceFrame previous = dev.fg;
    switch (tr.go) {
        case Transition::Go::Screen: {
            const SimApp& app = world.app(dev.fg.app);
            auto it = app.screens.find(tr.target);
            if (it == app.screens.end()) {
                throw WorldError(WorldErrc::NoSuchScreen,
                                 dev.fg.app + " has no screen " + tr.target);
            }
            dev.fg = DeviceFrame{dev.fg.app, tr.target, it->second, std::nullopt};
            break;
        }
        case Transition::Go::Launch:
            dev.fg = fresh_frame(world, tr.target);
            break;
        case Transition::Go::Home:
            dev.fg = fresh_frame(world, dev.home_app);
            break;
    }
    dev.back_stack.push_back(std::move(previous));
    if (dev.back_stack.size() > static_cast<std::size_t>(world.config.back_stack_cap)) {
        dev.back_stack.erase(dev.back_stack.begin());
    }
}

const Transition* find_transition(const SimApp& app, const std::string& screen_id,
                                  Transition::On on, int widget,
                                  const std::optional<std::string>& typed,
                                  std::optional<SystemKey> key,
                                  std::optional<SwipeDirection> dir) {
    for (const auto& tr : app.transitions) {
        if (tr.screen != screen_id || tr.on != on) continue;
        switch (on) {
            case Transition::On::Click:
            case Transition::On::LongPress:
                if (tr.widget == widget) return &tr;
                break;
            case Transition::On::Type:
                if (tr.widget == widget && (!tr.text || (typed && *tr.text == *typed))) return &tr;
                break;
            case Transition::On::Press:
                if (tr.key == key) return &tr;
                break;
            case Transition::On::Swipe:
                if (tr.direction == dir) return &tr;
                break;
        }
    }
    return nullptr;
}

} // namespace

SimDevice& World::device(const std::string& id) {
    auto it = devices.find(id);
    if (it == devices.end()) {
        throw WorldError(WorldErrc::NoSuchDevice, "no such device: " + id);
    }
    return it->second;
}

const SimApp& World::app(const std::string& id) const {
    auto it = apps.find(id);
    if (it == apps.end()) {
        throw WorldError(WorldErrc::DanglingReference, "no such app: " + id);
    }
    return it->second;
}

const std::string& World::script_for(const std::string& key) const {
    auto it = policy_scripts.find(key);
    if (it != policy_scripts.end()) return it->second;
    it = policy_scripts.find("default");
    if (it == policy_scripts.end()) {
        throw WorldError(WorldErrc::SchemaError, "no policy script for '" + key +
                                                     "' and no default script");
    }
    return it->second;
}

void World::reset_devices() {
    for (auto& [id, dev] : devices) {
        dev.fg = fresh_frame(*this, dev.home_app);
        dev.back_stack.clear();
    }
}

const std::string& World::executing_device(const std::string& endpoint) const {
    if (devices.count(endpoint)) return devices.find(endpoint)->second.id;
    for (const auto& [id, dev] : devices) {
        if (std::find(dev.installed.begin(), dev.installed.end(), endpoint) !=
            dev.installed.end()) {
            return dev.id;
        }
    }
    throw WorldError(WorldErrc::DanglingReference,
                     "endpoint " + endpoint + " maps to no device");
}

World load_world(const std::string& scenario_json) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(scenario_json);
    } catch (const nlohmann::json::parse_error& e) {
        throw WorldError(WorldErrc::SchemaError, e.what());
    }

    World world;
    world.seed = doc.value("seed", 0);

    if (doc.contains("config")) {
        const auto& c = doc.at("config");
        world.config.policy_call_ticks = c.value("policy_call_ticks", 5);
        world.config.action_ticks = c.value("action_ticks", 1);
        world.config.function_call_ticks = c.value("function_call_ticks", 1);
        world.config.step_cap = c.value("step_cap", 30);
        world.config.back_stack_cap = c.value("back_stack_cap", 10);
    }

    for (const auto& app_doc : doc.value("apps", ordered_json::array())) {
        SimApp app;
        app.id = app_doc.at("id").get<std::string>();
        for (const auto& s : app_doc.at("screens")) {
            std::string sid = s.at("id").get<std::string>();
            app.screens.emplace(sid, ingest_widgets(s.at("widgets").dump(), sid));
        }
        app.initial = app_doc.at("initial").get<std::string>();
        if (!app.screens.count(app.initial)) {
            throw WorldError(WorldErrc::DanglingReference,
                             app.id + ": initial screen " + app.initial + " not defined");
        }
        for (const auto& t : app_doc.value("transitions", ordered_json::array())) {
            Transition tr = parse_transition(t);
            if (!app.screens.count(tr.screen)) {
                throw WorldError(WorldErrc::DanglingReference,
                                 app.id + ": transition from unknown screen " + tr.screen);
            }
            if (tr.go == Transition::Go::Screen && !app.screens.count(tr.target)) {
                throw WorldError(WorldErrc::DanglingReference,
                                 app.id + ": transition to unknown screen " + tr.target);
            }
            app.transitions.push_back(std::move(tr));
        }
        world.apps.emplace(app.id, std::move(app));
    }

    for (const auto& dev_doc : doc.value("devices", ordered_json::array())) {
        SimDevice dev;
        dev.id = dev_doc.at("id").get<std::string>();
        for (const auto& a : dev_doc.at("apps")) {
            std::string app_id = a.get<std::string>();
            if (!world.apps.count(app_id)) {
                throw WorldError(WorldErrc::DanglingReference,
                                 dev.id + " references unknown app " + app_id);
            }
            dev.installed.push_back(app_id);
        }
        dev.home_app = dev_doc.value("home", dev.installed.empty() ? "" : dev.installed.front());
        if (!world.apps.count(dev.home_app)) {
            throw WorldError(WorldErrc::DanglingReference,
                             dev.id + " home app " + dev.home_app + " is unknown");
        }
        dev.fg = fresh_frame(world, dev.home_app);
        world.devices.emplace(dev.id, std::move(dev));
    }

    // Launch transitions must reference installed apps.
    for (const auto& [app_id, app] : world.apps) {
        for (const auto& tr : app.transitions) {
            if (tr.go == Transition::Go::Launch && !world.apps.count(tr.target)) {
                throw WorldError(WorldErrc::DanglingReference,
                                 app_id + " launches unknown app " + tr.target);
            }
        }
    }

    if (!doc.contains("functions") || doc.at("functions").is_string()) {
        for (auto& d : builtin_toolkits()) world.registry.register_function(std::move(d));
    } else {
        world.registry = FunctionRegistry::from_json(doc.at("functions").dump());
    }

    if (doc.contains("policies")) {
        for (const auto& [key, script] : doc.at("policies").items()) {
            world.policy_scripts[key] = script.dump();
        }
    }

    for (const auto& rule : doc.value("feedback", ordered_json::array())) {
        FeedbackRule fr;
        fr.request = rule.at("request").get<std::string>();
        for (const auto& r : rule.value("replies", ordered_json::array())) {
            fr.replies.push_back(r.get<std::string>());
        }
        if (rule.contains("slot")) {
            fr.slot = Slot{rule.at("slot").at("r").get<std::string>(),
                           rule.at("slot").at("f").get<std::string>()};
        }
        world.feedback.push_back(std::move(fr));
    }

    for (const auto& spec : doc.value("memory_fields", ordered_json::array())) {
        world.memory.register_field({spec.at("field").get<std::string>(),
                                     spec.at("pattern").get<std::string>(),
                                     spec.value("label", std::string{})});
    }
    for (const auto& triple : doc.value("memory_seed", ordered_json::array())) {
        world.memory.update({triple.at("r").get<std::string>(),
                             triple.at("f").get<std::string>(),
                             triple.at("v").get<std::string>()},
                            0);
    }

    if (doc.contains("tools")) {
        const auto& tools = doc.at("tools");
        for (const auto& v : tools.value("catalog", ordered_json::array())) {
            world.catalog.push_back({v.at("id").get<std::string>(),
                                     v.at("title").get<std::string>(), 0, 0});
        }
        for (const auto& f : tools.value("fail", ordered_json::array())) {
            world.failing_tools.insert(f.get<std::string>());
        }
    }

    const ordered_json payload_docs = doc.value("payloads", ordered_json::object());
    for (const auto& [subtask, payload] : payload_docs.items()) {
        world.payloads[subtask] = payload;
    }

    if (doc.contains("plan")) {
        world.plan = load_plan(doc.at("plan").dump());
        for (const auto& [st, ep] : world.plan->allocation) {
            if (!world.devices.count(ep) && !world.apps.count(ep)) {
                throw WorldError(WorldErrc::DanglingReference,
                                 "plan endpoint " + ep + " is neither a device nor an app");
            }
        }
    }
    return world;
}

StepResult step_device(World& world, const std::string& device_id, const Action& action) {
    SimDevice& dev = world.device(device_id);
    const std::uint64_t pre = hash_screen(dev.fg.screen);
    const SimApp& app = world.app(dev.fg.app);
    const ActionIntent intent = intent_of(action);

    switch (intent) {
        case ActionIntent::Click:
        case ActionIntent::LongPress: {
            if (!action.point) break;
            // first interactive hit in screen order receives the touch
            int target_index = -1;
            for (const auto& w : hit_test(dev.fg.screen, *action.point)) {
                if (w.interactive) {
                    target_index = w.index;
                    break;
                }
            }
            if (target_index < 0) break;
            const Transition* tr = find_transition(
                app, dev.fg.screen_id,
                intent == ActionIntent::Click ? Transition::On::Click : Transition::On::LongPress,
                target_index, std::nullopt, std::nullopt, std::nullopt);
            if (tr) {
                navigate(world, dev, *tr);
            } else if (intent == ActionIntent::Click) {
                for (const auto& w : dev.fg.screen.widgets) {
                    if (w.index == target_index && is_input_widget(w)) {
                        dev.fg.focus = target_index;
                        break;
                    }
                }
            }
            break;
        }
        case ActionIntent::Swipe: {
            SwipeDirection dir;
            if (const auto* d = std::get_if<SwipeDirection>(&*action.to)) {
                dir = *d;
            } else {
                dir = dominant_direction(*action.point, std::get<Point>(*action.to));
            }
            const Transition* tr = find_transition(app, dev.fg.screen_id, Transition::On::Swipe,
                                                   -1, std::nullopt, std::nullopt, dir);
            if (tr) navigate(world, dev, *tr);
            break;
        }
        case ActionIntent::InputText: {
            if (!dev.fg.focus) {
                // an untargeted keyboard lands in the screen's only input field
                int only = -1, count = 0;
                for (const auto& w : dev.fg.screen.widgets) {
                    if (is_input_widget(w)) {
                        only = w.index;
                        ++count;
                    }
                }
                if (count == 1) dev.fg.focus = only;
            }
            if (!dev.fg.focus) break; // typing with no focusable field is a no-op
            int idx = *dev.fg.focus;
            for (auto& w : dev.fg.screen.widgets) {
                if (w.index == idx) {
                    w.content = *action.type_text;
                    break;
                }
            }
            const Transition* tr = find_transition(app, dev.fg.screen_id, Transition::On::Type,
                                                   idx, action.type_text, std::nullopt,
                                                   std::nullopt);
            if (tr) navigate(world, dev, *tr);
            break;
        }
        case ActionIntent::Press: {
            switch (*action.press) {
                case SystemKey::Back:
                    if (!dev.back_stack.empty()) {
                        dev.fg = dev.back_stack.back();
                        dev.back_stack.pop_back();
                    }
                    break;
                case SystemKey::Home: {
                    DeviceFrame home = fresh_frame(world, dev.home_app);
                    if (dev.fg.app != home.app || dev.fg.screen_id != home.screen_id ||
                        !(dev.fg.screen == home.screen)) {
                        dev.fg = std::move(home);
                        dev.back_stack.clear();
                    }
                    break;
                }
                case SystemKey::Enter: {
                    const Transition* tr =
                        find_transition(app, dev.fg.screen_id, Transition::On::Press, -1,
                                        std::nullopt, SystemKey::Enter, std::nullopt);
                    if (tr) navigate(world, dev, *tr);
                    break;
                }
            }
            break;
        }
        case ActionIntent::Status:
        case ActionIntent::Wait:
            break; // no device effect
    }

    const std::uint64_t post = hash_screen(dev.fg.screen);
    return StepResult{pre != post, pre, post};
}

nlohmann::ordered_json WorldToolHost::call(const BoundCall& call) {
    if (world_.failing_tools.count(call.function)) {
        throw DispatchError(DispatchErrc::ToolFault,
                            call.function + ": simulated tool fault (no state changed)");
    }
    ordered_json result;
    if (call.function == "send_email") {
        ordered_json mail = call.args;
        std::string id = "msg-" + std::to_string(world_.mailbox.size() + 1);
        world_.mailbox.push_back(mail);
        result["delivered"] = true;
        result["message_id"] = id;
        return result;
    }
    if (call.function == "like") {
        std::string vid = call.args.at("video_id").get<std::string>();
        for (auto& e : world_.catalog) {
            if (e.id == vid) {
                e.likes += 1;
                result["ok"] = true;
                result["likes"] = e.likes;
                return result;
            }
        }
        throw DispatchError(DispatchErrc::ToolFault, "like: unknown video " + vid);
    }
    if (call.function == "coin") {
        std::string vid = call.args.at("video_id").get<std::string>();
        long count = call.args.at("count").get<long>();
        for (auto& e : world_.catalog) {
            if (e.id == vid) {
                e.coins += count;
                result["ok"] = true;
                result["coins"] = e.coins;
                return result;
            }
        }
        throw DispatchError(DispatchErrc::ToolFault, "coin: unknown video " + vid);
    }
    if (call.function == "search") {
        std::string keyword = call.args.at("keyword").get<std::string>();
        // rank by occurrence count, then catalog order
        std::vector<std::pair<long, std::string>> scored;
        for (const auto& e : world_.catalog) {
            long score = 0;
            std::size_t pos = 0;
            while ((pos = e.title.find(keyword, pos)) != std::string::npos) {
                ++score;
                pos += keyword.size();
            }
            if (score > 0) scored.emplace_back(-score, e.id);
        }
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        result["results"] = ordered_json::array();
        for (const auto& [_, id] : scored) result["results"].push_back(id);
        return result;
    }
    throw DispatchError(DispatchErrc::ToolFault, "no simulated tool named " + call.function);
}

} // namespace guiagent::sim
