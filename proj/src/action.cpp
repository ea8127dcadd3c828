#include "guiagent/action.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace guiagent {
namespace {

using nlohmann::json;

constexpr int kCoordMax = 1000;

bool in_range(const Point& p) {
    return p.x >= 0 && p.x <= kCoordMax && p.y >= 0 && p.y <= kCoordMax;
}

std::optional<SwipeDirection> direction_from(std::string_view s) {
    if (s == "up") return SwipeDirection::Up;
    if (s == "down") return SwipeDirection::Down;
    if (s == "left") return SwipeDirection::Left;
    if (s == "right") return SwipeDirection::Right;
    return std::nullopt;
}

std::optional<SystemKey> key_from(std::string_view s) {
    if (s == "HOME") return SystemKey::Home;
    if (s == "BACK") return SystemKey::Back;
    if (s == "ENTER") return SystemKey::Enter;
    return std::nullopt;
}

std::optional<TaskStatus> status_from(std::string_view s) {
    if (s == "start") return TaskStatus::Start;
    if (s == "finish") return TaskStatus::Finish;
    if (s == "impossible") return TaskStatus::Impossible;
    if (s == "need_feedback") return TaskStatus::NeedFeedback;
    return std::nullopt;
}

Point point_from(const json& v, const char* key) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        throw SchemaError(SchemaErrc::MalformedRecord,
                          std::string(key) + " must be an array of two integers");
    }
    Point p{v[0].get<int>(), v[1].get<int>()};
    if (!in_range(p)) {
        throw SchemaError(SchemaErrc::OutOfRange,
                          std::string(key) + " coordinates must lie in [0,1000]");
    }
    return p;
}

void append_escaped(std::string& out, const std::string& s) {
    out += '"';
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += '"';
}

} // namespace

ActionIntent intent_of(const Action& a) {
    const bool P = a.point.has_value();
    const bool to = a.to.has_value();
    const bool T = a.type_text.has_value();
    const bool K = a.press.has_value();
    const bool S = a.status.has_value();
    const bool D = a.duration_ms.has_value();

    if (P && !T && !K) {
        if (!to && !D) return ActionIntent::Click; // bare, or with a status tag
        if (to && !D && !S) return ActionIntent::Swipe;
        if (!to && D && !S) return ActionIntent::LongPress;
    } else if (!P && !to) {
        if (T && !K && !S && !D) return ActionIntent::InputText;
        if (!T && K && !S && !D) return ActionIntent::Press;
        if (!T && !K && S) return ActionIntent::Status; // bare or with a wait duration
        if (!T && !K && !S && D) return ActionIntent::Wait;
    }
    throw SchemaError(SchemaErrc::InvalidCombination,
                      "field combination does not form a single primary intent");
}

void validate_action(const Action& a) {
    intent_of(a);
    if (a.point && !in_range(*a.point)) {
        throw SchemaError(SchemaErrc::OutOfRange, "POINT outside [0,1000]");
    }
    if (a.to) {
        if (const Point* p = std::get_if<Point>(&*a.to); p && !in_range(*p)) {
            throw SchemaError(SchemaErrc::OutOfRange, "to coordinates outside [0,1000]");
        }
    }
    if (a.duration_ms && *a.duration_ms <= 0) {
        throw SchemaError(SchemaErrc::OutOfRange, "duration must be a positive integer");
    }
}

Action parse_action(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(SchemaErrc::MalformedRecord, e.what());
    }
    if (!doc.is_object()) {
        throw SchemaError(SchemaErrc::MalformedRecord, "record must be a JSON object");
    }

    Action a;
    for (const auto& [key, value] : doc.items()) {
        if (key == "POINT") {
            a.point = point_from(value, "POINT");
        } else if (key == "to") {
            if (value.is_string()) {
                auto d = direction_from(value.get<std::string>());
                if (!d) {
                    throw SchemaError(SchemaErrc::OutOfRange,
                                      "to direction must be one of up/down/left/right");
                }
                a.to = *d;
            } else {
                a.to = SwipeTarget(point_from(value, "to"));
            }
        } else if (key == "TYPE") {
            if (!value.is_string()) {
                throw SchemaError(SchemaErrc::MalformedRecord, "TYPE must be a string");
            }
            a.type_text = value.get<std::string>();
        } else if (key == "PRESS") {
            if (!value.is_string()) {
                throw SchemaError(SchemaErrc::MalformedRecord, "PRESS must be a string");
            }
            auto k = key_from(value.get<std::string>());
            if (!k) {
                throw SchemaError(SchemaErrc::OutOfRange, "PRESS must be HOME, BACK or ENTER");
            }
            a.press = *k;
        } else if (key == "STATUS") {
            if (!value.is_string()) {
                throw SchemaError(SchemaErrc::MalformedRecord, "STATUS must be a string");
            }
            auto s = status_from(value.get<std::string>());
            if (!s) {
                throw SchemaError(SchemaErrc::OutOfRange,
                                  "STATUS must be start/finish/impossible/need_feedback");
            }
            a.status = *s;
        } else if (key == "duration") {
            if (!value.is_number_integer()) {
                throw SchemaError(SchemaErrc::MalformedRecord, "duration must be an integer");
            }
            a.duration_ms = value.get<int>();
            if (*a.duration_ms <= 0) {
                throw SchemaError(SchemaErrc::OutOfRange, "duration must be a positive integer");
            }
        } else {
            throw SchemaError(SchemaErrc::UnknownKey, "unknown key: " + key);
        }
    }
    validate_action(a);
    return a;
}

std::string serialize_action(const Action& a) {
    validate_action(a);
    std::string out = "{";
    bool first = true;
    auto sep = [&] {
        if (!first) out += ',';
        first = false;
    };
    if (a.point) {
        sep();
        out += "\"POINT\":[" + std::to_string(a.point->x) + ',' + std::to_string(a.point->y) + ']';
    }
    if (a.to) {
        sep();
        out += "\"to\":";
        if (const auto* d = std::get_if<SwipeDirection>(&*a.to)) {
            out += '"';
            out += to_string(*d);
            out += '"';
        } else {
            const Point& p = std::get<Point>(*a.to);
            out += '[' + std::to_string(p.x) + ',' + std::to_string(p.y) + ']';
        }
    }
    if (a.type_text) {
        sep();
        out += "\"TYPE\":";
        append_escaped(out, *a.type_text);
    }
    if (a.press) {
        sep();
        out += "\"PRESS\":\"";
        out += to_string(*a.press);
        out += '"';
    }
    if (a.status) {
        sep();
        out += "\"STATUS\":\"";
        out += to_string(*a.status);
        out += '"';
    }
    if (a.duration_ms) {
        sep();
        out += "\"duration\":" + std::to_string(*a.duration_ms);
    }
    out += '}';
    return out;
}

Point normalize_point(int px, int py, int width, int height) {
    if (width <= 0 || height <= 0 || px < 0 || px >= width || py < 0 || py >= height) {
        throw SchemaError(SchemaErrc::OutOfRange, "pixel outside screen bounds");
    }
    auto scale = [](int v, int dim) {
        long r = std::lround(static_cast<double>(v) * 1000.0 / static_cast<double>(dim));
        return static_cast<int>(std::min<long>(kCoordMax, std::max<long>(0, r)));
    };
    return Point{scale(px, width), scale(py, height)};
}

Point denormalize_point(Point permille, int width, int height) {
    if (width <= 0 || height <= 0 || !in_range(permille)) {
        throw SchemaError(SchemaErrc::OutOfRange, "per-mille point outside [0,1000]");
    }
    auto scale = [](int v, int dim) {
        long r = std::lround(static_cast<double>(v) * static_cast<double>(dim) / 1000.0);
        return static_cast<int>(std::min<long>(dim - 1, std::max<long>(0, r)));
    };
    return Point{scale(permille.x, width), scale(permille.y, height)};
}

const char* to_string(SwipeDirection d) {
    switch (d) {
        case SwipeDirection::Up: return "up";
        case SwipeDirection::Down: return "down";
        case SwipeDirection::Left: return "left";
        case SwipeDirection::Right: return "right";
    }
    return "?";
}

const char* to_string(SystemKey k) {
    switch (k) {
        case SystemKey::Home: return "HOME";
        case SystemKey::Back: return "BACK";
        case SystemKey::Enter: return "ENTER";
    }
    return "?";
}

const char* to_string(TaskStatus s) {
    switch (s) {
        case TaskStatus::Start: return "start";
        case TaskStatus::Finish: return "finish";
        case TaskStatus::Impossible: return "impossible";
        case TaskStatus::NeedFeedback: return "need_feedback";
    }
    return "?";
}

const char* to_string(ActionIntent i) {
    switch (i) {
        case ActionIntent::Click: return "click";
        case ActionIntent::Swipe: return "swipe";
        case ActionIntent::LongPress: return "long_press";
        case ActionIntent::InputText: return "input_text";
        case ActionIntent::Press: return "press";
        case ActionIntent::Status: return "status";
        case ActionIntent::Wait: return "wait";
    }
    return "?";
}

} // namespace guiagent
