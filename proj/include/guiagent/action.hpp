#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "guiagent/errors.hpp"

namespace guiagent {

// ============================================================================
// Atomic action space and its compact wire form.
//
// Every action exchanged between modules is one flat record with keys drawn
// from {POINT, to, TYPE, PRESS, STATUS, duration}. Coordinates are integer
// per-mille of the screen extent, i.e. [0, 1000] on both axes.
//
// Wire examples:
//   {"POINT":[87,445],"STATUS":"start"}
//   {"POINT":[123,456],"to":"left"}
//   {"TYPE":"交费"}
//   {"PRESS":"BACK"}
//   {"STATUS":"finish"}
// ============================================================================

struct Point {
    int x = 0;
    int y = 0;
    bool operator==(const Point&) const = default;
};

enum class SwipeDirection { Up, Down, Left, Right };

// A swipe target is either a preset direction or an absolute per-mille point.
using SwipeTarget = std::variant<SwipeDirection, Point>;

enum class SystemKey { Home, Back, Enter };

enum class TaskStatus { Start, Finish, Impossible, NeedFeedback };

// Primary intent of a valid action, derived from which fields are present.
enum class ActionIntent { Click, Swipe, LongPress, InputText, Press, Status, Wait };

struct Action {
    std::optional<Point> point;
    std::optional<SwipeTarget> to;
    std::optional<std::string> type_text;
    std::optional<SystemKey> press;
    std::optional<TaskStatus> status;
    std::optional<int> duration_ms;

    bool operator==(const Action&) const = default;
};

enum class SchemaErrc {
    MalformedRecord,     // not a JSON object, wrong value types, bad array arity
    UnknownKey,          // key outside the six defined ones
    InvalidCombination,  // field subset not in the combination table
    OutOfRange,          // coordinate outside [0,1000], bad enum value, duration <= 0
};

using SchemaError = CodedError<SchemaErrc>;

// Field-subset rule. Writing P=POINT, T=TYPE, K=PRESS, S=STATUS, D=duration:
//   {P}      click            {T}      text input
//   {P,S}    click + status   {K}      system key
//   {P,to}   swipe            {S}      status update
//   {P,D}    long press       {S,D}    status update with a wait
//   {D}      timed wait
// All other subsets of the six keys are rejected as InvalidCombination.
// {P,S} covers records like {"POINT":[87,445],"STATUS":"start"} where a
// click carries a task-status tag; its primary intent is the click.
ActionIntent intent_of(const Action& a);

// Full invariant check (combination rule, ranges, enum domains). Throws SchemaError.
void validate_action(const Action& a);

// Parses one compact record. Accepts arbitrary inter-token whitespace; rejects
// unknown keys, coordinate arrays that are not two integers, and any field
// combination outside the table above.
Action parse_action(std::string_view text);

// Emits the minimal single-line record: fixed key order POINT, to, TYPE,
// PRESS, STATUS, duration; no whitespace padding. Output is byte-deterministic
// so logs can be hashed and compared across runs.
std::string serialize_action(const Action& a);

// Pixel -> per-mille. Requires 0 <= px < width, 0 <= py < height. Rounds to
// nearest and clamps the result into [0, 1000].
Point normalize_point(int px, int py, int width, int height);

// Per-mille -> pixel, round to nearest, clamped into [0, dim-1] so the result
// is always a valid device coordinate. Inverse of normalize_point within one
// pixel on each axis.
Point denormalize_point(Point permille, int width, int height);

const char* to_string(SwipeDirection d);
const char* to_string(SystemKey k);
const char* to_string(TaskStatus s);
const char* to_string(ActionIntent i);

} // namespace guiagent
