#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <utility>

#include "guiagent/screen.hpp"

namespace guiagent {

// Click calibration: a proposed point inside any widget is executed as-is;
// a point outside every widget is relocated to the center of the nearest
// interactive widget, unless that exact center already failed to change
// state on this screen before, in which case the original point is executed
// (anti-loop bypass).

// Per-screen-digest set of correction targets that produced no state change.
// Single-writer: concurrent reads are fine, mutations must be serialized by
// the caller.
class FailureMemory {
public:
    bool contains(std::uint64_t digest, Point p) const;

    // Idempotent insert of a correction target that was executed and caused
    // no digest change.
    void record(std::uint64_t digest, Point p);

    std::size_t size() const;

    // JSON-lines persistence: one {"digest":"<hex16>","point":[x,y]} per line.
    void save(std::ostream& out) const;
    static FailureMemory load(std::istream& in);

private:
    std::map<std::uint64_t, std::set<std::pair<int, int>>> failed_;
};

enum class CorrectionVerdict { KeptInside, Corrected, BypassedByHistory, KeptNoWidgets };

struct CorrectionOutcome {
    Point final_point;
    CorrectionVerdict verdict;
    std::optional<BBox> chosen_box;    // present for Corrected and BypassedByHistory
    std::optional<double> distance;    // distance from the input point to chosen_box
};

const char* to_string(CorrectionVerdict v);

// Minimum Euclidean distance from p to the rectangle b:
//   sqrt(max(x1-x, 0, x-x2)^2 + max(y1-y, 0, y-y2)^2)
// Zero for points inside or on the boundary.
double distance_to_box(Point p, const BBox& b);

// Applies the static constraint plus the failure-memory bypass. Only
// interactive widgets attract corrections; equidistant boxes are broken by
// smaller area, then lower widget index.
CorrectionOutcome correct_point(Point p, const Screen& s, const FailureMemory& fm);

inline void record_failure(FailureMemory& fm, std::uint64_t digest, Point executed) {
    fm.record(digest, executed);
}

} // namespace guiagent
