#include "guiagent/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

namespace guiagent {

bool FailureMemory::contains(std::uint64_t digest, Point p) const {
    auto it = failed_.find(digest);
    return it != failed_.end() && it->second.count({p.x, p.y}) > 0;
}

void FailureMemory::record(std::uint64_t digest, Point p) {
    failed_[digest].insert({p.x, p.y});
}

std::size_t FailureMemory::size() const {
    std::size_t n = 0;
    for (const auto& [_, pts] : failed_) n += pts.size();
    return n;
}

void FailureMemory::save(std::ostream& out) const {
    for (const auto& [digest, pts] : failed_) {
        for (const auto& [x, y] : pts) {
            out << "{\"digest\":\"" << digest_hex(digest) << "\",\"point\":[" << x << ',' << y
                << "]}\n";
        }
    }
}

FailureMemory FailureMemory::load(std::istream& in) {
    FailureMemory fm;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto doc = nlohmann::json::parse(line);
        fm.record(digest_from_hex(doc.at("digest").get<std::string>()),
                  Point{doc.at("point")[0].get<int>(), doc.at("point")[1].get<int>()});
    }
    return fm;
}

const char* to_string(CorrectionVerdict v) {
    switch (v) {
        case CorrectionVerdict::KeptInside: return "kept_inside";
        case CorrectionVerdict::Corrected: return "corrected";
        case CorrectionVerdict::BypassedByHistory: return "bypassed_by_history";
        case CorrectionVerdict::KeptNoWidgets: return "kept_no_widgets";
    }
    return "?";
}

double distance_to_box(Point p, const BBox& b) {
    double dx = std::max({static_cast<double>(b.x1 - p.x), 0.0, static_cast<double>(p.x - b.x2)});
    double dy = std::max({static_cast<double>(b.y1 - p.y), 0.0, static_cast<double>(p.y - b.y2)});
    return std::sqrt(dx * dx + dy * dy);
}

CorrectionOutcome correct_point(Point p, const Screen& s, const FailureMemory& fm) {
    if (!hit_test(s, p).empty()) {
        return {p, CorrectionVerdict::KeptInside, std::nullopt, std::nullopt};
    }

    const WidgetRecord* best = nullptr;
    double best_dist = 0.0;
    for (const auto& w : s.widgets) {
        if (!w.interactive) continue;
        double d = distance_to_box(p, w.bbox);
        if (!best) {
            best = &w;
            best_dist = d;
            continue;
        }
        if (d < best_dist) {
            best = &w;
            best_dist = d;
        } else if (d == best_dist) {
            // ties: smaller area first, then lower widget index
            if (w.bbox.area() < best->bbox.area() ||
                (w.bbox.area() == best->bbox.area() && w.index < best->index)) {
                best = &w;
            }
        }
    }
    if (!best) {
        return {p, CorrectionVerdict::KeptNoWidgets, std::nullopt, std::nullopt};
    }

    Point candidate = best->bbox.center();
    if (fm.contains(hash_screen(s), candidate)) {
        return {p, CorrectionVerdict::BypassedByHistory, best->bbox, best_dist};
    }
    return {candidate, CorrectionVerdict::Corrected, best->bbox, best_dist};
}

} // namespace guiagent
