#pragma once

#include <string>

#include "guiagent/rng.hpp"
#include "guiagent/screen.hpp"

namespace guiagent::test {

// The reference widget fixture: two interactive app icons plus a
// non-interactive date label.
inline const char* kHomeFixture = R"json([
  {"index": 11, "type": "Icon (Application)", "content": "YouTube",
   "interactive": true, "bbox": [0.74, 0.63, 0.90, 0.73]},
  {"index": 12, "type": "Icon (Application)", "content": "Play Store",
   "interactive": true, "bbox": [0.10, 0.63, 0.26, 0.73]},
  {"index": 13, "type": "Text", "content": "Thu, Aug 7",
   "interactive": false, "bbox": [0.12, 0.14, 0.18, 0.17]}
])json";

inline Screen home_screen() { return ingest_widgets(kHomeFixture, "home"); }

// Random screen with n non-overlap-checked widgets (hit testing and hashing
// do not require disjoint boxes).
inline Screen random_screen(Rng& rng, int n_widgets, bool all_interactive = false) {
    Screen s;
    s.screen_id = "random";
    for (int i = 0; i < n_widgets; ++i) {
        WidgetRecord w;
        w.index = i;
        w.widget_type = (i % 3 == 0) ? "Icon" : (i % 3 == 1) ? "Text" : "Button";
        w.content = "widget-" + std::to_string(i);
        w.interactive = all_interactive || rng.next_below(2) == 0;
        int x1 = static_cast<int>(rng.next_below(950));
        int y1 = static_cast<int>(rng.next_below(950));
        int x2 = x1 + 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(1000 - x1)));
        int y2 = y1 + 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(1000 - y1)));
        w.bbox = BBox{x1, y1, x2, y2};
        s.widgets.push_back(std::move(w));
    }
    return s;
}

} // namespace guiagent::test
