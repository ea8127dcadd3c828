#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "guiagent/action.hpp"
#include "guiagent/errors.hpp"

namespace guiagent {

// Structured interface state as emitted by the upstream widget parser.
// Fixture bboxes arrive as unit-interval floats and are converted to the
// per-mille integer space shared with the action schema at ingestion.

struct BBox {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0; // per-mille, x1 < x2, y1 < y2
    bool operator==(const BBox&) const = default;

    bool contains(Point p) const {
        return p.x >= x1 && p.x <= x2 && p.y >= y1 && p.y <= y2;
    }
    long area() const { return static_cast<long>(x2 - x1) * (y2 - y1); }
    Point center() const; // arithmetic mean of corners, round half away from zero
};

struct WidgetRecord {
    int index = 0;
    std::string widget_type; // e.g. "Icon (Application)", "Text", "Input Field"
    std::string content;
    bool interactive = false;
    BBox bbox;
    bool operator==(const WidgetRecord&) const = default;
};

struct Screen {
    std::string screen_id; // harness-assigned, not part of the digest
    std::vector<WidgetRecord> widgets;
    bool operator==(const Screen&) const = default;
};

enum class ScreenErrc { BadBbox, DuplicateIndex, MalformedFixture };
using ScreenError = CodedError<ScreenErrc>;

// Parses a widget-fixture document: a JSON array of objects with keys
// index, type, content, interactive, bbox (4 floats in [0,1]). Floats are
// scaled by 1000 and rounded; ordering is preserved.
Screen ingest_widgets(const std::string& fixture_json, std::string screen_id = {});

// All widgets whose closed bbox contains p, in screen order.
std::vector<WidgetRecord> hit_test(const Screen& s, Point p);

// ----------------------------------------------------------------------------
// Canonical screen digest.
//
// The digest must recognize "the same frame" across runs while tolerating
// sub-cell layout jitter. Algorithm (bit-exact, so logs are comparable):
//   1. Sort widgets by index.
//   2. Render each widget as:  widget_type 0x1F content 0x1F c(x1) c(y1)
//      c(x2) c(y2) 0x1E   where c(v) = min(19, v / 50) quantizes a per-mille
//      coordinate onto a 20x20 grid and is emitted as one byte.
//   3. FNV-1a (64-bit) over the concatenated bytes.
// The empty screen digest is the FNV-1a offset basis.
// ----------------------------------------------------------------------------
std::uint64_t hash_screen(const Screen& s);

inline constexpr std::uint64_t kEmptyScreenDigest = 0xcbf29ce484222325ull;

// 16-hex-digit rendering used in logs and persisted stores.
std::string digest_hex(std::uint64_t digest);
std::uint64_t digest_from_hex(const std::string& hex);

} // namespace guiagent
