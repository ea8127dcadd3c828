#include "guiagent/screen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

namespace guiagent {
namespace {

using nlohmann::json;

int round_half_away(double v) {
    return static_cast<int>(v >= 0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

int permille_from_unit(double v) {
    return static_cast<int>(std::lround(v * 1000.0));
}

unsigned char quantize(int permille) {
    int cell = permille / 50;
    return static_cast<unsigned char>(cell > 19 ? 19 : cell);
}

constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

void fnv_accumulate(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
}

} // namespace

Point BBox::center() const {
    return Point{round_half_away((x1 + x2) / 2.0), round_half_away((y1 + y2) / 2.0)};
}

Screen ingest_widgets(const std::string& fixture_json, std::string screen_id) {
    json doc;
    try {
        doc = json::parse(fixture_json);
    } catch (const json::parse_error& e) {
        throw ScreenError(ScreenErrc::MalformedFixture, e.what());
    }
    if (!doc.is_array()) {
        throw ScreenError(ScreenErrc::MalformedFixture, "fixture must be a JSON array");
    }

    Screen screen;
    screen.screen_id = std::move(screen_id);
    std::set<int> seen;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("index") || !item.contains("type") ||
            !item.contains("content") || !item.contains("interactive") || !item.contains("bbox")) {
            throw ScreenError(ScreenErrc::MalformedFixture,
                              "widget needs index, type, content, interactive, bbox");
        }
        WidgetRecord w;
        w.index = item["index"].get<int>();
        if (w.index < 0) {
            throw ScreenError(ScreenErrc::MalformedFixture, "widget index must be non-negative");
        }
        if (!seen.insert(w.index).second) {
            throw ScreenError(ScreenErrc::DuplicateIndex,
                              "duplicate widget index " + std::to_string(w.index));
        }
        w.widget_type = item["type"].get<std::string>();
        w.content = item["content"].get<std::string>();
        w.interactive = item["interactive"].get<bool>();

        const auto& bb = item["bbox"];
        if (!bb.is_array() || bb.size() != 4) {
            throw ScreenError(ScreenErrc::BadBbox, "bbox must be an array of four floats");
        }
        double c[4];
        for (int i = 0; i < 4; ++i) {
            c[i] = bb[i].get<double>();
            if (c[i] < 0.0 || c[i] > 1.0) {
                throw ScreenError(ScreenErrc::BadBbox, "bbox corner outside [0,1]");
            }
        }
        w.bbox = BBox{permille_from_unit(c[0]), permille_from_unit(c[1]),
                      permille_from_unit(c[2]), permille_from_unit(c[3])};
        if (w.bbox.x1 >= w.bbox.x2 || w.bbox.y1 >= w.bbox.y2) {
            throw ScreenError(ScreenErrc::BadBbox, "bbox corners must satisfy x1<x2, y1<y2");
        }
        screen.widgets.push_back(std::move(w));
    }
    return screen;
}

std::vector<WidgetRecord> hit_test(const Screen& s, Point p) {
    std::vector<WidgetRecord> hits;
    for (const auto& w : s.widgets) {
        if (w.bbox.contains(p)) hits.push_back(w);
    }
    return hits;
}

std::uint64_t hash_screen(const Screen& s) {
    std::vector<const WidgetRecord*> ordered;
    ordered.reserve(s.widgets.size());
    for (const auto& w : s.widgets) ordered.push_back(&w);
    std::sort(ordered.begin(), ordered.end(),
              [](const WidgetRecord* a, const WidgetRecord* b) { return a->index < b->index; });

    std::uint64_t h = kEmptyScreenDigest;
    for (const WidgetRecord* w : ordered) {
        fnv_accumulate(h, w->widget_type.data(), w->widget_type.size());
        unsigned char us = 0x1f;
        fnv_accumulate(h, &us, 1);
        fnv_accumulate(h, w->content.data(), w->content.size());
        fnv_accumulate(h, &us, 1);
        unsigned char cells[4] = {quantize(w->bbox.x1), quantize(w->bbox.y1),
                                  quantize(w->bbox.x2), quantize(w->bbox.y2)};
        fnv_accumulate(h, cells, 4);
        unsigned char rs = 0x1e;
        fnv_accumulate(h, &rs, 1);
    }
    return h;
}

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
    return std::string(buf);
}

std::uint64_t digest_from_hex(const std::string& hex) {
    return std::stoull(hex, nullptr, 16);
}

} // namespace guiagent
