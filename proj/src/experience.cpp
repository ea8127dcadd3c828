#include "guiagent/experience.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <json.hpp>

#include "guiagent/screen.hpp"

namespace guiagent {
namespace {

using ordered_json = nlohmann::ordered_json;

// ASCII and common CJK punctuation dropped during query normalization.
const std::set<std::string>& punctuation_utf8() {
    static const std::set<std::string> punct = {
        "，", "。", "！", "？", "、", "：", "；", "（", "）", "“", "”", "‘", "’",
    };
    return punct;
}

} // namespace

const char* to_string(ExpStatus s) {
    switch (s) {
        case ExpStatus::Success: return "success";
        case ExpStatus::Failure: return "failure";
        case ExpStatus::InProgress: return "in_progress";
    }
    return "?";
}

std::string normalize_query(const std::string& q) {
    std::string out;
    out.reserve(q.size());
    for (std::size_t i = 0; i < q.size();) {
        unsigned char c = static_cast<unsigned char>(q[i]);
        if (c < 0x80) {
            if (std::isalnum(c)) {
                out += static_cast<char>(std::tolower(c));
            } else if (std::isspace(c)) {
                out += ' ';
            } // ASCII punctuation dropped
            ++i;
            continue;
        }
        std::size_t len = (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : 4;
        len = std::min(len, q.size() - i);
        std::string unit = q.substr(i, len);
        if (!punctuation_utf8().count(unit)) out += unit;
        i += len;
    }
    // collapse runs of spaces and trim
    std::string collapsed;
    bool prev_space = true;
    for (char c : out) {
        if (c == ' ') {
            if (!prev_space) collapsed += ' ';
            prev_space = true;
        } else {
            collapsed += c;
            prev_space = false;
        }
    }
    if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
    return collapsed;
}

bool default_query_match(const std::string& stored, const std::string& current) {
    std::string a = normalize_query(stored), b = normalize_query(current);
    if (a == b) return true;

    auto tokens = [](const std::string& s) {
        std::set<std::string> out;
        std::istringstream in(s);
        std::string tok;
        while (in >> tok) out.insert(tok);
        return out;
    };
    std::set<std::string> ta = tokens(a), tb = tokens(b);
    if (ta.empty() || tb.empty()) return false;
    std::size_t inter = 0;
    for (const auto& t : ta) inter += tb.count(t);
    std::size_t uni = ta.size() + tb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni) >= 0.9;
}

ArchiveOutcome ExperiencePool::archive(ExperienceEntry entry) {
    if (entry.status != ExpStatus::Success || entry.steps.empty()) {
        return ArchiveOutcome::Rejected;
    }
    const Action& last = entry.steps.back().action;
    if (!last.status || *last.status != TaskStatus::Finish) {
        return ArchiveOutcome::Rejected;
    }
    entries_.push_back(std::move(entry));
    return ArchiveOutcome::Archived;
}

const ExperienceEntry* ExperiencePool::match(const std::string& query,
                                             const QueryMatcher& matcher) {
    ++n_total_;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (matcher(it->query, query)) {
            ++n_hit_;
            return &*it;
        }
    }
    return nullptr;
}

double ExperiencePool::hit_rate() const {
    if (n_total_ == 0) {
        throw ExperienceError(ExperienceErrc::NoQueriesYet, "no queries recorded yet");
    }
    return static_cast<double>(n_hit_) / static_cast<double>(n_total_);
}

std::string ExperiencePool::save_log() const {
    std::string out;
    for (const auto& e : entries_) {
        ordered_json header;
        header["q"] = e.query;
        header["S"] = to_string(e.status);
        header["T"] = {{"start", e.start_tick}, {"end", e.end_tick},
                       {"duration", e.duration_ticks()}};
        out += header.dump() + "\n";
        for (const auto& step : e.steps) {
            out += "{\"digest\":\"" + digest_hex(step.pre_digest) +
                   "\",\"action\":" + serialize_action(step.action) + "}\n";
        }
    }
    return out;
}

ExperiencePool ExperiencePool::load_log(const std::string& text) {
    ExperiencePool pool;
    std::istringstream in(text);
    std::string line;
    std::optional<ExperienceEntry> current;
    auto flush = [&] {
        if (current) {
            pool.entries_.push_back(std::move(*current));
            current.reset();
        }
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ordered_json doc = ordered_json::parse(line);
        if (doc.contains("q")) {
            flush();
            ExperienceEntry e;
            e.query = doc.at("q").get<std::string>();
            std::string s = doc.at("S").get<std::string>();
            e.status = s == "success"     ? ExpStatus::Success
                       : s == "failure"   ? ExpStatus::Failure
                                          : ExpStatus::InProgress;
            e.start_tick = doc.at("T").at("start").get<long>();
            e.end_tick = doc.at("T").at("end").get<long>();
            current = std::move(e);
        } else {
            if (!current) {
                throw ExperienceError(ExperienceErrc::EnvFault,
                                      "step line before any header in experience log");
            }
            current->steps.push_back(
                {digest_from_hex(doc.at("digest").get<std::string>()),
                 parse_action(doc.at("action").dump())});
        }
    }
    flush();
    return pool;
}

ReplayResult replay(const ExperienceEntry& entry, ReplayEnv& env, bool validated) {
    for (std::size_t i = 0; i < entry.steps.size(); ++i) {
        if (validated && env.current_digest() != entry.steps[i].pre_digest) {
            return {false, i};
        }
        env.execute(entry.steps[i].action);
    }
    return {true, std::nullopt};
}

double efficiency_gain(double t_std, double t_replay) {
    if (t_std <= 0.0) {
        throw ExperienceError(ExperienceErrc::NonPositiveBaseline,
                              "standard-pipeline baseline must be positive");
    }
    return 1.0 - t_replay / t_std;
}

} // namespace guiagent
