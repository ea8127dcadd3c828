#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "guiagent/action.hpp"
#include "guiagent/errors.hpp"

namespace guiagent {

// Archive of successful trajectories keyed by query, with semantic matching
// and zero-reasoning replay. Only success entries whose final action carries
// the finish status are archived; matching scans newest-first.

enum class ExperienceErrc { NoQueriesYet, NonPositiveBaseline, EnvFault };
using ExperienceError = CodedError<ExperienceErrc>;

enum class ExpStatus { Success, Failure, InProgress };
const char* to_string(ExpStatus s);

struct ExperienceStep {
    std::uint64_t pre_digest = 0; // screen digest observed before the action
    Action action;
};

struct ExperienceEntry {
    std::string query;
    ExpStatus status = ExpStatus::InProgress;
    std::vector<ExperienceStep> steps;
    long start_tick = 0;
    long end_tick = 0;

    long duration_ticks() const { return end_tick - start_tick; }
};

// Pluggable similarity predicate: (stored query, incoming query) -> accept.
using QueryMatcher = std::function<bool(const std::string&, const std::string&)>;

// Deterministic default: lowercase, strip punctuation, tokenize on
// whitespace; accept on normalized equality or token-set Jaccard >= 0.9.
bool default_query_match(const std::string& stored, const std::string& current);
std::string normalize_query(const std::string& q);

enum class ArchiveOutcome { Archived, Rejected };

class ExperiencePool {
public:
    // Archives iff status == Success, steps non-empty, and the last step is a
    // finish-status action; anything else is rejected without mutation.
    ArchiveOutcome archive(ExperienceEntry entry);

    // Newest-first scan, first accepted match. Every call counts toward
    // N_total; hits additionally increment N_hit.
    const ExperienceEntry* match(const std::string& query,
                                 const QueryMatcher& matcher = default_query_match);

    double hit_rate() const; // N_hit / N_total; throws NoQueriesYet when N_total == 0

    std::size_t size() const { return entries_.size(); }
    long n_total() const { return n_total_; }
    long n_hit() const { return n_hit_; }
    const std::vector<ExperienceEntry>& entries() const { return entries_; }

    // Experience log: per entry a header line {"q":...,"S":...,"T":{...}}
    // followed by one {"digest":...,"action":...} line per step.
    std::string save_log() const;
    static ExperiencePool load_log(const std::string& text);

private:
    std::vector<ExperienceEntry> entries_;
    long n_total_ = 0;
    long n_hit_ = 0;
};

// Device-side surface replay drives. The harness device handle implements it;
// tests may substitute fakes.
class ReplayEnv {
public:
    virtual ~ReplayEnv() = default;
    virtual std::uint64_t current_digest() = 0;
    virtual void execute(const Action& action) = 0; // throws on environment fault
};

struct ReplayResult {
    bool completed = false;
    std::optional<std::size_t> diverged_at; // step index, validated mode only
};

// Executes the recorded actions strictly in order with no policy involvement.
// In validated mode (default) each step first checks that the live digest
// equals the recorded one and reports divergence instead of acting.
ReplayResult replay(const ExperienceEntry& entry, ReplayEnv& env, bool validated = true);

// η = 1 - T_replay / T_std.
double efficiency_gain(double t_std, double t_replay);

} // namespace guiagent
