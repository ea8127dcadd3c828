#pragma once

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "guiagent/errors.hpp"
#include "guiagent/screen.hpp"

namespace guiagent {

// Personalized information repository of (relation, field, value) triplets
// with regex-validated capture, change detection, an append-only audit log,
// and context injection for the decision pipeline.
//
// The hot store and the change log persist separately:
//   store file : JSON map  {"relation|field": value}
//   log file   : JSON lines {tick, r, f, old, new}

enum class MemoryErrc { ValidationFailed, UnknownField, NothingMatched, BadFieldSpec };
using MemoryError = CodedError<MemoryErrc>;

struct PersonalTriple {
    std::string relation; // e.g. "mother"
    std::string field;    // e.g. "phone_number"
    std::string value;
};

// Validation patterns are written full-match (a leading ^ / trailing $ is
// accepted and stripped); capture scans widget text for the leftmost
// substring matching the same pattern.
struct FieldSpec {
    std::string field;
    std::string pattern;
    std::string label;
};

struct ChangeRecord {
    long tick = 0;
    std::string relation;
    std::string field;
    std::optional<std::string> old_value; // absent for first insertion
    std::string new_value;
};

enum class UpdateOutcome { Inserted, Changed, Unchanged };

struct Slot {
    std::string relation;
    std::string field;
    bool operator==(const Slot&) const = default;
    bool operator<(const Slot& o) const {
        return std::tie(relation, field) < std::tie(o.relation, o.field);
    }
};

// Built-in field registry: phone_number ^1\d{10}$, address (non-empty, at
// most 200 bytes), id_number ^\d{17}[\dXx]$. Replaceable via the registry
// file (JSON array of {field, pattern, label}).
std::vector<FieldSpec> default_field_specs();

class MemoryStore {
public:
    MemoryStore();
    explicit MemoryStore(std::vector<FieldSpec> fields);

    void register_field(const FieldSpec& spec); // throws BadFieldSpec on bad regex
    bool has_field(const std::string& field) const;

    // Latest value for the normalized (relation, field) key, if any.
    std::optional<std::string> retrieve(const std::string& relation,
                                        const std::string& field) const;

    // Validates against the field pattern, then inserts/replaces. Insertions
    // and changes append one audit record; equal values append none.
    UpdateOutcome update(const PersonalTriple& triple, long tick);

    // Scans widget content in index order for the leftmost substring matching
    // the field pattern, stores it for the slot, and returns it.
    std::string capture_from_screen(const Slot& slot, const Screen& screen, long tick);

    // Tick-ordered audit records for one key.
    std::vector<ChangeRecord> history(const std::string& relation,
                                      const std::string& field) const;
    const std::vector<ChangeRecord>& change_log() const { return log_; }

    std::map<std::string, std::string> snapshot() const; // "r|f" -> value

    std::string save_store() const;
    std::string save_log() const;
    void load_store(const std::string& store_json);

private:
    struct CompiledField {
        FieldSpec spec;
        std::regex full;   // anchored, for validation
        std::regex search; // unanchored, for capture
    };
    const CompiledField& field_or_throw(const std::string& field) const;
    static std::string normalize_key(const std::string& s);

    std::map<std::string, CompiledField> fields_;
    std::map<std::pair<std::string, std::string>, std::string> store_;
    std::vector<ChangeRecord> log_;
};

// ---------------------------------------------------------------------------
// Slot parsing & context injection
// ---------------------------------------------------------------------------

// Deterministic stand-in for model-driven slot parsing: relation aliases and
// field keywords are looked up verbatim (case-insensitive for ASCII) in the
// instruction text. Pluggable: replace the lexicon, or bypass parse_slots and
// hand slots to inject_context directly.
class SlotLexicon {
public:
    SlotLexicon(); // ships with a small default alias table

    void add_relation_alias(const std::string& alias, const std::string& relation);
    void add_field_keyword(const std::string& keyword, const std::string& field);

    // Every (relation, field) pair implied by the instruction, ordered by the
    // relation's position in the text.
    std::vector<Slot> parse_slots(const std::string& instruction) const;

private:
    std::vector<std::pair<std::string, std::string>> relation_aliases_; // alias -> relation
    std::vector<std::pair<std::string, std::string>> field_keywords_;   // keyword -> field
};

struct ContextResolution {
    std::string context_block; // "[context]\nr.f=v\n..." or empty
    std::vector<std::pair<Slot, std::string>> resolved;
    std::vector<Slot> unresolved; // lets the pipeline raise need_feedback
};

// Resolves each slot via retrieve, then (when a screen is supplied) via
// capture_from_screen. Partial resolution is a valid result.
ContextResolution inject_context(MemoryStore& store, const std::string& instruction,
                                 const std::vector<Slot>& slots, const Screen* screen,
                                 long tick);

} // namespace guiagent
