#include "guiagent/memory_store.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace guiagent {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string strip_anchors(const std::string& pattern) {
    std::string p = pattern;
    if (!p.empty() && p.front() == '^') p.erase(p.begin());
    if (!p.empty() && p.back() == '$' && (p.size() < 2 || p[p.size() - 2] != '\\')) p.pop_back();
    return p;
}

std::string ascii_lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::vector<FieldSpec> default_field_specs() {
    return {
        {"phone_number", "^1\\d{10}$", "Phone number"},
        {"address", "^.{1,200}$", "Address"},
        {"id_number", "^\\d{17}[\\dXx]$", "ID number"},
    };
}

MemoryStore::MemoryStore() : MemoryStore(default_field_specs()) {}

MemoryStore::MemoryStore(std::vector<FieldSpec> fields) {
    for (const auto& spec : fields) register_field(spec);
}

void MemoryStore::register_field(const FieldSpec& spec) {
    std::string body = strip_anchors(spec.pattern);
    try {
        CompiledField cf{spec, std::regex("^(?:" + body + ")$"), std::regex(body)};
        fields_.insert_or_assign(normalize_key(spec.field), std::move(cf));
    } catch (const std::regex_error& e) {
        throw MemoryError(MemoryErrc::BadFieldSpec,
                          "pattern for " + spec.field + " does not compile: " + e.what());
    }
}

bool MemoryStore::has_field(const std::string& field) const {
    return fields_.count(normalize_key(field)) > 0;
}

const MemoryStore::CompiledField& MemoryStore::field_or_throw(const std::string& field) const {
    auto it = fields_.find(normalize_key(field));
    if (it == fields_.end()) {
        throw MemoryError(MemoryErrc::UnknownField, "unregistered field: " + field);
    }
    return it->second;
}

std::string MemoryStore::normalize_key(const std::string& s) {
    std::string t = s;
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    t.erase(t.begin(), std::find_if(t.begin(), t.end(), not_space));
    t.erase(std::find_if(t.rbegin(), t.rend(), not_space).base(), t.end());
    return ascii_lower(t);
}

std::optional<std::string> MemoryStore::retrieve(const std::string& relation,
                                                 const std::string& field) const {
    auto it = store_.find({normalize_key(relation), normalize_key(field)});
    if (it == store_.end()) return std::nullopt;
    return it->second;
}

UpdateOutcome MemoryStore::update(const PersonalTriple& triple, long tick) {
    const CompiledField& cf = field_or_throw(triple.field);
    if (!std::regex_match(triple.value, cf.full)) {
        throw MemoryError(MemoryErrc::ValidationFailed,
                          "value '" + triple.value + "' rejected by pattern for " + triple.field);
    }
    auto key = std::make_pair(normalize_key(triple.relation), normalize_key(triple.field));
    auto it = store_.find(key);
    if (it == store_.end()) {
        store_.emplace(key, triple.value);
        log_.push_back({tick, key.first, key.second, std::nullopt, triple.value});
        return UpdateOutcome::Inserted;
    }
    if (it->second == triple.value) return UpdateOutcome::Unchanged;
    log_.push_back({tick, key.first, key.second, it->second, triple.value});
    it->second = triple.value;
    return UpdateOutcome::Changed;
}

std::string MemoryStore::capture_from_screen(const Slot& slot, const Screen& screen, long tick) {
    const CompiledField& cf = field_or_throw(slot.field);

    std::vector<const WidgetRecord*> ordered;
    for (const auto& w : screen.widgets) ordered.push_back(&w);
    std::sort(ordered.begin(), ordered.end(),
              [](const WidgetRecord* a, const WidgetRecord* b) { return a->index < b->index; });

    for (const WidgetRecord* w : ordered) {
        std::smatch m;
        if (std::regex_search(w->content, m, cf.search)) {
            std::string value = m.str(0);
            update({slot.relation, slot.field, value}, tick);
            return value;
        }
    }
    throw MemoryError(MemoryErrc::NothingMatched,
                      "no widget content matches pattern for " + slot.field);
}

std::vector<ChangeRecord> MemoryStore::history(const std::string& relation,
                                               const std::string& field) const {
    std::string r = normalize_key(relation), f = normalize_key(field);
    std::vector<ChangeRecord> out;
    for (const auto& rec : log_) {
        if (rec.relation == r && rec.field == f) out.push_back(rec);
    }
    return out;
}

std::map<std::string, std::string> MemoryStore::snapshot() const {
    std::map<std::string, std::string> out;
    for (const auto& [key, value] : store_) out[key.first + "|" + key.second] = value;
    return out;
}

std::string MemoryStore::save_store() const {
    ordered_json doc = ordered_json::object();
    for (const auto& [key, value] : snapshot()) doc[key] = value;
    return doc.dump();
}

std::string MemoryStore::save_log() const {
    std::string out;
    for (const auto& rec : log_) {
        ordered_json line;
        line["tick"] = rec.tick;
        line["r"] = rec.relation;
        line["f"] = rec.field;
        if (rec.old_value) {
            line["old"] = *rec.old_value;
        } else {
            line["old"] = nullptr;
        }
        line["new"] = rec.new_value;
        out += line.dump() + "\n";
    }
    return out;
}

void MemoryStore::load_store(const std::string& store_json) {
    ordered_json doc = ordered_json::parse(store_json);
    for (const auto& [key, value] : doc.items()) {
        auto bar = key.find('|');
        if (bar == std::string::npos) {
            throw MemoryError(MemoryErrc::BadFieldSpec, "store key must be 'relation|field'");
        }
        store_[{key.substr(0, bar), key.substr(bar + 1)}] = value.get<std::string>();
    }
}

// ---------------------------------------------------------------------------

SlotLexicon::SlotLexicon() {
    add_relation_alias("mom", "mother");
    add_relation_alias("mommy", "mother");
    add_relation_alias("mother", "mother");
    add_relation_alias("妈妈", "mother");
    add_relation_alias("grandson", "grandson");
    add_relation_alias("孙子", "grandson");
    add_relation_alias("myself", "self");
    add_relation_alias("my own", "self");
    add_relation_alias("this device", "self");

    add_field_keyword("call", "phone_number");
    add_field_keyword("phone", "phone_number");
    add_field_keyword("number", "phone_number");
    add_field_keyword("message", "phone_number");
    add_field_keyword("sms", "phone_number");
    add_field_keyword("电话", "phone_number");
    add_field_keyword("address", "address");
    add_field_keyword("navigate", "address");
    add_field_keyword("地址", "address");
    add_field_keyword("id card", "id_number");
    add_field_keyword("身份证", "id_number");
}

void SlotLexicon::add_relation_alias(const std::string& alias, const std::string& relation) {
    relation_aliases_.emplace_back(ascii_lower(alias), relation);
}

void SlotLexicon::add_field_keyword(const std::string& keyword, const std::string& field) {
    field_keywords_.emplace_back(ascii_lower(keyword), field);
}

std::vector<Slot> SlotLexicon::parse_slots(const std::string& instruction) const {
    std::string text = ascii_lower(instruction);

    // Fields implied anywhere in the text, in keyword-table order.
    std::vector<std::string> fields;
    for (const auto& [keyword, field] : field_keywords_) {
        if (text.find(keyword) != std::string::npos &&
            std::find(fields.begin(), fields.end(), field) == fields.end()) {
            fields.push_back(field);
        }
    }

    // Relations ordered by their position in the text; longest alias wins at
    // equal positions so "grandson" is not shadowed by a shorter alias.
    std::vector<std::pair<std::size_t, std::string>> relations;
    for (const auto& [alias, relation] : relation_aliases_) {
        std::size_t pos = text.find(alias);
        if (pos == std::string::npos) continue;
        bool dup = false;
        for (auto& [p, r] : relations) {
            if (r == relation) {
                dup = true;
                if (pos < p) p = pos;
            }
        }
        if (!dup) relations.emplace_back(pos, relation);
    }
    std::sort(relations.begin(), relations.end());

    std::vector<Slot> slots;
    for (const auto& [pos, relation] : relations) {
        for (const auto& field : fields) slots.push_back({relation, field});
    }
    return slots;
}

ContextResolution inject_context(MemoryStore& store, const std::string& instruction,
                                 const std::vector<Slot>& slots, const Screen* screen,
                                 long tick) {
    (void)instruction; // the block is appended to the instruction by the caller
    ContextResolution res;
    for (const auto& slot : slots) {
        std::optional<std::string> value = store.retrieve(slot.relation, slot.field);
        if (!value && screen) {
            try {
                value = store.capture_from_screen(slot, *screen, tick);
            } catch (const MemoryError&) {
                value = std::nullopt;
            }
        }
        if (value) {
            res.resolved.emplace_back(slot, *value);
        } else {
            res.unresolved.push_back(slot);
        }
    }
    if (!res.resolved.empty()) {
        res.context_block = "[context]";
        for (const auto& [slot, value] : res.resolved) {
            res.context_block += "\n" + slot.relation + "." + slot.field + "=" + value;
        }
    }
    return res;
}

} // namespace guiagent
