#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "guiagent/errors.hpp"

namespace guiagent {

// Hybrid action space: structured function calls alongside GUI operations.
// The registry holds predefined tool descriptors with per-parameter defaults;
// route selection is user-driven, with the GUI as general fallback.

enum class DispatchErrc {
    DuplicateName,
    UnknownFunction,
    MissingRequiredParam,
    UnknownParam,
    BadDescriptor,
    ToolFault,
};
using DispatchError = CodedError<DispatchErrc>;

struct ParamSpec {
    std::string name;
    std::string semantic_type; // "string", "int", "string_list", ...
    bool required = false;
    std::optional<nlohmann::ordered_json> default_value; // only for optional params
};

struct FunctionDescriptor {
    std::string name;
    std::vector<ParamSpec> params;
    std::string description;
};

enum class ParamProvenance { UserSupplied, Defaulted };

struct BoundCall {
    std::string function;
    nlohmann::ordered_json args = nlohmann::ordered_json::object(); // descriptor order
    std::map<std::string, ParamProvenance> provenance;
};

class FunctionRegistry {
public:
    // Rejects duplicate names and descriptors where a required parameter
    // carries a default.
    void register_function(FunctionDescriptor descriptor);

    bool has_function(const std::string& name) const;
    const FunctionDescriptor& descriptor(const std::string& name) const;
    std::vector<std::string> names() const;

    // Binds user parameters, fills defaults for absent optional parameters,
    // rejects unknown and missing-required parameters.
    BoundCall resolve(const std::string& name, const nlohmann::ordered_json& user_params) const;

    // Registry file: JSON array of {name, params:[{name,type,required,default}],
    // description}.
    static FunctionRegistry from_json(const std::string& text);
    std::string to_json() const;

private:
    std::map<std::string, FunctionDescriptor> functions_;
    std::vector<std::string> order_;
};

// Simulated tool surface; the harness implements it over world state.
class ToolHost {
public:
    virtual ~ToolHost() = default;
    virtual nlohmann::ordered_json call(const BoundCall& call) = 0; // throws ToolFault
};

// Executes one bound call; exactly one action step in traces.
nlohmann::ordered_json execute(const BoundCall& call, ToolHost& host);

struct TaskRoute {
    enum class Kind { FunctionCall, Gui };
    Kind kind = Kind::Gui;
    std::optional<BoundCall> call; // set for FunctionCall
};

// User-driven selection: an explicitly chosen registered function wins,
// anything else routes to the GUI. No automatic inference.
TaskRoute plan_path(const std::optional<std::pair<std::string, nlohmann::ordered_json>>&
                        user_selected_function,
                    const FunctionRegistry& registry);

// The two toolkits shipped with the harness (email + social), as descriptors.
std::vector<FunctionDescriptor> builtin_toolkits();

} // namespace guiagent
