#include "guiagent/dispatch.hpp"

namespace guiagent {

using ordered_json = nlohmann::ordered_json;

void FunctionRegistry::register_function(FunctionDescriptor descriptor) {
    if (functions_.count(descriptor.name)) {
        throw DispatchError(DispatchErrc::DuplicateName,
                            "function already registered: " + descriptor.name);
    }
    for (const auto& p : descriptor.params) {
        if (p.required && p.default_value) {
            throw DispatchError(DispatchErrc::BadDescriptor,
                                descriptor.name + ": required parameter '" + p.name +
                                    "' must not carry a default");
        }
    }
    order_.push_back(descriptor.name);
    functions_.emplace(descriptor.name, std::move(descriptor));
}

bool FunctionRegistry::has_function(const std::string& name) const {
    return functions_.count(name) > 0;
}

const FunctionDescriptor& FunctionRegistry::descriptor(const std::string& name) const {
    auto it = functions_.find(name);
    if (it == functions_.end()) {
        throw DispatchError(DispatchErrc::UnknownFunction, "unknown function: " + name);
    }
    return it->second;
}

std::vector<std::string> FunctionRegistry::names() const { return order_; }

BoundCall FunctionRegistry::resolve(const std::string& name,
                                    const ordered_json& user_params) const {
    const FunctionDescriptor& desc = descriptor(name);
    if (!user_params.is_object() && !user_params.is_null()) {
        throw DispatchError(DispatchErrc::UnknownParam, "parameters must be a JSON object");
    }

    for (const auto& [key, _] : user_params.items()) {
        bool known = false;
        for (const auto& p : desc.params) {
            if (p.name == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw DispatchError(DispatchErrc::UnknownParam,
                                name + " has no parameter '" + key + "'");
        }
    }

    BoundCall call;
    call.function = name;
    for (const auto& p : desc.params) {
        if (user_params.is_object() && user_params.contains(p.name)) {
            call.args[p.name] = user_params.at(p.name);
            call.provenance[p.name] = ParamProvenance::UserSupplied;
        } else if (p.default_value) {
            call.args[p.name] = *p.default_value;
            call.provenance[p.name] = ParamProvenance::Defaulted;
        } else if (p.required) {
            throw DispatchError(DispatchErrc::MissingRequiredParam,
                                name + " is missing required parameter '" + p.name + "'");
        }
    }
    return call;
}

FunctionRegistry FunctionRegistry::from_json(const std::string& text) {
    FunctionRegistry reg;
    ordered_json doc = ordered_json::parse(text);
    for (const auto& fn : doc) {
        FunctionDescriptor d;
        d.name = fn.at("name").get<std::string>();
        d.description = fn.value("description", std::string{});
        if (fn.contains("params")) {
            for (const auto& p : fn.at("params")) {
                ParamSpec spec;
                spec.name = p.at("name").get<std::string>();
                spec.semantic_type = p.value("type", std::string{"string"});
                spec.required = p.value("required", false);
                if (p.contains("default")) spec.default_value = p.at("default");
                d.params.push_back(std::move(spec));
            }
        }
        reg.register_function(std::move(d));
    }
    return reg;
}

std::string FunctionRegistry::to_json() const {
    ordered_json doc = ordered_json::array();
    for (const auto& name : order_) {
        const FunctionDescriptor& d = functions_.at(name);
        ordered_json fn;
        fn["name"] = d.name;
        fn["params"] = ordered_json::array();
        for (const auto& p : d.params) {
            ordered_json ps;
            ps["name"] = p.name;
            ps["type"] = p.semantic_type;
            ps["required"] = p.required;
            if (p.default_value) ps["default"] = *p.default_value;
            fn["params"].push_back(ps);
        }
        fn["description"] = d.description;
        doc.push_back(fn);
    }
    return doc.dump();
}

nlohmann::ordered_json execute(const BoundCall& call, ToolHost& host) {
    return host.call(call);
}

TaskRoute plan_path(
    const std::optional<std::pair<std::string, ordered_json>>& user_selected_function,
    const FunctionRegistry& registry) {
    if (!user_selected_function) {
        return TaskRoute{TaskRoute::Kind::Gui, std::nullopt};
    }
    return TaskRoute{TaskRoute::Kind::FunctionCall,
                     registry.resolve(user_selected_function->first,
                                      user_selected_function->second)};
}

std::vector<FunctionDescriptor> builtin_toolkits() {
    std::vector<FunctionDescriptor> out;
    out.push_back({"send_email",
                   {{"to", "string", true, std::nullopt},
                    {"subject", "string", false, ordered_json("")},
                    {"body", "string", false, ordered_json("")},
                    {"attachments", "string_list", false, ordered_json::array()}},
                   "Deliver an email through the device mail service"});
    out.push_back({"like",
                   {{"video_id", "string", true, std::nullopt}},
                   "Like a video by id"});
    out.push_back({"coin",
                   {{"video_id", "string", true, std::nullopt},
                    {"count", "int", false, ordered_json(1)}},
                   "Send coins to a video"});
    out.push_back({"search",
                   {{"keyword", "string", true, std::nullopt}},
                   "Keyword search over the video catalog"});
    return out;
}

} // namespace guiagent
