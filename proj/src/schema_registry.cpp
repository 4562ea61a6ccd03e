// SPDX-License-Identifier: Apache-2.0
#include <issuelink/schema_registry.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>

namespace issuelink
{

using nlohmann::json;

auto to_string(ToolCategory category) -> std::string_view
{
    switch (category)
    {
        case ToolCategory::git: return "git";
        case ToolCategory::issue: return "issue";
        case ToolCategory::codebase: return "codebase";
        case ToolCategory::control: return "control";
    }
    return "git";
}

namespace
{
    auto type_name(ParamType type) -> std::string_view
    {
        return type == ParamType::integer ? "integer" : "string";
    }
} // namespace

auto ToolSchema::parameters_json_schema() const -> json
{
    auto properties = json::object();
    auto required = json::array();
    for (auto const& p: parameters)
    {
        auto prop = json { { "type", type_name(p.type) }, { "description", p.description } };
        if (!p.allowed_values.empty())
            prop["enum"] = p.allowed_values;
        properties[p.name] = std::move(prop);
        if (p.required)
            required.push_back(p.name);
    }
    return json {
        { "type", "object" },
        { "properties", std::move(properties) },
        { "required", std::move(required) },
        { "additionalProperties", false },
    };
}

auto ToolSchema::signature() const -> std::string
{
    std::string out = name + "(";
    for (std::size_t i = 0; i < parameters.size(); ++i)
    {
        auto const& p = parameters[i];
        if (i)
            out += ", ";
        out += fmt::format("{}{}: {}", p.name, p.required ? "" : "?", type_name(p.type));
    }
    return out + ")";
}

auto ToolResult::ok(std::string call_id, std::string payload) -> ToolResult
{
    auto const size = payload.size();
    return ToolResult { std::move(call_id), std::move(payload), size, false, false };
}

auto ToolResult::error(std::string call_id, std::string message) -> ToolResult
{
    auto payload = "error: " + message;
    auto const size = payload.size();
    return ToolResult { std::move(call_id), std::move(payload), size, false, true };
}

SchemaRegistry::SchemaRegistry(std::vector<ToolBinding> tools)
{
    extend(std::move(tools));
}

void SchemaRegistry::extend(std::vector<ToolBinding> tools)
{
    // Validate the whole batch before mutating anything.
    std::vector<std::string> incoming;
    for (auto const& t: tools)
    {
        auto const& name = t.schema.name;
        if (name.empty())
            throw RegistrationError("tool registration with an empty name");
        if (_tools.contains(name) || std::find(incoming.begin(), incoming.end(), name) != incoming.end())
            throw RegistrationError(fmt::format("duplicate tool name '{}'", name));
        if (!t.handler)
            throw RegistrationError(fmt::format("tool '{}' has no handler", name));
        incoming.push_back(name);
    }
    for (auto& t: tools)
    {
        _order.push_back(t.schema.name);
        auto key = t.schema.name;
        _tools.emplace(std::move(key), std::move(t));
    }
}

auto SchemaRegistry::contains(std::string_view name) const -> bool
{
    return _tools.find(name) != _tools.end();
}

auto SchemaRegistry::find(std::string_view name) const -> const ToolSchema*
{
    auto it = _tools.find(name);
    return it == _tools.end() ? nullptr : &it->second.schema;
}

auto SchemaRegistry::schemas() const -> std::vector<const ToolSchema*>
{
    std::vector<const ToolSchema*> out;
    out.reserve(_order.size());
    for (auto const& name: _order)
        out.push_back(&_tools.find(name)->second.schema);
    return out;
}

auto SchemaRegistry::names() const -> std::vector<std::string>
{
    return _order;
}

auto SchemaRegistry::route(const ToolCall& call) const -> ToolResult
{
    auto it = _tools.find(call.name);
    if (it == _tools.end())
    {
        std::string valid;
        for (auto const& n: _order)
            valid += (valid.empty() ? "" : ", ") + n;
        return ToolResult::error(call.call_id,
                                 fmt::format("unknown function '{}'. Valid functions ({}): {}",
                                             call.name,
                                             _order.size(),
                                             valid.empty() ? "(none)" : valid));
    }

    auto const& binding = it->second;
    if (auto problem = validate_arguments(binding.schema, call.arguments))
        return ToolResult::error(
            call.call_id,
            fmt::format("malformed arguments for {}: {}. Expected {}", call.name, *problem, binding.schema.signature()));

    try
    {
        return ToolResult::ok(call.call_id, binding.handler(call.arguments));
    }
    catch (ToolError const& e)
    {
        return ToolResult::error(call.call_id, e.what());
    }
    catch (std::exception const& e)
    {
        return ToolResult::error(call.call_id, fmt::format("internal failure in {}: {}", call.name, e.what()));
    }
}

auto validate_arguments(const ToolSchema& schema, const json& arguments) -> std::optional<std::string>
{
    if (arguments.is_null() && std::none_of(schema.parameters.begin(), schema.parameters.end(), [](auto const& p) {
            return p.required;
        }))
        return std::nullopt;
    if (!arguments.is_object())
        return std::string("arguments must be a JSON object");

    for (auto const& [key, value]: arguments.items())
    {
        auto p = std::find_if(
            schema.parameters.begin(), schema.parameters.end(), [&](auto const& q) { return q.name == key; });
        if (p == schema.parameters.end())
            return fmt::format("unexpected parameter '{}'", key);
        if (p->type == ParamType::integer && !value.is_number_integer())
            return fmt::format("parameter '{}' must be an integer", key);
        if (p->type == ParamType::string && !value.is_string())
            return fmt::format("parameter '{}' must be a string", key);
        if (!p->allowed_values.empty()
            && std::find(p->allowed_values.begin(), p->allowed_values.end(), value.get<std::string>())
                   == p->allowed_values.end())
            return fmt::format("parameter '{}' must be one of: {}", key, fmt::join(p->allowed_values, ", "));
    }
    for (auto const& p: schema.parameters)
        if (p.required && !arguments.contains(p.name))
            return fmt::format("missing required parameter '{}'", p.name);
    return std::nullopt;
}

auto arg_has(const json& args, std::string_view name) -> bool
{
    return args.is_object() && args.contains(name);
}

auto arg_string(const json& args, std::string_view name, std::string fallback) -> std::string
{
    if (!arg_has(args, name))
        return fallback;
    return args.at(std::string(name)).get<std::string>();
}

auto arg_int(const json& args, std::string_view name, int fallback) -> int
{
    if (!arg_has(args, name))
        return fallback;
    auto const v = args.at(std::string(name)).get<std::int64_t>();
    return static_cast<int>(std::clamp<std::int64_t>(v, INT32_MIN, INT32_MAX));
}

auto pagination_params(int default_page_size) -> std::vector<ToolParam>
{
    return {
        { "page", ParamType::integer, false, "0-based page number (default 0)", {} },
        { "page_size",
          ParamType::integer,
          false,
          fmt::format("results per page, 1..{} (default {})", Pagination::kMaxPageSize, default_page_size),
          {} },
    };
}

auto arg_pagination(const json& args, int default_page_size) -> Pagination
{
    return Pagination::make(arg_int(args, "page", 0), arg_int(args, "page_size", default_page_size));
}

} // namespace issuelink
