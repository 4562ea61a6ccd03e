// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/domain.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace issuelink
{

enum class ParamType
{
    string,
    integer,
};

struct ToolParam
{
    std::string name;
    ParamType type = ParamType::string;
    bool required = false;
    std::string description;
    std::vector<std::string> allowed_values; // empty = unrestricted
};

enum class ToolCategory
{
    git,
    issue,
    codebase,
    control,
};

[[nodiscard]] auto to_string(ToolCategory category) -> std::string_view;

struct ToolSchema
{
    std::string name;
    std::string description;
    ToolCategory category = ToolCategory::git;
    std::vector<ToolParam> parameters;

    /// JSON-schema object describing the parameters, as declared on the wire.
    [[nodiscard]] auto parameters_json_schema() const -> nlohmann::json;

    /// Human-readable signature, e.g. `commit_diff(commit_hash: string)`.
    [[nodiscard]] auto signature() const -> std::string;
};

struct ToolCall
{
    std::string call_id;
    std::string name;
    /// Parsed argument object. When the model sent text that is not a JSON
    /// object, this holds that text as a JSON string and validation fails.
    nlohmann::json arguments = nlohmann::json::object();
};

struct ToolResult
{
    std::string call_id;
    std::string payload;
    std::size_t byte_size = 0;
    bool pruned = false;
    bool is_error = false;

    static auto ok(std::string call_id, std::string payload) -> ToolResult;
    static auto error(std::string call_id, std::string message) -> ToolResult;
};

/// Receives arguments that already passed schema validation. Throws ToolError
/// for in-band failures.
using ToolHandler = std::function<std::string(const nlohmann::json& arguments)>;

struct ToolBinding
{
    ToolSchema schema;
    ToolHandler handler;
};

class RegistrationError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Routes tool calls by name to the extractor that registered them.
class SchemaRegistry
{
  public:
    SchemaRegistry() = default;

    /// Throws RegistrationError on a duplicate name, within `tools` or
    /// against anything registered earlier.
    explicit SchemaRegistry(std::vector<ToolBinding> tools);

    /// Adds more tools. Existing names can not be shadowed.
    void extend(std::vector<ToolBinding> tools);

    [[nodiscard]] auto size() const noexcept -> std::size_t { return _order.size(); }
    [[nodiscard]] auto empty() const noexcept -> bool { return _order.empty(); }
    [[nodiscard]] auto contains(std::string_view name) const -> bool;
    [[nodiscard]] auto find(std::string_view name) const -> const ToolSchema*;

    /// Schemas in registration order.
    [[nodiscard]] auto schemas() const -> std::vector<const ToolSchema*>;
    [[nodiscard]] auto names() const -> std::vector<std::string>;

    /// Never throws. Unknown names and malformed arguments come back as error
    /// payloads naming what would have been valid.
    [[nodiscard]] auto route(const ToolCall& call) const -> ToolResult;

  private:
    std::map<std::string, ToolBinding, std::less<>> _tools;
    std::vector<std::string> _order;
};

/// Checks `arguments` against the schema; returns a description of the
/// problem, or nullopt when they are acceptable.
[[nodiscard]] auto validate_arguments(const ToolSchema& schema, const nlohmann::json& arguments)
    -> std::optional<std::string>;

// Argument accessors for handlers. Validation has already run, so these only
// apply defaults.
[[nodiscard]] auto arg_string(const nlohmann::json& args, std::string_view name, std::string fallback = {})
    -> std::string;
[[nodiscard]] auto arg_int(const nlohmann::json& args, std::string_view name, int fallback) -> int;
[[nodiscard]] auto arg_has(const nlohmann::json& args, std::string_view name) -> bool;

/// Common `page` / `page_size` parameter declarations.
[[nodiscard]] auto pagination_params(int default_page_size = Pagination::kDefaultPageSize) -> std::vector<ToolParam>;

/// Reads `page` / `page_size`, applying defaults and range checks.
[[nodiscard]] auto arg_pagination(const nlohmann::json& args, int default_page_size = Pagination::kDefaultPageSize)
    -> Pagination;

} // namespace issuelink
