// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/domain.hpp>
#include <issuelink/git_repo.hpp>
#include <issuelink/schema_registry.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

struct TSLanguage;

namespace issuelink
{

/// How a doc comment attaches to a definition.
struct DocRule
{
    enum class Kind
    {
        /// Contiguous comment siblings directly above the definition.
        preceding_comments,
        /// A string literal as the first statement of the body.
        interior_docstring,
    };

    Kind kind = Kind::preceding_comments;
    std::vector<std::string> comment_node_types;
    std::vector<std::string> prefixes;
    std::vector<std::string> skip_node_types;
    std::string body_field = "body";
};

struct LanguageProfile
{
    std::string id;
    std::vector<std::string> extensions;
    std::string definition_query; // functions and methods
    std::string structure_query;  // classes, structs, types
    DocRule doc;
    const TSLanguage* grammar = nullptr;
};

/// The grammars compiled into this binary, by name.
[[nodiscard]] auto builtin_grammar(std::string_view name) -> const TSLanguage*;

/// Profiles loaded from a query directory laid out as
/// `languages.json` + `<id>/definitions.scm` + `<id>/structures.scm`.
class LanguageRegistry
{
  public:
    /// Throws SetupError on unreadable files, unknown grammars, queries that
    /// do not compile or lack @name/@definition captures, or overlapping
    /// extension sets.
    static auto load(const std::filesystem::path& dir) -> LanguageRegistry;

    /// $ISSUELINK_QUERY_DIR, else the directory configured at build time.
    static auto default_directory() -> std::filesystem::path;

    [[nodiscard]] auto for_path(std::string_view path) const -> const LanguageProfile*;
    [[nodiscard]] auto profiles() const -> const std::vector<LanguageProfile>& { return _profiles; }
    [[nodiscard]] auto supported_extensions() const -> std::vector<std::string>;

  private:
    std::vector<LanguageProfile> _profiles;
};

enum class DefinitionKind
{
    function,
    structure,
};

struct DefinitionMatch
{
    DefinitionKind kind = DefinitionKind::function;
    std::string name;
    int start_line = 0; // 1-based, inclusive
    int end_line = 0;
    /// The complete source lines spanning the definition, verbatim.
    std::string text;
    std::optional<std::string> doc;
};

struct CodeLocation
{
    std::string commit;
    std::string path;
    std::string name;
};

/// Parses `source` with the profile's grammar and returns every definition
/// captured by either query, in source order within each query.
[[nodiscard]] auto extract_definitions(const LanguageProfile& profile, std::string_view source, bool* parse_error = nullptr)
    -> std::vector<DefinitionMatch>;

/// Codebase functions: definitions, docs and line ranges at any commit, read
/// from the object store (the working tree is never touched).
class CodeNavigator
{
  public:
    CodeNavigator(std::shared_ptr<const GitRepository> repo, std::shared_ptr<const LanguageRegistry> languages);

    /// Functions first, then structures. Exact name match, falling back to a
    /// case-insensitive match. Throws ToolError for each failure mode.
    [[nodiscard]] auto find_definitions(const CodeLocation& loc) const -> std::vector<DefinitionMatch>;

    [[nodiscard]] auto fetch_definition(const CodeLocation& loc) const -> std::string;
    [[nodiscard]] auto fetch_document(const CodeLocation& loc) const -> std::string;
    [[nodiscard]] auto fetch_lines_in_file(std::string_view commit, std::string_view path, int start, int end) const
        -> std::string;

    [[nodiscard]] auto bindings() const -> std::vector<ToolBinding>;

  private:
    auto read_file(std::string_view commit, std::string_view path) const -> std::string;

    std::shared_ptr<const GitRepository> _repo;
    std::shared_ptr<const LanguageRegistry> _languages;
};

inline constexpr std::string_view kEndOfFileMarker = "(end of file)";
inline constexpr std::string_view kNoDocumentation = "no documentation";

/// Splits on '\n'. A trailing newline does not start an extra line.
[[nodiscard]] auto split_lines(std::string_view text) -> std::vector<std::string_view>;

} // namespace issuelink
