// SPDX-License-Identifier: Apache-2.0
#include <issuelink/code_navigator.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <tree_sitter/api.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

extern "C" {
const TSLanguage* tree_sitter_python(void);
const TSLanguage* tree_sitter_go(void);
const TSLanguage* tree_sitter_rust(void);
}

#ifndef ISSUELINK_QUERY_DIR
    #define ISSUELINK_QUERY_DIR "queries"
#endif

namespace issuelink
{

using nlohmann::json;

namespace
{
    struct ParserDeleter
    {
        void operator()(TSParser* p) const noexcept { ts_parser_delete(p); }
    };
    struct TreeDeleter
    {
        void operator()(TSTree* t) const noexcept { ts_tree_delete(t); }
    };
    struct QueryDeleter
    {
        void operator()(TSQuery* q) const noexcept { ts_query_delete(q); }
    };
    struct CursorDeleter
    {
        void operator()(TSQueryCursor* c) const noexcept { ts_query_cursor_delete(c); }
    };

    using ParserPtr = std::unique_ptr<TSParser, ParserDeleter>;
    using TreePtr = std::unique_ptr<TSTree, TreeDeleter>;
    using QueryPtr = std::unique_ptr<TSQuery, QueryDeleter>;
    using CursorPtr = std::unique_ptr<TSQueryCursor, CursorDeleter>;

    auto compile_query(const TSLanguage* grammar, std::string_view source, std::string& error) -> QueryPtr
    {
        std::uint32_t offset = 0;
        TSQueryError type = TSQueryErrorNone;
        QueryPtr q(ts_query_new(grammar, source.data(), static_cast<std::uint32_t>(source.size()), &offset, &type));
        if (!q)
            error = fmt::format("query error {} at offset {}", static_cast<int>(type), offset);
        return q;
    }

    auto capture_index(const TSQuery* q, std::string_view wanted) -> std::optional<std::uint32_t>
    {
        for (std::uint32_t i = 0; i < ts_query_capture_count(q); ++i)
        {
            std::uint32_t len = 0;
            auto const* name = ts_query_capture_name_for_id(q, i, &len);
            if (std::string_view(name, len) == wanted)
                return i;
        }
        return std::nullopt;
    }

    auto read_text_file(const std::filesystem::path& file) -> std::string
    {
        std::ifstream in(file, std::ios::binary);
        if (!in)
            throw SetupError(fmt::format("cannot read {}", file.string()));
        std::stringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    }

    auto node_text(TSNode node, std::string_view source) -> std::string_view
    {
        auto const b = ts_node_start_byte(node);
        auto const e = ts_node_end_byte(node);
        return source.substr(b, e - b);
    }

    auto last_row(TSNode node) -> std::uint32_t
    {
        auto const start = ts_node_start_point(node);
        auto const end = ts_node_end_point(node);
        return end.column == 0 && end.row > start.row ? end.row - 1 : end.row;
    }

    auto contains(const std::vector<std::string>& v, std::string_view s) -> bool
    {
        return std::find(v.begin(), v.end(), s) != v.end();
    }

    auto trim(std::string_view s) -> std::string_view
    {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.remove_suffix(1);
        return s;
    }

    /// Removes comment markers from one comment node's text.
    auto strip_comment(std::string_view text) -> std::string
    {
        text = trim(text);
        std::string out;
        if (text.starts_with("/*"))
        {
            text.remove_prefix(text.starts_with("/**") ? 3 : 2);
            if (text.ends_with("*/"))
                text.remove_suffix(2);
            for (auto line: split_lines(text))
            {
                line = trim(line);
                if (line.starts_with("*"))
                    line = trim(line.substr(1));
                if (!out.empty() || !line.empty())
                    out += std::string(line) + "\n";
            }
            while (!out.empty() && out.back() == '\n')
                out.pop_back();
            return out;
        }
        for (auto const* marker: { "//!", "///", "//" })
            if (text.starts_with(marker))
            {
                text.remove_prefix(std::string_view(marker).size());
                break;
            }
        if (text.starts_with(" "))
            text.remove_prefix(1);
        return std::string(text);
    }

    auto preceding_comment_doc(const DocRule& rule, TSNode definition, std::string_view source) -> std::optional<std::string>
    {
        std::vector<std::string> parts;
        TSNode cur = definition;
        while (true)
        {
            TSNode sib = ts_node_prev_named_sibling(cur);
            if (ts_node_is_null(sib))
                break;
            std::string_view const type = ts_node_type(sib);
            if (contains(rule.skip_node_types, type))
            {
                cur = sib;
                continue;
            }
            if (!contains(rule.comment_node_types, type))
                break;
            if (last_row(sib) + 1 < ts_node_start_point(cur).row)
                break; // separated by a blank line
            auto const text = trim(node_text(sib, source));
            bool const isDoc = std::any_of(rule.prefixes.begin(), rule.prefixes.end(), [&](auto const& p) {
                return text.starts_with(p);
            });
            if (!isDoc)
                break;
            parts.push_back(strip_comment(text));
            cur = sib;
        }
        if (parts.empty())
            return std::nullopt;
        std::reverse(parts.begin(), parts.end());
        return fmt::format("{}", fmt::join(parts, "\n"));
    }

    /// Python-style cleandoc: strip quotes, dedent continuation lines.
    auto clean_docstring(std::string_view literal) -> std::string
    {
        while (!literal.empty() && std::isalpha(static_cast<unsigned char>(literal.front())))
            literal.remove_prefix(1);
        for (auto const* q: { "\"\"\"", "'''", "\"", "'" })
        {
            std::string_view const quote(q);
            if (literal.starts_with(quote) && literal.ends_with(quote) && literal.size() >= 2 * quote.size())
            {
                literal = literal.substr(quote.size(), literal.size() - 2 * quote.size());
                break;
            }
        }
        auto lines = split_lines(literal);
        std::size_t indent = std::string::npos;
        for (std::size_t i = 1; i < lines.size(); ++i)
        {
            auto const first = lines[i].find_first_not_of(" \t");
            if (first != std::string_view::npos)
                indent = std::min(indent, first);
        }
        std::vector<std::string> cleaned;
        for (std::size_t i = 0; i < lines.size(); ++i)
        {
            auto line = lines[i];
            if (i == 0)
                line = trim(line);
            else if (indent != std::string::npos && line.size() >= indent)
                line.remove_prefix(indent);
            else
                line = trim(line);
            cleaned.emplace_back(line);
        }
        while (!cleaned.empty() && trim(cleaned.back()).empty())
            cleaned.pop_back();
        while (!cleaned.empty() && trim(cleaned.front()).empty())
            cleaned.erase(cleaned.begin());
        return fmt::format("{}", fmt::join(cleaned, "\n"));
    }

    auto interior_docstring(const DocRule& rule, TSNode definition, std::string_view source) -> std::optional<std::string>
    {
        TSNode body = ts_node_child_by_field_name(definition, rule.body_field.c_str(), static_cast<std::uint32_t>(rule.body_field.size()));
        if (ts_node_is_null(body))
            return std::nullopt;
        for (std::uint32_t i = 0; i < ts_node_named_child_count(body); ++i)
        {
            TSNode stmt = ts_node_named_child(body, i);
            std::string_view const type = ts_node_type(stmt);
            if (type == "comment")
                continue;
            TSNode literal = stmt;
            if (type == "expression_statement" && ts_node_named_child_count(stmt) > 0)
                literal = ts_node_named_child(stmt, 0);
            if (std::string_view(ts_node_type(literal)) != "string")
                return std::nullopt;
            return clean_docstring(node_text(literal, source));
        }
        return std::nullopt;
    }

    auto kind_name(DefinitionKind kind) -> std::string_view
    {
        return kind == DefinitionKind::function ? "function" : "structure";
    }

    auto iequals(std::string_view a, std::string_view b) -> bool
    {
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
                   return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
               });
    }

    auto normalize_path(std::string_view path) -> std::string
    {
        while (path.starts_with("./"))
            path.remove_prefix(2);
        while (path.starts_with("/"))
            path.remove_prefix(1);
        return std::string(path);
    }
} // namespace

auto split_lines(std::string_view text) -> std::vector<std::string_view>
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size())
    {
        auto const eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
        {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    return lines;
}

auto builtin_grammar(std::string_view name) -> const TSLanguage*
{
    if (name == "python")
        return tree_sitter_python();
    if (name == "go")
        return tree_sitter_go();
    if (name == "rust")
        return tree_sitter_rust();
    return nullptr;
}

// LanguageRegistry --------------------------------------------------------------------

auto LanguageRegistry::default_directory() -> std::filesystem::path
{
    if (auto const* env = std::getenv("ISSUELINK_QUERY_DIR"); env && *env)
        return env;
    return ISSUELINK_QUERY_DIR;
}

auto LanguageRegistry::load(const std::filesystem::path& dir) -> LanguageRegistry
{
    auto const manifest = json::parse(read_text_file(dir / "languages.json"), nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("languages"))
        throw SetupError(fmt::format("{}: invalid language manifest", (dir / "languages.json").string()));

    LanguageRegistry registry;
    std::set<std::string> seenExtensions;
    for (auto const& entry: manifest["languages"])
    {
        LanguageProfile profile;
        profile.id = entry.at("id").get<std::string>();
        profile.grammar = builtin_grammar(entry.value("grammar", profile.id));
        if (!profile.grammar)
            throw SetupError(fmt::format("language '{}': no grammar '{}' is compiled in", profile.id, entry.value("grammar", profile.id)));
        profile.extensions = entry.at("extensions").get<std::vector<std::string>>();
        for (auto const& ext: profile.extensions)
            if (!seenExtensions.insert(ext).second)
                throw SetupError(fmt::format("extension '{}' is claimed by more than one language", ext));

        auto const doc = entry.value("doc", json::object());
        auto const rule = doc.value("rule", std::string("preceding_comments"));
        if (rule == "interior_docstring")
            profile.doc.kind = DocRule::Kind::interior_docstring;
        else if (rule == "preceding_comments")
            profile.doc.kind = DocRule::Kind::preceding_comments;
        else
            throw SetupError(fmt::format("language '{}': unknown doc rule '{}'", profile.id, rule));
        profile.doc.comment_node_types = doc.value("comment_node_types", std::vector<std::string> {});
        profile.doc.prefixes = doc.value("prefixes", std::vector<std::string> {});
        profile.doc.skip_node_types = doc.value("skip_node_types", std::vector<std::string> {});
        profile.doc.body_field = doc.value("body_field", std::string("body"));

        profile.definition_query = read_text_file(dir / profile.id / "definitions.scm");
        profile.structure_query = read_text_file(dir / profile.id / "structures.scm");
        for (auto const* q: { &profile.definition_query, &profile.structure_query })
        {
            std::string error;
            auto compiled = compile_query(profile.grammar, *q, error);
            if (!compiled)
                throw SetupError(fmt::format("language '{}': {}", profile.id, error));
            if (!capture_index(compiled.get(), "name") || !capture_index(compiled.get(), "definition"))
                throw SetupError(fmt::format("language '{}': queries must capture @name and @definition", profile.id));
        }
        registry._profiles.push_back(std::move(profile));
    }
    return registry;
}

auto LanguageRegistry::for_path(std::string_view path) const -> const LanguageProfile*
{
    auto const dot = path.rfind('.');
    auto const slash = path.rfind('/');
    if (dot == std::string_view::npos || (slash != std::string_view::npos && dot < slash))
        return nullptr;
    auto const ext = path.substr(dot);
    for (auto const& p: _profiles)
        if (contains(p.extensions, ext))
            return &p;
    return nullptr;
}

auto LanguageRegistry::supported_extensions() const -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (auto const& p: _profiles)
        out.insert(out.end(), p.extensions.begin(), p.extensions.end());
    std::sort(out.begin(), out.end());
    return out;
}

// Extraction -------------------------------------------------------------------------------

auto extract_definitions(const LanguageProfile& profile, std::string_view source, bool* parse_error)
    -> std::vector<DefinitionMatch>
{
    ParserPtr parser(ts_parser_new());
    ts_parser_set_language(parser.get(), profile.grammar);
    TreePtr tree(ts_parser_parse_string(parser.get(), nullptr, source.data(), static_cast<std::uint32_t>(source.size())));
    if (!tree)
    {
        if (parse_error)
            *parse_error = true;
        return {};
    }
    auto const root = ts_tree_root_node(tree.get());
    if (parse_error)
        *parse_error = ts_node_has_error(root);

    auto const lines = split_lines(source);
    std::vector<DefinitionMatch> out;

    auto run = [&](std::string_view querySource, DefinitionKind kind) {
        std::string error;
        auto query = compile_query(profile.grammar, querySource, error);
        if (!query)
            return;
        auto const nameIdx = capture_index(query.get(), "name");
        auto const defIdx = capture_index(query.get(), "definition");
        CursorPtr cursor(ts_query_cursor_new());
        ts_query_cursor_exec(cursor.get(), query.get(), root);

        TSQueryMatch match;
        while (ts_query_cursor_next_match(cursor.get(), &match))
        {
            std::optional<TSNode> nameNode, defNode;
            for (std::uint16_t i = 0; i < match.capture_count; ++i)
            {
                if (match.captures[i].index == nameIdx)
                    nameNode = match.captures[i].node;
                if (match.captures[i].index == defIdx)
                    defNode = match.captures[i].node;
            }
            if (!nameNode || !defNode)
                continue;

            DefinitionMatch m;
            m.kind = kind;
            m.name = std::string(node_text(*nameNode, source));
            auto const firstRow = ts_node_start_point(*defNode).row;
            auto const lastRow = std::min<std::uint32_t>(last_row(*defNode), lines.empty() ? 0 : static_cast<std::uint32_t>(lines.size() - 1));
            m.start_line = static_cast<int>(firstRow) + 1;
            m.end_line = static_cast<int>(lastRow) + 1;
            for (auto row = firstRow; row <= lastRow && row < lines.size(); ++row)
            {
                if (row != firstRow)
                    m.text += '\n';
                m.text += lines[row];
            }
            m.doc = profile.doc.kind == DocRule::Kind::interior_docstring
                        ? interior_docstring(profile.doc, *defNode, source)
                        : preceding_comment_doc(profile.doc, *defNode, source);
            out.push_back(std::move(m));
        }
    };

    run(profile.definition_query, DefinitionKind::function);
    run(profile.structure_query, DefinitionKind::structure);
    return out;
}

// CodeNavigator -----------------------------------------------------------------------------

CodeNavigator::CodeNavigator(std::shared_ptr<const GitRepository> repo, std::shared_ptr<const LanguageRegistry> languages):
    _repo(std::move(repo)), _languages(std::move(languages))
{
}

auto CodeNavigator::read_file(std::string_view commit, std::string_view path) const -> std::string
{
    auto const hash = CommitHash::require(commit);
    if (!_repo->has_commit(hash))
        throw ToolError(fmt::format("commit not found: {}", hash.str()));
    auto const normalized = normalize_path(path);
    auto blob = _repo->read_blob(hash, normalized);
    if (!blob)
        throw ToolError(fmt::format("file not found at commit {}: {}", hash.str(), normalized));
    return std::move(*blob);
}

auto CodeNavigator::find_definitions(const CodeLocation& loc) const -> std::vector<DefinitionMatch>
{
    CommitHash::require(loc.commit);
    if (loc.name.empty())
        throw ToolError("name must not be empty");
    auto const* profile = _languages->for_path(loc.path);
    if (!profile)
        throw ToolError(fmt::format("unsupported language for '{}': supported extensions are {}",
                                    loc.path,
                                    fmt::join(_languages->supported_extensions(), ", ")));

    auto const source = read_file(loc.commit, loc.path);
    bool parseError = false;
    auto all = extract_definitions(*profile, source, &parseError);

    std::vector<DefinitionMatch> hits;
    for (auto const& m: all)
        if (m.name == loc.name)
            hits.push_back(m);
    if (hits.empty())
        for (auto const& m: all)
            if (iequals(m.name, loc.name))
                hits.push_back(m);
    if (!hits.empty())
        return hits;

    if (all.empty() && parseError)
        throw ToolError(fmt::format("definition not found (file did not parse): '{}' in {} at {}", loc.name, loc.path, loc.commit));

    std::set<std::string> names;
    for (auto const& m: all)
        names.insert(m.name);
    constexpr std::size_t kMaxNames = 60;
    std::vector<std::string> listed(names.begin(), names.end());
    auto const more = listed.size() > kMaxNames ? listed.size() - kMaxNames : 0;
    listed.resize(std::min(listed.size(), kMaxNames));
    throw ToolError(fmt::format("definition not found: '{}' in {} at {}. Available names: {}{}",
                                loc.name,
                                loc.path,
                                loc.commit,
                                listed.empty() ? std::string("(none)") : fmt::format("{}", fmt::join(listed, ", ")),
                                more ? fmt::format(" (and {} more)", more) : std::string()));
}

namespace
{
    auto match_header(const DefinitionMatch& m, const CodeLocation& loc) -> std::string
    {
        return fmt::format("{} {} in {} lines {}-{}", kind_name(m.kind), m.name, loc.path, m.start_line, m.end_line);
    }

    auto ambiguity_note(const std::vector<DefinitionMatch>& hits) -> std::string
    {
        bool const fn = std::any_of(hits.begin(), hits.end(), [](auto const& m) { return m.kind == DefinitionKind::function; });
        bool const st = std::any_of(hits.begin(), hits.end(), [](auto const& m) { return m.kind == DefinitionKind::structure; });
        return fn && st ? "note: the name matches both a function and a structure; all matches are shown\n" : "";
    }

    constexpr std::string_view kDivider = "\n----------------------------------------\n";
} // namespace

auto CodeNavigator::fetch_definition(const CodeLocation& loc) const -> std::string
{
    auto const hits = find_definitions(loc);
    std::string out = ambiguity_note(hits);
    for (std::size_t i = 0; i < hits.size(); ++i)
    {
        if (i)
            out += kDivider;
        out += match_header(hits[i], loc) + "\n" + hits[i].text;
    }
    return out;
}

auto CodeNavigator::fetch_document(const CodeLocation& loc) const -> std::string
{
    auto const hits = find_definitions(loc);
    if (hits.size() == 1 && !hits.front().doc)
        return fmt::format("{} for {}", kNoDocumentation, match_header(hits.front(), loc));
    std::string out = ambiguity_note(hits);
    for (std::size_t i = 0; i < hits.size(); ++i)
    {
        if (i)
            out += kDivider;
        out += match_header(hits[i], loc) + "\n" + hits[i].doc.value_or(std::string(kNoDocumentation));
    }
    return out;
}

auto CodeNavigator::fetch_lines_in_file(std::string_view commit, std::string_view path, int start, int end) const -> std::string
{
    CommitHash::require(commit);
    if (start < 1 || start > end)
        throw ToolError(fmt::format("invalid line range {}..{}: need 1 <= start <= end", start, end));
    auto const source = read_file(commit, path);
    auto const lines = split_lines(source);
    auto const count = static_cast<int>(lines.size());
    if (start > count)
        throw ToolError(fmt::format("start beyond end of file: {} has {} line(s)", normalize_path(path), count));

    std::string out;
    auto const last = std::min(end, count);
    for (int n = start; n <= last; ++n)
    {
        if (n != start)
            out += '\n';
        out += fmt::format("{}: {}", n, lines[static_cast<std::size_t>(n - 1)]);
    }
    if (end > count)
        out += "\n" + std::string(kEndOfFileMarker);
    return out;
}

auto CodeNavigator::bindings() const -> std::vector<ToolBinding>
{
    auto location_params = [] {
        return std::vector<ToolParam> {
            { "commit_hash", ParamType::string, true, "full commit hash whose code to read", {} },
            { "path", ParamType::string, true, "repository-relative file path", {} },
            { "name", ParamType::string, true, "function, method, class or type name", {} },
        };
    };
    auto location = [](const json& args) {
        return CodeLocation { arg_string(args, "commit_hash"), arg_string(args, "path"), arg_string(args, "name") };
    };

    std::vector<ToolBinding> tools;
    tools.push_back({ { "fetch_definition",
                        "Returns the source code of a specific function/class as of the given commit, with its line span.",
                        ToolCategory::codebase,
                        location_params() },
                      [this, location](const json& args) { return fetch_definition(location(args)); } });
    tools.push_back({ { "fetch_document",
                        "Returns the docstring or doc comment of a specific function/class as of the given commit.",
                        ToolCategory::codebase,
                        location_params() },
                      [this, location](const json& args) { return fetch_document(location(args)); } });
    tools.push_back({ { "fetch_lines_in_file",
                        "Returns lines start..end (1-based, inclusive) of a file as of the given commit, each prefixed "
                        "with its line number.",
                        ToolCategory::codebase,
                        { { "commit_hash", ParamType::string, true, "full commit hash", {} },
                          { "file", ParamType::string, true, "repository-relative file path", {} },
                          { "start", ParamType::integer, true, "first line, 1-based", {} },
                          { "end", ParamType::integer, true, "last line, inclusive", {} } } },
                      [this](const json& args) {
                          return fetch_lines_in_file(arg_string(args, "commit_hash"),
                                                     arg_string(args, "file"),
                                                     arg_int(args, "start", 1),
                                                     arg_int(args, "end", 1));
                      } });
    return tools;
}

} // namespace issuelink
