// SPDX-License-Identifier: Apache-2.0
#include <issuelink/git_extractor.hpp>
#include <issuelink/glob.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

namespace issuelink
{

using nlohmann::json;

UnifiedHistory::UnifiedHistory(std::vector<HistoryEntry> entries)
{
    std::sort(entries.begin(), entries.end(), [](auto const& a, auto const& b) {
        return commit_order_less(a.meta, b.meta);
    });
    entries.erase(std::unique(entries.begin(),
                              entries.end(),
                              [](auto const& a, auto const& b) { return a.meta.hash == b.meta.hash; }),
                  entries.end());

    _commits.reserve(entries.size());
    _touched.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
        auto& e = entries[i];
        _byHash.emplace(e.meta.hash.str(), i);
        _byAuthor[e.meta.author.identity_key()].push_back(i);

        std::sort(e.touched_paths.begin(), e.touched_paths.end());
        e.touched_paths.erase(std::unique(e.touched_paths.begin(), e.touched_paths.end()), e.touched_paths.end());
        for (auto const& path: e.touched_paths)
            _byFile[path].push_back(i);

        _commits.push_back(std::move(e.meta));
        _touched.push_back(std::move(e.touched_paths));
    }
}

auto UnifiedHistory::load(const GitRepository& repo) -> UnifiedHistory
{
    return UnifiedHistory(repo.read_history());
}

auto UnifiedHistory::find(const CommitHash& hash) const -> const CommitMeta*
{
    auto it = _byHash.find(hash.str());
    return it == _byHash.end() ? nullptr : &_commits[it->second];
}

auto UnifiedHistory::positions_for_file(const std::string& path) const -> const std::vector<std::size_t>*
{
    auto it = _byFile.find(path);
    return it == _byFile.end() ? nullptr : &it->second;
}

auto LifespanFilter::for_issue(UnixTime created_at, std::optional<UnixTime> closed_at, UnixTime now) -> LifespanFilter
{
    auto const start = created_at - kMarginSeconds;
    auto const end = closed_at ? *closed_at + kMarginSeconds : now;
    return LifespanFilter { TimeWindow { start, std::max(start, end) } };
}

GitExtractor::GitExtractor(std::shared_ptr<const GitRepository> repo,
                           std::shared_ptr<const UnifiedHistory> history,
                           LifespanFilter lifespan):
    _repo(std::move(repo)), _history(std::move(history)), _lifespan(lifespan)
{
}

auto GitExtractor::all_commits_in(const TimeWindow& window) const -> std::vector<CommitMeta>
{
    std::vector<CommitMeta> out;
    for (auto const& c: _history->commits())
        if (window.contains(c.commit_time))
            out.push_back(c);
    return out;
}

auto GitExtractor::list_commits(Pagination p, std::optional<TimeWindow> window) const -> std::vector<CommitMeta>
{
    return paginate(all_commits_in(window.value_or(_lifespan.window)), p);
}

auto GitExtractor::list_authors() const -> std::vector<Author>
{
    std::map<std::string, Author> distinct;
    for (auto const& c: _history->commits())
        if (_lifespan.window.contains(c.commit_time))
            distinct.emplace(c.author.identity_key(), c.author);

    std::vector<Author> out;
    for (auto& [key, a]: distinct)
        out.push_back(std::move(a));
    std::stable_sort(out.begin(), out.end(), [](auto const& a, auto const& b) {
        return std::tie(a.name, a.email) < std::tie(b.name, b.email);
    });
    return out;
}

namespace
{
    auto iequals(std::string_view a, std::string_view b) -> bool
    {
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
                   return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
               });
    }
} // namespace

auto GitExtractor::all_commits_of_author(const AuthorQuery& author) const -> std::vector<CommitMeta>
{
    std::vector<CommitMeta> out;
    for (auto const& c: _history->commits())
    {
        if (!_lifespan.window.contains(c.commit_time))
            continue;
        bool const match = author.email && !author.email->empty()
                               ? c.author.name == author.name && iequals(c.author.email, *author.email)
                               : iequals(c.author.name, author.name);
        if (match)
            out.push_back(c);
    }
    return out;
}

auto GitExtractor::commits_of_author(const AuthorQuery& author, Pagination p) const -> std::vector<CommitMeta>
{
    return paginate(all_commits_of_author(author), p);
}

auto GitExtractor::list_files(const std::string& pattern) const -> std::vector<std::string>
{
    Glob const glob(pattern);
    std::set<std::string> paths;
    auto const& commits = _history->commits();
    for (std::size_t i = 0; i < commits.size(); ++i)
    {
        if (!_lifespan.window.contains(commits[i].commit_time))
            continue;
        for (auto const& path: _history->touched_paths(i))
            if (glob.matches(path))
                paths.insert(path);
    }
    return { paths.begin(), paths.end() };
}

auto GitExtractor::all_commits_on_file(const std::string& path) const -> std::vector<CommitMeta>
{
    std::vector<CommitMeta> out;
    if (auto const* positions = _history->positions_for_file(path))
        for (auto pos: *positions)
            if (_lifespan.window.contains(_history->commits()[pos].commit_time))
                out.push_back(_history->commits()[pos]);
    return out;
}

auto GitExtractor::commits_on_file(const std::string& path, Pagination p) const -> std::vector<CommitMeta>
{
    return paginate(all_commits_on_file(path), p);
}

auto GitExtractor::commit_diff(std::string_view hash) const -> CommitDiff
{
    auto const h = CommitHash::require(hash);
    if (!_history->contains(h))
        throw ToolError(fmt::format("commit not found: {}", h.str()));
    return _repo->diff(h);
}

auto GitExtractor::commit_metadata(std::string_view hash) const -> CommitMeta
{
    auto const h = CommitHash::require(hash);
    if (auto const* c = _history->find(h))
        return *c;
    throw ToolError(fmt::format("commit not found: {}", h.str()));
}

// Formatting ------------------------------------------------------------------

auto escape_line(std::string_view text) -> std::string
{
    std::string out;
    out.reserve(text.size());
    for (char c: text)
    {
        switch (c)
        {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

auto format_author_line(const Author& a) -> std::string
{
    if (a.tracker_username)
    {
        if (a.name.empty() || a.name == *a.tracker_username)
            return fmt::format("username: {}", *a.tracker_username);
        return fmt::format("username: {} | name: {}", *a.tracker_username, a.name);
    }
    return fmt::format("name: {} | email: {}", a.name, a.email);
}

auto format_commit_line(const CommitMeta& c) -> std::string
{
    constexpr std::size_t kMaxMessage = 500;
    auto message = escape_line(c.message);
    if (message.size() > kMaxMessage)
        message = message.substr(0, kMaxMessage) + "...";
    return fmt::format("hash: {} | committed: {} | author: {} <{}> | message: {}",
                       c.hash.str(),
                       format_utc(c.commit_time),
                       c.author.name,
                       c.author.email,
                       message);
}

auto format_commit_full(const CommitMeta& c) -> std::string
{
    return fmt::format("hash: {}\nauthor: {} <{}>\nauthored: {}\ncommitter: {} <{}>\ncommitted: {}\nmessage:\n{}",
                       c.hash.str(),
                       c.author.name,
                       c.author.email,
                       format_utc(c.author_time),
                       c.committer.name,
                       c.committer.email,
                       format_utc(c.commit_time),
                       c.message);
}

auto format_commit_diff(const CommitDiff& d) -> std::string
{
    auto out = fmt::format("commit {}: {} file(s) changed (diff against first parent)", d.commit_hash.str(), d.files.size());
    for (auto const& f: d.files)
    {
        if (f.old_path)
            out += fmt::format("\nfile: {} ({} from {})", f.path, to_string(f.change_kind), *f.old_path);
        else
            out += fmt::format("\nfile: {} ({})", f.path, to_string(f.change_kind));
        for (auto const& h: f.hunks)
            out += "\n" + h;
    }
    return out;
}

// Tool bindings -----------------------------------------------------------------

namespace
{
    auto window_from_args(const json& args, const TimeWindow& fallback) -> std::optional<TimeWindow>
    {
        if (!arg_has(args, "since") && !arg_has(args, "until"))
            return std::nullopt;
        auto bound = [&](std::string_view key, UnixTime dflt) -> UnixTime {
            if (!arg_has(args, key))
                return dflt;
            auto const text = arg_string(args, key);
            if (auto t = parse_timestamp(text))
                return *t;
            throw ToolError(fmt::format("invalid timestamp for {}: '{}' (expected e.g. 2024-03-11T10:00:00Z)", key, text));
        };
        return TimeWindow::make(bound("since", fallback.start), bound("until", fallback.end));
    }

    auto commit_hash_param() -> ToolParam
    {
        return { "commit_hash", ParamType::string, true, "full 40-character commit hash", {} };
    }
} // namespace

void GitExtractor::set_default_page_size(int page_size)
{
    if (page_size < 1 || page_size > Pagination::kMaxPageSize)
        throw SetupError(fmt::format("page size {} is outside 1..{}", page_size, Pagination::kMaxPageSize));
    _pageSize = page_size;
}

auto GitExtractor::bindings() const -> std::vector<ToolBinding>
{
    auto with_pages = [pageSize = _pageSize](std::vector<ToolParam> params) {
        auto p = pagination_params(pageSize);
        params.insert(params.end(), p.begin(), p.end());
        return params;
    };

    std::vector<ToolBinding> tools;

    tools.push_back(
        { { "list_commits",
            "Returns paginated commits of the unified history (all branches merged, ordered by commit time). "
            "Defaults to the issue's safe lifespan; pass since/until to look at commits outside it.",
            ToolCategory::git,
            with_pages({ { "since", ParamType::string, false, "ISO-8601 start of the window (default: lifespan start)", {} },
                         { "until", ParamType::string, false, "ISO-8601 end of the window (default: lifespan end)", {} } }) },
          [this](const json& args) {
              auto const p = arg_pagination(args, _pageSize);
              auto const window = window_from_args(args, _lifespan.window);
              return format_page("commits", p, list_commits(p, window), format_commit_line);
          } });

    tools.push_back({ { "list_authors",
                        "Returns the list of commit authors within the issue's safe lifespan.",
                        ToolCategory::git,
                        {} },
                      [this](const json&) {
                          auto const authors = list_authors();
                          std::string out = fmt::format("{} author(s)", authors.size());
                          for (auto const& a: authors)
                              out += "\n" + format_author_line(a);
                          return out;
                      } });

    tools.push_back(
        { { "commits_of_author",
            "Returns commits authored by the specified author within the safe lifespan. With only a name, "
            "names are matched case-insensitively.",
            ToolCategory::git,
            with_pages({ { "author_name", ParamType::string, true, "author name as shown by list_authors", {} },
                         { "author_email", ParamType::string, false, "author email for an exact identity match", {} } }) },
          [this](const json& args) {
              auto const p = arg_pagination(args, _pageSize);
              AuthorQuery q { arg_string(args, "author_name"), std::nullopt };
              if (arg_has(args, "author_email"))
                  q.email = arg_string(args, "author_email");
              return format_page("commits by " + q.name, p, commits_of_author(q, p), format_commit_line);
          } });

    tools.push_back(
        { { "list_files",
            "Returns files in the commit history (within the safe lifespan) that match a glob pattern. "
            "'*' stays within a directory, '**' crosses directories, '?' matches one character.",
            ToolCategory::git,
            { { "pattern", ParamType::string, true, "glob such as src/**/*.py", {} } } },
          [this](const json& args) {
              auto const files = list_files(arg_string(args, "pattern"));
              std::string out = fmt::format("{} file(s)", files.size());
              for (auto const& f: files)
                  out += "\n" + f;
              return out;
          } });

    tools.push_back(
        { { "commits_on_file",
            "Returns the commits (within the safe lifespan) that staged the specified file. Call list_files "
            "first to verify the exact path.",
            ToolCategory::git,
            with_pages({ { "file_name", ParamType::string, true, "repository-relative path", {} } }) },
          [this](const json& args) {
              auto const p = arg_pagination(args, _pageSize);
              auto const path = arg_string(args, "file_name");
              return format_page("commits on " + path, p, commits_on_file(path, p), format_commit_line);
          } });

    tools.push_back({ { "commit_diff",
                        "Returns the diff of the specified commit against its first parent (merge commits are "
                        "diffed against their first parent only).",
                        ToolCategory::git,
                        { commit_hash_param() } },
                      [this](const json& args) { return format_commit_diff(commit_diff(arg_string(args, "commit_hash"))); } });

    tools.push_back({ { "commit_metadata",
                        "Returns metadata of the specified commit: author, committer, message, and timestamps.",
                        ToolCategory::git,
                        { commit_hash_param() } },
                      [this](const json& args) {
                          return format_commit_full(commit_metadata(arg_string(args, "commit_hash")));
                      } });

    return tools;
}

} // namespace issuelink
