// SPDX-License-Identifier: Apache-2.0
#include <issuelink/git_repo.hpp>

#include <fmt/format.h>

#include <charconv>
#include <cstdint>
#include <stdexcept>

namespace issuelink
{

namespace
{
    auto fnv1a64(std::string_view text) -> std::uint64_t
    {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c: text)
        {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

    auto to_int64(std::string_view s) -> std::int64_t
    {
        std::int64_t v = 0;
        std::from_chars(s.data(), s.data() + s.size(), v);
        return v;
    }

    auto split(std::string_view text, char sep) -> std::vector<std::string_view>
    {
        std::vector<std::string_view> parts;
        std::size_t start = 0;
        while (true)
        {
            auto const pos = text.find(sep, start);
            if (pos == std::string_view::npos)
            {
                parts.push_back(text.substr(start));
                return parts;
            }
            parts.push_back(text.substr(start, pos - start));
            start = pos + 1;
        }
    }

    auto trim_trailing_newlines(std::string s) -> std::string
    {
        while (!s.empty() && (s.back() == '\n' || s.back() == '\r'))
            s.pop_back();
        return s;
    }

    // Record separator, field separator and end-of-header marker used in the
    // pretty format. Commit messages do not realistically contain them.
    constexpr char kRecord = '\x1e';
    constexpr char kField = '\x1f';
    constexpr char kHeaderEnd = '\x1d';
    constexpr auto kLogFormat = "--format=%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%cn%x1f%ce%x1f%at%x1f%ct%x1f%B%x1d";

    /// Parses `-z --name-status` output into (status, path, old_path) triples.
    struct NameStatus
    {
        char status;
        std::string path;
        std::optional<std::string> old_path;
    };

    auto parse_name_status_z(std::string_view text) -> std::vector<NameStatus>
    {
        std::vector<NameStatus> out;
        auto tokens = split(text, '\0');
        for (std::size_t i = 0; i < tokens.size(); ++i)
        {
            auto tok = tokens[i];
            while (!tok.empty() && (tok.front() == '\n' || tok.front() == '\r'))
                tok.remove_prefix(1);
            if (tok.empty())
                continue;
            auto const status = tok.front();
            if (status == 'R' || status == 'C')
            {
                if (i + 2 >= tokens.size())
                    break;
                out.push_back({ status, std::string(tokens[i + 2]), std::string(tokens[i + 1]) });
                i += 2;
            }
            else
            {
                if (i + 1 >= tokens.size())
                    break;
                out.push_back({ status, std::string(tokens[i + 1]), std::nullopt });
                i += 1;
            }
        }
        return out;
    }

    auto change_kind_for(char status) -> ChangeKind
    {
        switch (status)
        {
            case 'A':
            case 'C': return ChangeKind::added;
            case 'D': return ChangeKind::deleted;
            case 'R': return ChangeKind::renamed;
            default: return ChangeKind::modified;
        }
    }

    /// Splits one file's patch section into its header-free hunks.
    auto split_hunks(std::string_view section) -> std::vector<std::string>
    {
        std::vector<std::string> hunks;
        std::size_t pos = 0;
        std::string current;
        bool inHunk = false;
        while (pos < section.size())
        {
            auto const eol = section.find('\n', pos);
            auto const line = section.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos + 1);
            pos = eol == std::string_view::npos ? section.size() : eol + 1;
            if (line.starts_with("@@"))
            {
                if (inHunk)
                    hunks.push_back(trim_trailing_newlines(std::move(current)));
                current.clear();
                inHunk = true;
            }
            else if (!inHunk && line.starts_with("Binary files"))
            {
                hunks.push_back(trim_trailing_newlines(std::string(line)));
                continue;
            }
            if (inHunk)
                current.append(line);
        }
        if (inHunk)
            hunks.push_back(trim_trailing_newlines(std::move(current)));
        return hunks;
    }

    /// Splits a full patch into sections starting with "diff --git ".
    auto split_patch(std::string_view patch) -> std::vector<std::string_view>
    {
        std::vector<std::string_view> sections;
        std::size_t start = std::string_view::npos;
        std::size_t pos = 0;
        while (pos <= patch.size())
        {
            if (patch.compare(pos, 11, "diff --git ") == 0)
            {
                if (start != std::string_view::npos)
                    sections.push_back(patch.substr(start, pos - start));
                start = pos;
            }
            auto const eol = patch.find('\n', pos);
            if (eol == std::string_view::npos)
                break;
            pos = eol + 1;
        }
        if (start != std::string_view::npos)
            sections.push_back(patch.substr(start));
        return sections;
    }
} // namespace

auto hermetic_git_env() -> EnvOverrides
{
    return {
        { "GIT_CONFIG_NOSYSTEM", "1" },
        { "GIT_CONFIG_GLOBAL", "/dev/null" },
        { "GIT_TERMINAL_PROMPT", "0" },
        { "LC_ALL", "C" },
    };
}

auto GitRepository::looks_like_url(std::string_view source) -> bool
{
    return source.find("://") != std::string_view::npos || source.starts_with("git@");
}

auto GitRepository::open(const std::filesystem::path& path) -> GitRepository
{
    std::error_code ec;
    if (!std::filesystem::is_directory(path, ec))
        throw SetupError(fmt::format("repository path '{}' is not a directory", path.string()));
    GitRepository repo(std::filesystem::absolute(path));
    auto const r = repo.try_git({ "rev-parse", "--git-dir" });
    if (!r.ok())
        throw SetupError(fmt::format("'{}' is not a git repository: {}", path.string(), r.err));
    return repo;
}

auto GitRepository::open_or_clone(std::string_view source, const std::filesystem::path& cache_dir)
    -> GitRepository
{
    if (!looks_like_url(source))
        return open(std::filesystem::path(source));

    auto const target = cache_dir / fmt::format("{:016x}.git", fnv1a64(source));
    std::error_code ec;
    if (!std::filesystem::exists(target, ec))
    {
        std::filesystem::create_directories(cache_dir, ec);
        auto const r = run_process(
            { "git", "clone", "--mirror", "--quiet", std::string(source), target.string() }, {}, hermetic_git_env());
        if (!r.ok())
        {
            std::filesystem::remove_all(target, ec);
            throw SetupError(fmt::format("cloning '{}' failed: {}", source, r.err));
        }
    }
    return open(target);
}

auto GitRepository::try_git(std::vector<std::string> args) const -> ProcessResult
{
    std::vector<std::string> argv {
        "git", "-C", _path.string(), "-c", "core.quotePath=false", "-c", "safe.directory=*", "--no-pager",
    };
    argv.insert(argv.end(), std::make_move_iterator(args.begin()), std::make_move_iterator(args.end()));
    return run_process(argv, {}, hermetic_git_env());
}

auto GitRepository::git(std::vector<std::string> args) const -> std::string
{
    auto const what = args.empty() ? std::string() : args.front();
    auto r = try_git(std::move(args));
    if (!r.ok())
        throw std::runtime_error(fmt::format("git {} failed ({}): {}", what, r.exit_code, r.err));
    return std::move(r.out);
}

auto GitRepository::read_history() const -> std::vector<HistoryEntry>
{
    // An empty repository has no refs; `git log` would fail on it.
    auto const refs = git({ "for-each-ref", "--count=1", "--format=%(objectname)", "refs/heads", "refs/remotes", "refs/tags" });
    if (refs.empty())
        return {};

    auto const out = git({ "log",
                           "--branches",
                           "--remotes",
                           "--tags",
                           "--diff-merges=first-parent",
                           "--root",
                           "-M",
                           "--name-status",
                           "-z",
                           "--no-color",
                           kLogFormat });

    std::vector<HistoryEntry> entries;
    for (auto record: split(out, kRecord))
    {
        if (record.empty())
            continue;
        auto const headerEnd = record.find(kHeaderEnd);
        if (headerEnd == std::string_view::npos)
            throw std::runtime_error("unexpected git log output");
        auto const fields = split(record.substr(0, headerEnd), kField);
        if (fields.size() != 9)
            throw std::runtime_error("unexpected git log header");

        HistoryEntry e;
        e.meta.hash = CommitHash::require(fields[0]);
        for (auto p: split(fields[1], ' '))
            if (!p.empty())
                e.parents.push_back(CommitHash::require(p));
        e.meta.author = Author { std::string(fields[2]), std::string(fields[3]), std::nullopt };
        e.meta.committer = Author { std::string(fields[4]), std::string(fields[5]), std::nullopt };
        e.meta.author_time = to_int64(fields[6]);
        e.meta.commit_time = to_int64(fields[7]);
        e.meta.message = trim_trailing_newlines(std::string(fields[8]));

        for (auto& ns: parse_name_status_z(record.substr(headerEnd + 1)))
        {
            if (ns.old_path)
                e.touched_paths.push_back(std::move(*ns.old_path));
            e.touched_paths.push_back(std::move(ns.path));
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

auto GitRepository::has_commit(const CommitHash& hash) const -> bool
{
    return try_git({ "cat-file", "-e", hash.str() + "^{commit}" }).ok();
}

auto GitRepository::diff(const CommitHash& hash) const -> CommitDiff
{
    if (!has_commit(hash))
        throw ToolError(fmt::format("commit not found: {}", hash.str()));

    auto const parentLine = trim_trailing_newlines(git({ "log", "-1", "--format=%P", hash.str() }));
    auto const parents = split(parentLine, ' ');
    std::vector<std::string> range;
    if (parents.empty() || parents.front().empty())
        range = { "--root", hash.str() };
    else
        range = { std::string(parents.front()), hash.str() };

    auto cmd = [&](std::vector<std::string> extra) {
        std::vector<std::string> args { "diff-tree", "-r", "-M", "--no-commit-id", "--no-color", "--no-ext-diff", "--no-textconv" };
        args.insert(args.end(), extra.begin(), extra.end());
        args.insert(args.end(), range.begin(), range.end());
        return git(std::move(args));
    };

    auto const names = parse_name_status_z(cmd({ "-z", "--name-status" }));
    auto const patch = cmd({ "-p" });
    auto const sections = split_patch(patch);

    CommitDiff result;
    result.commit_hash = hash;
    for (std::size_t i = 0; i < names.size(); ++i)
    {
        FileDiff f;
        f.path = names[i].path;
        f.old_path = names[i].old_path;
        f.change_kind = change_kind_for(names[i].status);
        if (i < sections.size())
            f.hunks = split_hunks(sections[i]);
        result.files.push_back(std::move(f));
    }
    return result;
}

auto GitRepository::read_blob(const CommitHash& commit, std::string_view path) const -> std::optional<std::string>
{
    auto spec = commit.str() + ":" + std::string(path);
    auto const type = try_git({ "cat-file", "-t", spec });
    if (!type.ok() || trim_trailing_newlines(type.out) != "blob")
        return std::nullopt;
    auto r = try_git({ "cat-file", "blob", spec });
    if (!r.ok())
        return std::nullopt;
    return std::move(r.out);
}

} // namespace issuelink
