// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/domain.hpp>
#include <issuelink/git_repo.hpp>
#include <issuelink/schema_registry.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace issuelink
{

/// All branches and tags presented as one deduplicated commit sequence,
/// ordered by (commit_time, hash).
class UnifiedHistory
{
  public:
    UnifiedHistory() = default;
    explicit UnifiedHistory(std::vector<HistoryEntry> entries);

    static auto load(const GitRepository& repo) -> UnifiedHistory;

    [[nodiscard]] auto commits() const -> const std::vector<CommitMeta>& { return _commits; }
    [[nodiscard]] auto size() const noexcept -> std::size_t { return _commits.size(); }

    [[nodiscard]] auto find(const CommitHash& hash) const -> const CommitMeta*;
    [[nodiscard]] auto contains(const CommitHash& hash) const -> bool { return find(hash) != nullptr; }

    /// Positions (into commits()) of commits by the given git identity key.
    [[nodiscard]] auto positions_by_author() const -> const std::map<std::string, std::vector<std::size_t>>&
    {
        return _byAuthor;
    }

    /// Positions of commits whose first-parent diff touches `path`.
    [[nodiscard]] auto positions_for_file(const std::string& path) const -> const std::vector<std::size_t>*;

    [[nodiscard]] auto file_index() const -> const std::map<std::string, std::vector<std::size_t>>&
    {
        return _byFile;
    }

    [[nodiscard]] auto touched_paths(std::size_t position) const -> const std::vector<std::string>&
    {
        return _touched[position];
    }

  private:
    std::vector<CommitMeta> _commits;
    std::vector<std::vector<std::string>> _touched;
    std::map<std::string, std::size_t> _byHash;
    std::map<std::string, std::vector<std::size_t>> _byAuthor;
    std::map<std::string, std::vector<std::size_t>> _byFile;
};

/// The default query window: one week before the issue was opened through
/// one week after it was closed. Open issues end at `now`.
struct LifespanFilter
{
    static constexpr std::int64_t kMarginSeconds = 7 * kSecondsPerDay;

    TimeWindow window;

    static auto for_issue(UnixTime created_at, std::optional<UnixTime> closed_at, UnixTime now) -> LifespanFilter;
};

/// Author argument as the model supplies it.
struct AuthorQuery
{
    std::string name;
    std::optional<std::string> email;
};

class GitExtractor
{
  public:
    GitExtractor(std::shared_ptr<const GitRepository> repo,
                 std::shared_ptr<const UnifiedHistory> history,
                 LifespanFilter lifespan);

    [[nodiscard]] auto history() const -> const UnifiedHistory& { return *_history; }
    [[nodiscard]] auto lifespan() const -> const TimeWindow& { return _lifespan.window; }

    /// The only batch query that may leave the lifespan, via `window`.
    [[nodiscard]] auto list_commits(Pagination p, std::optional<TimeWindow> window = std::nullopt) const
        -> std::vector<CommitMeta>;
    [[nodiscard]] auto list_authors() const -> std::vector<Author>;
    [[nodiscard]] auto commits_of_author(const AuthorQuery& author, Pagination p) const -> std::vector<CommitMeta>;
    [[nodiscard]] auto list_files(const std::string& pattern) const -> std::vector<std::string>;
    [[nodiscard]] auto commits_on_file(const std::string& path, Pagination p) const -> std::vector<CommitMeta>;
    [[nodiscard]] auto commit_diff(std::string_view hash) const -> CommitDiff;
    [[nodiscard]] auto commit_metadata(std::string_view hash) const -> CommitMeta;

    // Unpaginated forms, used by the paginated ones and by tests.
    [[nodiscard]] auto all_commits_in(const TimeWindow& window) const -> std::vector<CommitMeta>;
    [[nodiscard]] auto all_commits_of_author(const AuthorQuery& author) const -> std::vector<CommitMeta>;
    [[nodiscard]] auto all_commits_on_file(const std::string& path) const -> std::vector<CommitMeta>;

    /// The seven git tools, bound to this extractor.
    /// Page size applied when a call omits page_size. Throws SetupError
    /// outside [1, Pagination::kMaxPageSize].
    void set_default_page_size(int page_size);

    [[nodiscard]] auto bindings() const -> std::vector<ToolBinding>;

  private:
    std::shared_ptr<const GitRepository> _repo;
    std::shared_ptr<const UnifiedHistory> _history;
    LifespanFilter _lifespan;
    int _pageSize = Pagination::kDefaultPageSize;
};

// Line-oriented text forms shown to the model.
[[nodiscard]] auto format_commit_line(const CommitMeta& c) -> std::string;
[[nodiscard]] auto format_commit_full(const CommitMeta& c) -> std::string;
[[nodiscard]] auto format_author_line(const Author& a) -> std::string;
[[nodiscard]] auto format_commit_diff(const CommitDiff& d) -> std::string;

/// Escapes backslashes and line breaks so a value fits on one line.
[[nodiscard]] auto escape_line(std::string_view text) -> std::string;

/// Renders a paginated listing: header line plus one record per line.
template <typename T, typename F>
[[nodiscard]] auto format_page(std::string_view what, Pagination p, const std::vector<T>& items, F&& line) -> std::string
{
    std::string out = std::string(what) + " page " + std::to_string(p.page) + " (page_size " + std::to_string(p.page_size)
                      + "): " + std::to_string(items.size()) + " result(s)";
    if (items.empty())
        out += "\n(no results)";
    for (auto const& item: items)
        out += "\n" + line(item);
    if (static_cast<int>(items.size()) == p.page_size)
        out += "\n(more results may exist on page " + std::to_string(p.page + 1) + ")";
    return out;
}

} // namespace issuelink
