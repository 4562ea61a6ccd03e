// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace issuelink
{

/// Seconds since the Unix epoch, UTC.
using UnixTime = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86'400;

/// Raised for problems that must stop a session before any model traffic
/// (unreadable repository, unfetchable issue, bad configuration).
class SetupError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Raised by tool implementations. The registry turns it into an in-band
/// error payload, so the model sees the message and the session continues.
class ToolError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Full 40-character lowercase hex object id.
class CommitHash
{
  public:
    CommitHash() = default;

    /// Accepts exactly 40 hex digits, either case; stores lowercase.
    static auto parse(std::string_view text) -> std::optional<CommitHash>;

    /// Like parse(), but throws ToolError describing the expected shape.
    static auto require(std::string_view text) -> CommitHash;

    [[nodiscard]] auto str() const noexcept -> const std::string& { return _hex; }
    [[nodiscard]] auto empty() const noexcept -> bool { return _hex.empty(); }

    friend auto operator<=>(const CommitHash&, const CommitHash&) = default;

  private:
    explicit CommitHash(std::string hex): _hex(std::move(hex)) {}
    std::string _hex;
};

struct Author
{
    std::string name;
    std::string email;
    std::optional<std::string> tracker_username;

    /// (name, email) for git identities, the username for tracker identities.
    [[nodiscard]] auto identity_key() const -> std::string;

    friend auto operator==(const Author&, const Author&) -> bool = default;
};

struct CommitMeta
{
    CommitHash hash;
    Author author;
    Author committer;
    std::string message;
    UnixTime author_time = 0;
    UnixTime commit_time = 0;

    friend auto operator==(const CommitMeta&, const CommitMeta&) -> bool = default;
};

/// Total order used for every commit listing: commit time, then hash.
[[nodiscard]] auto commit_order_less(const CommitMeta& a, const CommitMeta& b) -> bool;

enum class ChangeKind
{
    added,
    modified,
    deleted,
    renamed,
};

[[nodiscard]] auto to_string(ChangeKind kind) -> std::string_view;

struct FileDiff
{
    std::string path;
    std::optional<std::string> old_path; // set for renames
    ChangeKind change_kind = ChangeKind::modified;
    std::vector<std::string> hunks;
};

struct CommitDiff
{
    CommitHash commit_hash;
    std::vector<FileDiff> files;

    /// True when `path` is the new or the old name of any entry.
    [[nodiscard]] auto touches(std::string_view path) const -> bool;
};

struct Pagination
{
    static constexpr int kDefaultPageSize = 20;
    static constexpr int kMaxPageSize = 100;

    int page = 0;
    int page_size = kDefaultPageSize;

    /// Throws ToolError when page < 0 or page_size is outside [1, 100].
    static auto make(int page, int page_size) -> Pagination;
};

/// Slice one page out of an already ordered sequence.
template <typename T>
[[nodiscard]] auto paginate(const std::vector<T>& items, Pagination p) -> std::vector<T>
{
    auto const begin = static_cast<std::size_t>(p.page) * static_cast<std::size_t>(p.page_size);
    if (begin >= items.size())
        return {};
    auto const end = std::min(items.size(), begin + static_cast<std::size_t>(p.page_size));
    return std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(begin),
                          items.begin() + static_cast<std::ptrdiff_t>(end));
}

/// Closed interval [start, end].
struct TimeWindow
{
    UnixTime start = 0;
    UnixTime end = 0;

    static auto make(UnixTime start, UnixTime end) -> TimeWindow;

    [[nodiscard]] auto contains(UnixTime t) const noexcept -> bool { return start <= t && t <= end; }

    friend auto operator==(const TimeWindow&, const TimeWindow&) -> bool = default;
};

struct Budgets
{
    int max_iterations = 20;
    std::int64_t max_total_tokens = 200'000;
    std::size_t feedback_threshold_bytes = 40'000;

    /// Throws SetupError unless every limit is positive.
    void validate() const;
};

struct SessionOutcome
{
    enum class Kind
    {
        finished,
        gave_up,
        budget_exhausted,
    };

    Kind kind = Kind::gave_up;
    std::optional<CommitHash> commit_hash;
    std::string reason;

    static auto finished(CommitHash hash) -> SessionOutcome;
    static auto gave_up(std::string reason = {}) -> SessionOutcome;
    static auto budget_exhausted(std::string reason) -> SessionOutcome;
};

[[nodiscard]] auto to_string(SessionOutcome::Kind kind) -> std::string_view;
[[nodiscard]] auto parse_outcome_kind(std::string_view text) -> std::optional<SessionOutcome::Kind>;

// Time helpers --------------------------------------------------------------

/// "2024-03-11T10:00:00Z"
[[nodiscard]] auto format_utc(UnixTime t) -> std::string;

/// Accepts RFC 3339 / ISO 8601 forms used by GitHub and Jira:
/// "2024-03-11T10:00:00Z", "2024-03-11T10:00:00.123+0100", "…+01:00".
[[nodiscard]] auto parse_timestamp(std::string_view text) -> std::optional<UnixTime>;

[[nodiscard]] auto days_from_civil(std::int64_t year, unsigned month, unsigned day) -> std::int64_t;

} // namespace issuelink
