// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/domain.hpp>
#include <issuelink/http.hpp>
#include <issuelink/schema_registry.hpp>

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace issuelink
{

enum class Platform
{
    github,
    jira,
};

[[nodiscard]] auto to_string(Platform platform) -> std::string_view;

struct CommentMeta
{
    Author author;
    std::string body;
    UnixTime created_at = 0;
};

struct IssueSnapshot
{
    Platform platform = Platform::github;
    std::string key; // "42" or "CALCITE-1234"
    std::string title;
    std::string description;
    UnixTime created_at = 0;
    std::optional<UnixTime> closed_at;
    Author author;
    std::vector<CommentMeta> comments; // chronological
};

/// Where an issue lives and which REST endpoints describe it.
struct IssueLocator
{
    Platform platform = Platform::github;
    std::string api_base; // https://api.github.com or https://issues.apache.org/jira
    std::string owner;    // github only
    std::string repo;     // github only
    std::string key;      // issue number or Jira key

    /// Throws SetupError for URLs that are neither a GitHub issue
    /// (`…/owner/repo/issues/N`) nor a Jira browse link (`…/browse/KEY-N`).
    static auto parse(std::string_view url) -> IssueLocator;

    [[nodiscard]] auto issue_endpoint() const -> std::string;
    /// GitHub: comments page (1-based). Jira: comment listing from `start_at`.
    [[nodiscard]] auto comments_endpoint(int page_or_start, int per_page) const -> std::string;
};

/// Credentials read from the environment, never from flags.
struct TrackerCredentials
{
    std::optional<std::string> github_token; // GITHUB_TOKEN
    std::optional<std::string> jira_token;   // JIRA_TOKEN (bearer)
    std::optional<std::string> jira_user;    // JIRA_USER + JIRA_PASSWORD (basic)
    std::optional<std::string> jira_password;

    static auto from_environment() -> TrackerCredentials;
};

class IssueNotFound: public SetupError
{
  public:
    using SetupError::SetupError;
};

/// Fetches the issue and every comment page once. Throws SetupError (or
/// IssueNotFound for 404) on failure; rate-limited responses are retried with
/// exponential backoff up to `retry.max_attempts`.
auto fetch_issue(std::string_view url,
                 HttpTransport& transport,
                 const TrackerCredentials& credentials = {},
                 const RetryPolicy& retry = {}) -> IssueSnapshot;

// Response decoding, exposed for tests.
auto parse_github_issue(const std::string& issue_json) -> IssueSnapshot;
auto parse_github_comments(const std::string& comments_json) -> std::vector<CommentMeta>;
auto parse_jira_issue(const std::string& issue_json) -> IssueSnapshot;

/// Read-only view over one snapshot. No operation touches the network.
class IssueExtractor
{
  public:
    explicit IssueExtractor(IssueSnapshot snapshot);

    [[nodiscard]] auto snapshot() const -> const IssueSnapshot& { return _snapshot; }

    [[nodiscard]] auto issue_title() const -> const std::string& { return _snapshot.title; }
    [[nodiscard]] auto issue_description() const -> const std::string& { return _snapshot.description; }
    [[nodiscard]] auto issue_created_at() const -> std::string;
    /// The timestamp, or "unresolved" for open issues.
    [[nodiscard]] auto issue_closed_at() const -> std::string;
    [[nodiscard]] auto issue_author() const -> const Author& { return _snapshot.author; }
    [[nodiscard]] auto issue_comments(Pagination p) const -> std::vector<CommentMeta>;
    /// Issue author plus every commenter, deduplicated, sorted by username.
    [[nodiscard]] auto issue_participants() const -> std::vector<Author>;

    /// Page size applied when a call omits page_size. Throws SetupError
    /// outside [1, Pagination::kMaxPageSize].
    void set_default_page_size(int page_size);

    [[nodiscard]] auto bindings() const -> std::vector<ToolBinding>;

  private:
    IssueSnapshot _snapshot;
    int _pageSize = Pagination::kDefaultPageSize;
};

inline constexpr std::string_view kUnresolved = "unresolved";

[[nodiscard]] auto format_comment(const CommentMeta& c) -> std::string;

} // namespace issuelink
