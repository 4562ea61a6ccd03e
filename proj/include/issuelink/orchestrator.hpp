// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/code_navigator.hpp>
#include <issuelink/git_extractor.hpp>
#include <issuelink/git_repo.hpp>
#include <issuelink/issue_extractor.hpp>
#include <issuelink/llm_middleware.hpp>
#include <issuelink/schema_registry.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace issuelink
{

/// Time source for wall-time figures and for the end of an open issue's
/// lifespan.
class Clock
{
  public:
    virtual ~Clock() = default;
    /// Seconds since the Unix epoch.
    [[nodiscard]] virtual auto now() const -> double = 0;
};

class SystemClock final: public Clock
{
  public:
    [[nodiscard]] auto now() const -> double override;
};

/// Always reports the same instant, so wall times come out as zero.
class FixedClock final: public Clock
{
  public:
    explicit FixedClock(double t): _t(t) {}
    [[nodiscard]] auto now() const -> double override { return _t; }

  private:
    double _t;
};

struct CallLogEntry
{
    int iteration = 0;
    ToolCall call;
    std::size_t byte_size = 0;
    std::optional<FeedbackVerdict> verdict;
    bool is_error = false;
    /// Live history size just before the call was routed and just after its
    /// result was appended. A discard makes `after` smaller than `before`.
    std::int64_t context_tokens_before = 0;
    std::int64_t context_tokens_after = 0;
};

struct SessionState
{
    int iteration = 0;
    TokenLedger ledger;
    std::vector<ChatTurn> history;
    std::vector<CallLogEntry> call_log;
    std::optional<SessionOutcome> outcome;
};

struct SessionResult
{
    SessionOutcome outcome;
    SessionState state;
    double wall_time_s = 0;
};

/// Everything a session reads: built once, before any model traffic.
struct SessionInputs
{
    std::string issue_url;
    std::shared_ptr<const GitRepository> repo;
    std::shared_ptr<const UnifiedHistory> history;
    IssueSnapshot issue;
    std::shared_ptr<const LanguageRegistry> languages;
};

struct SessionConfig
{
    Budgets budgets;
    std::string model = MiddlewareConfig {}.model;
    RetryPolicy retry;
    int page_size = Pagination::kDefaultPageSize;
    std::shared_ptr<const Clock> clock = std::make_shared<SystemClock>();
};

/// Opens (or clones into `cache_dir`) the repository, loads its history and
/// fetches the issue. Throws SetupError on any failure.
auto prepare_session(std::string_view issue_url,
                     std::string_view repo_source,
                     HttpTransport& transport,
                     const std::filesystem::path& cache_dir,
                     const TrackerCredentials& credentials = {},
                     std::shared_ptr<const LanguageRegistry> languages = nullptr) -> SessionInputs;

/// One dialogue that tries to link one issue. Not reusable.
class Session
{
  public:
    Session(SessionInputs inputs, ChatBackend& backend, SessionConfig config);
    Session(const Session&) = delete;
    auto operator=(const Session&) -> Session& = delete;

    /// Runs to a terminal outcome. Throws SessionError when the backend fails
    /// for good.
    auto run() -> SessionResult;

    [[nodiscard]] auto registry() const -> const SchemaRegistry& { return _registry; }

  private:
    auto control_bindings() -> std::vector<ToolBinding>;
    auto finish(const nlohmann::json& args) -> std::string;
    auto feedback(const nlohmann::json& args) -> std::string;
    void mark_verdict(std::string_view call_id, FeedbackVerdict verdict);
    auto snapshot_state() const -> SessionState;

    SessionInputs _inputs;
    SessionConfig _config;
    std::unique_ptr<GitExtractor> _git;
    std::unique_ptr<IssueExtractor> _issue;
    std::unique_ptr<CodeNavigator> _code;
    SchemaRegistry _registry;
    std::unique_ptr<LlmMiddleware> _middleware;

    int _iteration = 0;
    std::vector<CallLogEntry> _callLog;
    std::optional<SessionOutcome> _outcome;
    bool _ran = false;
};

/// prepare_session + Session::run.
auto run_session(std::string_view issue_url,
                 std::string_view repo_source,
                 ChatBackend& backend,
                 HttpTransport& transport,
                 SessionConfig config,
                 const std::filesystem::path& cache_dir) -> SessionResult;

[[nodiscard]] auto is_control_tool(std::string_view name) -> bool;

} // namespace issuelink
