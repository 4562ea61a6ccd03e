// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/domain.hpp>
#include <issuelink/http.hpp>
#include <issuelink/schema_registry.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace issuelink
{

enum class ChatRole
{
    system,
    user, // corrective notices after replies without a tool call
    assistant,
    tool_result,
};

[[nodiscard]] auto to_string(ChatRole role) -> std::string_view;

struct ChatTurn
{
    ChatRole role = ChatRole::system;
    std::string content;
    std::vector<ToolCall> tool_calls; // assistant turns only
    std::string call_id;              // tool_result turns only
    std::int64_t token_estimate = 0;
    bool pruned = false;
};

/// ceil(bytes / 4); 40 kB is roughly 10k tokens.
[[nodiscard]] auto estimate_tokens(std::string_view text) -> std::int64_t;
[[nodiscard]] auto estimate_turn_tokens(const ChatTurn& turn) -> std::int64_t;

/// Token accounting for one session.
///
/// cumulative_total() is the size of the live history: every turn counted at
/// its current estimate, so pruning a result lowers it. This is what the
/// session budget is enforced against. consumed_total() grows monotonically
/// by prompt + completion tokens of every request (provider-reported when
/// available) and is what cost figures are based on.
class TokenLedger
{
  public:
    auto append(std::int64_t estimate) -> std::size_t;
    void update(std::size_t turn_index, std::int64_t estimate);
    void add_consumed(std::int64_t tokens) { _consumed += tokens; }

    [[nodiscard]] auto cumulative_total() const noexcept -> std::int64_t { return _total; }
    [[nodiscard]] auto consumed_total() const noexcept -> std::int64_t { return _consumed; }
    [[nodiscard]] auto per_turn() const noexcept -> const std::vector<std::int64_t>& { return _turns; }

  private:
    std::vector<std::int64_t> _turns;
    std::int64_t _total = 0;
    std::int64_t _consumed = 0;
};

enum class FeedbackVerdict
{
    discard,
    preserve,
    auto_discard, // the model ignored the request twice
};

[[nodiscard]] auto to_string(FeedbackVerdict verdict) -> std::string_view;

struct PendingFeedback
{
    std::string call_id;
    std::size_t byte_size = 0;
    std::size_t turn_index = 0; // position of the tool_result in the history
    int raised_at_iteration = 0;
    int ignored = 0;
};

/// Chat-completions endpoint. Receives the JSON request body, returns the
/// JSON response body. Throws TransportError for retryable failures.
class ChatBackend
{
  public:
    virtual ~ChatBackend() = default;
    virtual auto complete(const std::string& request_body) -> std::string = 0;
};

/// The dialogue could not continue (transport retries exhausted, or the
/// backend returned something that is not a chat completion).
class SessionError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// System prompt: task, iteration limit, lifespan default, feedback protocol
/// with an example, and the tool-combination heuristics.
[[nodiscard]] auto build_initial_prompt(std::string_view issue_url, const Budgets& budgets, const SchemaRegistry& registry)
    -> ChatTurn;

inline constexpr std::string_view kFeedbackRequestMarker = "[feedback requested]";
inline constexpr std::string_view kNoToolCallCorrection =
    "Your reply did not call a function. Reply only with function calls: call finish with the full hash of the "
    "resolving commit, or give_up if it can not be identified.";

struct MiddlewareConfig
{
    std::string model = "gpt-4.1-nano";
    Budgets budgets;
    RetryPolicy retry;
};

/// Owns the dialogue history for one session and speaks the chat wire
/// protocol with declared tools.
class LlmMiddleware
{
  public:
    LlmMiddleware(ChatBackend& backend, const SchemaRegistry& registry, MiddlewareConfig config);

    /// Appends the system prompt. Must be called once, first.
    void begin(std::string_view issue_url);

    /// Sends the history and appends (and returns) the assistant turn.
    /// Throws SessionError when the backend keeps failing.
    auto next_action() -> const ChatTurn&;

    /// Appends a tool result. When `request_feedback` is set, a feedback
    /// request is appended to the visible content and tracked as pending.
    void add_tool_result(const ToolResult& result, bool request_feedback, int iteration);

    void add_correction(std::string text);

    /// Resolves a pending feedback request. Throws ToolError when `call_id`
    /// has none. Returns the confirmation payload.
    auto apply_feedback(std::string_view call_id, FeedbackVerdict verdict) -> std::string;

    /// Ages pending requests raised before `iteration`; those ignored for two
    /// assistant turns are discarded. Returns the call ids discarded.
    auto end_turn(int iteration) -> std::vector<std::string>;

    /// The JSON body the next request would carry.
    [[nodiscard]] auto build_request_body() const -> std::string;

    [[nodiscard]] auto history() const -> const std::vector<ChatTurn>& { return _history; }
    [[nodiscard]] auto ledger() const -> const TokenLedger& { return _ledger; }
    [[nodiscard]] auto pending() const -> const std::vector<PendingFeedback>& { return _pending; }

  private:
    void append(ChatTurn turn);
    void prune(std::size_t turn_index, const PendingFeedback& pending);
    auto parse_reply(const std::string& response_body) -> ChatTurn;

    ChatBackend& _backend;
    const SchemaRegistry& _registry;
    MiddlewareConfig _config;
    std::vector<ChatTurn> _history;
    TokenLedger _ledger;
    std::vector<PendingFeedback> _pending;
    int _generatedIds = 0;
};

/// Text of the notice that replaces a discarded result.
[[nodiscard]] auto omitted_notice(std::string_view call_id, std::size_t byte_size) -> std::string;

} // namespace issuelink
