// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/http.hpp>
#include <issuelink/llm_middleware.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace issuelink
{

/// One function call the scripted model emits.
struct ScriptedCall
{
    std::string name;
    std::string raw_arguments; // sent verbatim as the arguments string
    /// For feedback lines without an explicit id: target the most recent data
    /// call emitted so far.
    bool feedback_targets_last = false;
};

/// One assistant turn: either tool calls or free text.
struct ScriptStep
{
    std::vector<ScriptedCall> calls;
    std::optional<std::string> text;
};

/// Thrown for script syntax errors, with the offending line number.
class ScriptError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A deterministic stand-in for the model that replays a session script.
///
/// Script format, one assistant turn per line:
///
///     # comment
///     issue_title
///     commits_of_author {"author_name": "alice"}
///     + commit_metadata {"commit_hash": "${C3}"}   (adds a call to the same turn)
///     feedback discard                             (targets the last data call)
///     feedback preserve call_4
///     say I think the answer is obvious            (free-text reply)
///
/// `${NAME}` is replaced from the variables map; an unknown name is an error.
/// Once the script is exhausted every reply is the text "(script exhausted)".
class ScriptedBackend final: public ChatBackend
{
  public:
    using Variables = std::map<std::string, std::string>;

    static auto parse(std::string_view script, const Variables& vars = {}) -> std::vector<ScriptStep>;
    static auto from_file(const std::filesystem::path& file, const Variables& vars = {}) -> ScriptedBackend;
    static auto from_text(std::string_view script, const Variables& vars = {}) -> ScriptedBackend;

    explicit ScriptedBackend(std::vector<ScriptStep> steps): _steps(std::move(steps)) {}

    auto complete(const std::string& request_body) -> std::string override;

    /// Every request body received, in order.
    [[nodiscard]] auto wire_bodies() const -> const std::vector<std::string>& { return _bodies; }
    [[nodiscard]] auto steps_consumed() const noexcept -> std::size_t { return _next; }

  private:
    std::vector<ScriptStep> _steps;
    std::size_t _next = 0;
    int _callCounter = 0;
    std::string _lastDataCallId;
    std::vector<std::string> _bodies;
};

/// OpenAI-compatible chat-completions client.
class OpenAiBackend final: public ChatBackend
{
  public:
    /// OPENAI_API_KEY (required) and OPENAI_BASE_URL (default
    /// https://api.openai.com/v1). Throws SetupError without a key.
    static auto from_environment(std::shared_ptr<HttpTransport> transport) -> OpenAiBackend;

    OpenAiBackend(std::shared_ptr<HttpTransport> transport, std::string base_url, std::string api_key);

    auto complete(const std::string& request_body) -> std::string override;

  private:
    std::shared_ptr<HttpTransport> _transport;
    std::string _baseUrl;
    std::string _apiKey;
};

} // namespace issuelink
