// SPDX-License-Identifier: Apache-2.0
#include <issuelink/llm_middleware.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>

namespace issuelink
{

using nlohmann::json;

auto to_string(ChatRole role) -> std::string_view
{
    switch (role)
    {
        case ChatRole::system: return "system";
        case ChatRole::user: return "user";
        case ChatRole::assistant: return "assistant";
        case ChatRole::tool_result: return "tool_result";
    }
    return "system";
}

auto to_string(FeedbackVerdict verdict) -> std::string_view
{
    switch (verdict)
    {
        case FeedbackVerdict::discard: return "discard";
        case FeedbackVerdict::preserve: return "preserve";
        case FeedbackVerdict::auto_discard: return "auto_discard";
    }
    return "discard";
}

auto estimate_tokens(std::string_view text) -> std::int64_t
{
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

auto estimate_turn_tokens(const ChatTurn& turn) -> std::int64_t
{
    auto total = estimate_tokens(turn.content);
    for (auto const& call: turn.tool_calls)
        total += estimate_tokens(call.name) + estimate_tokens(call.arguments.dump());
    return total;
}

auto TokenLedger::append(std::int64_t estimate) -> std::size_t
{
    _turns.push_back(estimate);
    _total += estimate;
    return _turns.size() - 1;
}

void TokenLedger::update(std::size_t turn_index, std::int64_t estimate)
{
    _total += estimate - _turns.at(turn_index);
    _turns[turn_index] = estimate;
}

auto omitted_notice(std::string_view call_id, std::size_t byte_size) -> std::string
{
    return fmt::format("[omitted: the {}-byte result of call {} was discarded]", byte_size, call_id);
}

// Prompt ----------------------------------------------------------------------------

auto build_initial_prompt(std::string_view issue_url, const Budgets& budgets, const SchemaRegistry& registry) -> ChatTurn
{
    std::string tools;
    for (auto const* schema: registry.schemas())
        tools += fmt::format("- {}: {}\n", schema->signature(), schema->description);

    auto content = fmt::format(
        R"(You are linking an issue report to the commit that resolved it.

Issue: {url}

Task: identify the final commit that resolved this issue and call finish with its full 40-character hash. When a chain of commits fixed the issue, the answer is the last one, the commit that completed the fix. If the available data is not enough to decide, call give_up.

Rules:
- You have at most {iterations} replies. Every reply counts, whether or not it calls a function. You must call finish or give_up before reaching this limit of {iterations}; otherwise the session ends without a result.
- Call one function per reply. Plain-text replies waste a reply.
- The conversation may use at most {tokens} tokens in total.
- The git functions list_authors, commits_of_author, list_files and commits_on_file only consider commits inside the issue's safe lifespan: from one week before the issue was created until one week after it was closed. list_commits uses the same window by default; pass since/until to it to examine commits outside that window.
- Branches are merged into a single history ordered by commit time. Diffs are taken against the first parent.
- Only hashes returned by the functions exist. finish rejects unknown hashes.

Heuristics:
- Before calling commits_of_author, look at the issue participants (issue_participants, issue_comments) and choose from them: the resolving commit is often authored by someone who took part in the issue thread. Tracker usernames can differ from git author names, so compare them with list_authors.
- Call list_files before commits_on_file to verify the exact file path.
- Comments sometimes quote commit hashes; check them with commit_metadata or commit_diff.

Feedback protocol:
A function result larger than {threshold} bytes ends with "{marker}". In your next reply call feedback with that call's id and a verdict:
- "discard" when the data is not useful. It is replaced by a short "omitted" notice and stops using tokens.
- "preserve" when you still need it.
Example: the result of call "call_7" (a large commit_diff) turned out to be unrelated to the issue, so you reply with
feedback({{"call_id": "call_7", "verdict": "discard"}})
A request that is ignored for two replies is discarded automatically.

Available functions ({count}):
{tools})",
        fmt::arg("url", issue_url),
        fmt::arg("iterations", budgets.max_iterations),
        fmt::arg("tokens", budgets.max_total_tokens),
        fmt::arg("threshold", budgets.feedback_threshold_bytes),
        fmt::arg("marker", kFeedbackRequestMarker),
        fmt::arg("count", registry.size()),
        fmt::arg("tools", tools));

    ChatTurn turn;
    turn.role = ChatRole::system;
    turn.content = std::move(content);
    turn.token_estimate = estimate_turn_tokens(turn);
    return turn;
}

// Middleware ---------------------------------------------------------------------------

LlmMiddleware::LlmMiddleware(ChatBackend& backend, const SchemaRegistry& registry, MiddlewareConfig config):
    _backend(backend), _registry(registry), _config(std::move(config))
{
}

void LlmMiddleware::append(ChatTurn turn)
{
    turn.token_estimate = estimate_turn_tokens(turn);
    _ledger.append(turn.token_estimate);
    _history.push_back(std::move(turn));
}

void LlmMiddleware::begin(std::string_view issue_url)
{
    if (!_history.empty())
        throw std::logic_error("LlmMiddleware::begin called twice");
    append(build_initial_prompt(issue_url, _config.budgets, _registry));
}

auto LlmMiddleware::build_request_body() const -> std::string
{
    auto messages = json::array();
    for (auto const& turn: _history)
    {
        switch (turn.role)
        {
            case ChatRole::system:
            case ChatRole::user:
                messages.push_back({ { "role", to_string(turn.role) }, { "content", turn.content } });
                break;
            case ChatRole::assistant: {
                json m { { "role", "assistant" } };
                m["content"] = turn.content.empty() ? json(nullptr) : json(turn.content);
                if (!turn.tool_calls.empty())
                {
                    auto calls = json::array();
                    for (auto const& c: turn.tool_calls)
                        calls.push_back({ { "id", c.call_id },
                                          { "type", "function" },
                                          { "function",
                                            { { "name", c.name },
                                              { "arguments", c.arguments.is_string() ? c.arguments.get<std::string>() : c.arguments.dump() } } } });
                    m["tool_calls"] = std::move(calls);
                }
                messages.push_back(std::move(m));
                break;
            }
            case ChatRole::tool_result:
                messages.push_back({ { "role", "tool" }, { "tool_call_id", turn.call_id }, { "content", turn.content } });
                break;
        }
    }

    auto tools = json::array();
    for (auto const* schema: _registry.schemas())
        tools.push_back({ { "type", "function" },
                          { "function",
                            { { "name", schema->name },
                              { "description", schema->description },
                              { "parameters", schema->parameters_json_schema() } } } });

    json body { { "model", _config.model }, { "messages", std::move(messages) } };
    if (!tools.empty())
    {
        body["tools"] = std::move(tools);
        body["tool_choice"] = "auto";
    }
    // Repository content is not always valid UTF-8; invalid bytes become U+FFFD.
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

auto LlmMiddleware::parse_reply(const std::string& response_body) -> ChatTurn
{
    auto const j = json::parse(response_body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw SessionError(fmt::format("backend reply is not a chat completion: {}", response_body.substr(0, 300)));

    auto const& message = j["choices"][0].value("message", json::object());
    ChatTurn turn;
    turn.role = ChatRole::assistant;
    if (message.contains("content") && message["content"].is_string())
        turn.content = message["content"].get<std::string>();

    for (auto const& tc: message.value("tool_calls", json::array()))
    {
        ToolCall call;
        call.call_id = tc.value("id", std::string());
        if (call.call_id.empty())
            call.call_id = fmt::format("call_gen_{}", ++_generatedIds);
        auto const fn = tc.value("function", json::object());
        call.name = fn.value("name", std::string());
        auto const& rawArgs = fn.contains("arguments") ? fn["arguments"] : json();
        if (rawArgs.is_object())
            call.arguments = rawArgs;
        else if (rawArgs.is_string())
        {
            auto const text = rawArgs.get<std::string>();
            if (text.find_first_not_of(" \t\r\n") == std::string::npos)
                call.arguments = json::object();
            else
            {
                auto parsed = json::parse(text, nullptr, false);
                // Unparseable text stays a string; validation reports it in-band.
                call.arguments = parsed.is_discarded() ? json(text) : std::move(parsed);
            }
        }
        else
            call.arguments = json::object();
        turn.tool_calls.push_back(std::move(call));
    }

    if (auto const usage = j.value("usage", json::object()); usage.contains("prompt_tokens"))
        _ledger.add_consumed(usage.value("prompt_tokens", std::int64_t { 0 }) + usage.value("completion_tokens", std::int64_t { 0 }));
    else
        _ledger.add_consumed(_ledger.cumulative_total() + estimate_turn_tokens(turn));
    return turn;
}

auto LlmMiddleware::next_action() -> const ChatTurn&
{
    auto const body = build_request_body();
    std::string lastError;
    auto const attempts = std::max(1, _config.retry.max_attempts);
    for (int attempt = 0; attempt < attempts; ++attempt)
    {
        if (attempt > 0)
            _config.retry.wait(attempt - 1);
        std::string response;
        try
        {
            response = _backend.complete(body);
        }
        catch (TransportError const& e)
        {
            lastError = e.what();
            continue;
        }
        append(parse_reply(response));
        return _history.back();
    }
    throw SessionError(fmt::format("chat backend failed after {} attempts: {}", attempts, lastError));
}

void LlmMiddleware::add_tool_result(const ToolResult& result, bool request_feedback, int iteration)
{
    ChatTurn turn;
    turn.role = ChatRole::tool_result;
    turn.call_id = result.call_id;
    turn.content = result.payload;
    if (request_feedback)
        turn.content += fmt::format("\n\n{} This result is {} bytes. Call feedback with call_id \"{}\" and verdict "
                                    "\"discard\" or \"preserve\" in your next reply.",
                                    kFeedbackRequestMarker,
                                    result.byte_size,
                                    result.call_id);
    append(std::move(turn));
    if (request_feedback)
        _pending.push_back({ result.call_id, result.byte_size, _history.size() - 1, iteration, 0 });
}

void LlmMiddleware::add_correction(std::string text)
{
    ChatTurn turn;
    turn.role = ChatRole::user;
    turn.content = std::move(text);
    append(std::move(turn));
}

void LlmMiddleware::prune(std::size_t turn_index, const PendingFeedback& pending)
{
    auto& turn = _history.at(turn_index);
    turn.content = omitted_notice(pending.call_id, pending.byte_size);
    turn.pruned = true;
    turn.token_estimate = estimate_turn_tokens(turn);
    _ledger.update(turn_index, turn.token_estimate);
}

auto LlmMiddleware::apply_feedback(std::string_view call_id, FeedbackVerdict verdict) -> std::string
{
    auto it = std::find_if(_pending.begin(), _pending.end(), [&](auto const& p) { return p.call_id == call_id; });
    if (it == _pending.end())
        throw ToolError(fmt::format("no feedback request is pending for call '{}'", call_id));

    auto const pending = *it;
    _pending.erase(it);
    if (verdict == FeedbackVerdict::preserve)
        return fmt::format("preserved the result of call {}", pending.call_id);
    prune(pending.turn_index, pending);
    return fmt::format("discarded the result of call {} ({} bytes)", pending.call_id, pending.byte_size);
}

auto LlmMiddleware::end_turn(int iteration) -> std::vector<std::string>
{
    std::vector<std::string> discarded;
    for (auto it = _pending.begin(); it != _pending.end();)
    {
        if (it->raised_at_iteration < iteration && ++it->ignored >= 2)
        {
            prune(it->turn_index, *it);
            discarded.push_back(it->call_id);
            it = _pending.erase(it);
        }
        else
            ++it;
    }
    return discarded;
}

} // namespace issuelink
