// SPDX-License-Identifier: Apache-2.0
#include <issuelink/orchestrator.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace issuelink
{

using nlohmann::json;

auto SystemClock::now() const -> double
{
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

auto is_control_tool(std::string_view name) -> bool
{
    return name == "finish" || name == "give_up" || name == "feedback";
}

auto prepare_session(std::string_view issue_url,
                     std::string_view repo_source,
                     HttpTransport& transport,
                     const std::filesystem::path& cache_dir,
                     const TrackerCredentials& credentials,
                     std::shared_ptr<const LanguageRegistry> languages) -> SessionInputs
{
    SessionInputs inputs;
    inputs.issue_url = std::string(issue_url);
    inputs.repo = std::make_shared<const GitRepository>(GitRepository::open_or_clone(repo_source, cache_dir));
    inputs.history = std::make_shared<const UnifiedHistory>(UnifiedHistory::load(*inputs.repo));
    inputs.issue = fetch_issue(issue_url, transport, credentials);
    if (!languages)
        languages = std::make_shared<const LanguageRegistry>(LanguageRegistry::load(LanguageRegistry::default_directory()));
    inputs.languages = std::move(languages);
    return inputs;
}

Session::Session(SessionInputs inputs, ChatBackend& backend, SessionConfig config):
    _inputs(std::move(inputs)), _config(std::move(config))
{
    _config.budgets.validate();
    if (!_inputs.repo || !_inputs.history || !_inputs.languages)
        throw SetupError("session inputs are incomplete");
    if (!_config.clock)
        _config.clock = std::make_shared<SystemClock>();

    auto const now = static_cast<UnixTime>(std::floor(_config.clock->now()));
    _git = std::make_unique<GitExtractor>(
        _inputs.repo, _inputs.history, LifespanFilter::for_issue(_inputs.issue.created_at, _inputs.issue.closed_at, now));
    _git->set_default_page_size(_config.page_size);
    _issue = std::make_unique<IssueExtractor>(_inputs.issue);
    _issue->set_default_page_size(_config.page_size);
    _code = std::make_unique<CodeNavigator>(_inputs.repo, _inputs.languages);

    _registry.extend(_git->bindings());
    _registry.extend(_issue->bindings());
    _registry.extend(_code->bindings());
    _registry.extend(control_bindings());

    _middleware = std::make_unique<LlmMiddleware>(
        backend, _registry, MiddlewareConfig { _config.model, _config.budgets, _config.retry });
}

auto Session::control_bindings() -> std::vector<ToolBinding>
{
    std::vector<ToolBinding> tools;
    tools.push_back({ { "finish",
                        "Marks the commit as the one that resolved the issue and ends the session. Needs the full "
                        "40-character hash of a commit in the repository.",
                        ToolCategory::control,
                        { { "commit_hash", ParamType::string, true, "full 40-character commit hash", {} } } },
                      [this](const json& args) { return finish(args); } });
    tools.push_back({ { "give_up",
                        "Ends the session without an answer, when the resolving commit can not be identified.",
                        ToolCategory::control,
                        {} },
                      [this](const json&) {
                          _outcome = SessionOutcome::gave_up("the model gave up");
                          return std::string("session ended without an answer");
                      } });
    tools.push_back({ { "feedback",
                        "Answers a feedback request on a large function result: discard replaces it with a short "
                        "notice, preserve keeps it.",
                        ToolCategory::control,
                        { { "call_id", ParamType::string, true, "id of the call whose result is being judged", {} },
                          { "verdict", ParamType::string, true, "discard or preserve", { "discard", "preserve" } } } },
                      [this](const json& args) { return feedback(args); } });
    return tools;
}

auto Session::finish(const json& args) -> std::string
{
    auto const text = arg_string(args, "commit_hash");
    auto const hash = CommitHash::require(text);
    if (!_inputs.history->contains(hash))
        throw ToolError(fmt::format("unknown commit hash {}: it is not in the repository history", text));
    _outcome = SessionOutcome::finished(hash);
    return fmt::format("recorded {} as the resolving commit", hash.str());
}

auto Session::feedback(const json& args) -> std::string
{
    auto const callId = arg_string(args, "call_id");
    auto const verdict = arg_string(args, "verdict") == "discard" ? FeedbackVerdict::discard : FeedbackVerdict::preserve;
    auto message = _middleware->apply_feedback(callId, verdict);
    mark_verdict(callId, verdict);
    return message;
}

void Session::mark_verdict(std::string_view call_id, FeedbackVerdict verdict)
{
    for (auto& entry: _callLog)
        if (entry.call.call_id == call_id && !is_control_tool(entry.call.name))
            entry.verdict = verdict;
}

auto Session::snapshot_state() const -> SessionState
{
    SessionState state;
    state.iteration = _iteration;
    state.ledger = _middleware->ledger();
    state.history = _middleware->history();
    state.call_log = _callLog;
    state.outcome = _outcome;
    return state;
}

auto Session::run() -> SessionResult
{
    if (_ran)
        throw std::logic_error("Session::run called twice");
    _ran = true;

    auto const started = _config.clock->now();
    auto const& budgets = _config.budgets;
    _middleware->begin(_inputs.issue_url);

    while (!_outcome)
    {
        if (_middleware->ledger().cumulative_total() > budgets.max_total_tokens)
        {
            _outcome = SessionOutcome::budget_exhausted("tokens");
            break;
        }
        if (_iteration >= budgets.max_iterations)
        {
            _outcome = SessionOutcome::budget_exhausted("iterations");
            break;
        }

        auto const turn = _middleware->next_action();
        ++_iteration;

        if (turn.tool_calls.empty())
            _middleware->add_correction(std::string(kNoToolCallCorrection));

        for (auto const& call: turn.tool_calls)
        {
            if (_outcome)
                break; // calls after a terminal one are not executed
            auto const before = _middleware->ledger().cumulative_total();
            auto const result = _registry.route(call);
            auto const oversized = !is_control_tool(call.name) && !result.is_error
                                   && result.byte_size > budgets.feedback_threshold_bytes;
            _callLog.push_back({ _iteration, call, result.byte_size, std::nullopt, result.is_error, before, 0 });
            _middleware->add_tool_result(result, oversized, _iteration);
            _callLog.back().context_tokens_after = _middleware->ledger().cumulative_total();
        }

        for (auto const& id: _middleware->end_turn(_iteration))
            mark_verdict(id, FeedbackVerdict::auto_discard);
    }

    SessionResult result;
    result.outcome = *_outcome;
    result.state = snapshot_state();
    result.wall_time_s = std::max(0.0, _config.clock->now() - started);
    return result;
}

auto run_session(std::string_view issue_url,
                 std::string_view repo_source,
                 ChatBackend& backend,
                 HttpTransport& transport,
                 SessionConfig config,
                 const std::filesystem::path& cache_dir) -> SessionResult
{
    auto inputs = prepare_session(issue_url, repo_source, transport, cache_dir, TrackerCredentials::from_environment());
    Session session(std::move(inputs), backend, std::move(config));
    return session.run();
}

} // namespace issuelink
