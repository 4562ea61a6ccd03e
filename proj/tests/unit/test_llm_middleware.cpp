// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/llm_middleware.hpp>

#include <gtest/gtest.h>

#include <deque>

using namespace issuelink;
using nlohmann::json;

namespace
{
auto registry_of(std::vector<std::string> names) -> SchemaRegistry
{
    std::vector<ToolBinding> tools;
    for (auto& n: names)
        tools.push_back({ { n, "d", ToolCategory::git, {} }, [](const json&) { return std::string("ok"); } });
    return SchemaRegistry(std::move(tools));
}

/// Answers every request with one tool call, or throws the queued errors first.
class FakeBackend final: public ChatBackend
{
  public:
    auto complete(const std::string& body) -> std::string override
    {
        bodies.push_back(body);
        if (failures > 0)
        {
            --failures;
            throw TransportError("connection reset");
        }
        if (!replies.empty())
        {
            auto r = replies.front();
            replies.pop_front();
            return r;
        }
        return json { { "choices",
                        json::array({ { { "message",
                                          { { "role", "assistant" },
                                            { "content", nullptr },
                                            { "tool_calls",
                                              json::array({ { { "id", "call_x" },
                                                              { "type", "function" },
                                                              { "function", { { "name", "t" }, { "arguments", "{}" } } } } }) } } } } }) } }
            .dump();
    }
    int failures = 0;
    std::deque<std::string> replies;
    std::vector<std::string> bodies;
};

auto big_payload(std::size_t bytes, char fill = 'x') -> std::string
{
    return "UNIQUE-MARKER-" + std::string(bytes - 14, fill);
}

auto config() -> MiddlewareConfig
{
    MiddlewareConfig c;
    c.retry = testing_support::no_sleep_retry(3);
    return c;
}

auto large_tool_result(LlmMiddleware& m, const std::string& id, std::size_t bytes, int iteration) -> std::int64_t
{
    auto r = ToolResult::ok(id, big_payload(bytes));
    auto const before = m.ledger().cumulative_total();
    m.add_tool_result(r, true, iteration);
    return m.ledger().cumulative_total() - before;
}
} // namespace

TEST(EstimateTokens, IsBytesOverFourRoundedUp)
{
    EXPECT_EQ(estimate_tokens(std::string(40000, 'a')), 10000);
    EXPECT_EQ(estimate_tokens(""), 0);
    EXPECT_EQ(estimate_tokens("abcde"), 2);
    EXPECT_EQ(estimate_tokens("abcd"), 1);
}

TEST(TokenLedger, TracksLiveAndConsumedTotals)
{
    TokenLedger l;
    auto a = l.append(100);
    l.append(50);
    EXPECT_EQ(l.cumulative_total(), 150);
    l.update(a, 10);
    EXPECT_EQ(l.cumulative_total(), 60);
    l.add_consumed(500);
    l.add_consumed(70);
    EXPECT_EQ(l.consumed_total(), 570);
}

TEST(InitialPrompt, MentionsTheIterationLimitAndEveryTool)
{
    auto const& fx = testing_support::shared();
    auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptStep> {});
    Session session(testing_support::inputs_for(std::string(fixtures::kFixIssueUrl), fx.fix.dir), *backend, SessionConfig {});
    auto prompt = build_initial_prompt(fixtures::kFixIssueUrl, Budgets {}, session.registry());
    EXPECT_EQ(prompt.role, ChatRole::system);
    EXPECT_NE(prompt.content.find("20"), std::string::npos);
    EXPECT_NE(prompt.content.find(fixtures::kFixIssueUrl), std::string::npos);
    for (auto const& name: session.registry().names())
        EXPECT_NE(prompt.content.find(name), std::string::npos) << name;
    EXPECT_NE(prompt.content.find("feedback"), std::string::npos);
    EXPECT_NE(prompt.content.find("discard"), std::string::npos);
}

TEST(InitialPrompt, EmptyUrlStillBuilds)
{
    auto r = registry_of({ "t" });
    auto prompt = build_initial_prompt("", Budgets {}, r);
    EXPECT_FALSE(prompt.content.empty());
}

TEST(LlmMiddleware, DiscardReplacesTheResultAndShrinksTheLedger)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("https://github.com/o/r/issues/1");
    auto const base = m.ledger().cumulative_total();
    auto const added = large_tool_result(m, "call_3", 60000, 1);
    EXPECT_GE(added, 15000);
    ASSERT_EQ(m.pending().size(), 1u);
    EXPECT_NE(m.history().back().content.find("[feedback requested]"), std::string::npos);

    auto confirmation = m.apply_feedback("call_3", FeedbackVerdict::discard);
    EXPECT_NE(confirmation.find("discarded"), std::string::npos);
    auto const notice = omitted_notice("call_3", 60000);
    EXPECT_EQ(m.history().back().content, notice);
    EXPECT_TRUE(m.history().back().pruned);
    EXPECT_EQ(m.ledger().cumulative_total(), base + estimate_tokens(notice));
    EXPECT_TRUE(m.pending().empty());
}

TEST(LlmMiddleware, PreserveLeavesTheResultInPlace)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    large_tool_result(m, "call_3", 50000, 1);
    auto const total = m.ledger().cumulative_total();
    auto const content = m.history().back().content;
    m.apply_feedback("call_3", FeedbackVerdict::preserve);
    EXPECT_EQ(m.ledger().cumulative_total(), total);
    EXPECT_EQ(m.history().back().content, content);
    EXPECT_TRUE(m.pending().empty());
}

TEST(LlmMiddleware, FeedbackWithoutAPendingRequestIsAToolError)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    m.add_tool_result(ToolResult::ok("call_1", "small"), false, 1);
    EXPECT_THROW(m.apply_feedback("call_1", FeedbackVerdict::discard), ToolError);
    EXPECT_THROW(m.apply_feedback("call_99", FeedbackVerdict::preserve), ToolError);
}

TEST(LlmMiddleware, IgnoredRequestsAreDiscardedAfterTwoTurns)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    large_tool_result(m, "call_1", 45000, 1);
    EXPECT_TRUE(m.end_turn(1).empty()); // the turn that produced it
    EXPECT_TRUE(m.end_turn(2).empty()); // first ignored reply
    EXPECT_EQ(m.end_turn(3), std::vector<std::string> { "call_1" });
    EXPECT_TRUE(m.history().back().pruned);
    EXPECT_TRUE(m.pending().empty());
}

TEST(LlmMiddleware, PrunedTextNeverReachesTheWire)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    m.next_action();
    large_tool_result(m, "call_x", 50000, 1);
    m.next_action();
    EXPECT_NE(backend.bodies.back().find("UNIQUE-MARKER-"), std::string::npos);
    m.apply_feedback("call_x", FeedbackVerdict::discard);
    m.next_action();
    EXPECT_EQ(backend.bodies.back().find("UNIQUE-MARKER-"), std::string::npos);
    EXPECT_NE(backend.bodies.back().find("[omitted: the 50000-byte result of call call_x was discarded]"), std::string::npos);
}

TEST(LlmMiddleware, RequestBodyDeclaresToolsAndReplaysCalls)
{
    auto r = registry_of({ "alpha", "beta" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    m.next_action();
    m.add_tool_result(ToolResult::ok("call_x", "result text"), false, 1);
    auto body = json::parse(m.build_request_body());
    EXPECT_EQ(body["model"], "gpt-4.1-nano");
    ASSERT_EQ(body["tools"].size(), 2u);
    EXPECT_EQ(body["tools"][0]["function"]["name"], "alpha");
    auto const& msgs = body["messages"];
    ASSERT_EQ(msgs.size(), 3u);
    EXPECT_EQ(msgs[0]["role"], "system");
    EXPECT_EQ(msgs[1]["role"], "assistant");
    EXPECT_EQ(msgs[1]["tool_calls"][0]["id"], "call_x");
    EXPECT_EQ(msgs[2]["role"], "tool");
    EXPECT_EQ(msgs[2]["tool_call_id"], "call_x");
    EXPECT_EQ(msgs[2]["content"], "result text");
}

TEST(LlmMiddleware, InvalidUtf8IsReplacedOnTheWire)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    m.add_tool_result(ToolResult::ok("c", std::string("bad \xff byte")), false, 1);
    auto body = json::parse(m.build_request_body());
    EXPECT_EQ(body["messages"][1]["content"], "bad \xef\xbf\xbd byte");
}

TEST(LlmMiddleware, RetriesTransportFailuresThenGivesUp)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    backend.failures = 2;
    EXPECT_EQ(m.next_action().tool_calls.size(), 1u);
    EXPECT_EQ(backend.bodies.size(), 3u);
    backend.failures = 3;
    EXPECT_THROW(m.next_action(), SessionError);
}

TEST(LlmMiddleware, MalformedRepliesAreSessionErrors)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    backend.replies.push_back("not json");
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    EXPECT_THROW(m.next_action(), SessionError);
}

TEST(LlmMiddleware, ArgumentTextThatIsNotJsonIsKeptForValidation)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    backend.replies.push_back(
        R"({"choices":[{"message":{"role":"assistant","tool_calls":[{"id":"a","function":{"name":"t","arguments":"{oops"}}]}}]})");
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    auto const& turn = m.next_action();
    ASSERT_EQ(turn.tool_calls.size(), 1u);
    EXPECT_TRUE(turn.tool_calls[0].arguments.is_string());
}

TEST(LlmMiddleware, ConsumedTokensPreferProviderUsage)
{
    auto r = registry_of({ "t" });
    FakeBackend backend;
    backend.replies.push_back(
        R"({"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":1000,"completion_tokens":5}})");
    LlmMiddleware m(backend, r, config());
    m.begin("u");
    m.next_action();
    EXPECT_EQ(m.ledger().consumed_total(), 1005);
    auto const before = m.ledger().consumed_total();
    auto const live = m.ledger().cumulative_total();
    m.next_action();
    EXPECT_GE(m.ledger().consumed_total(), before + live);
}
