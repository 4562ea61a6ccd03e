// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/backends.hpp>

#include <gtest/gtest.h>

#include <cstdlib>

using namespace issuelink;
using nlohmann::json;

namespace
{
auto reply_calls(ScriptedBackend& b) -> json
{
    auto j = json::parse(b.complete("{}"));
    return j["choices"][0]["message"].value("tool_calls", json::array());
}
} // namespace

TEST(ScriptedBackend, ParsesCallsContinuationsAndText)
{
    auto steps = ScriptedBackend::parse("# comment\n"
                                        "\n"
                                        "issue_title\n"
                                        "commits_of_author {\"author_name\": \"alice\"}\n"
                                        "+ list_authors\n"
                                        "say hello there\n");
    ASSERT_EQ(steps.size(), 3u);
    EXPECT_EQ(steps[0].calls[0].name, "issue_title");
    EXPECT_EQ(steps[0].calls[0].raw_arguments, "{}");
    ASSERT_EQ(steps[1].calls.size(), 2u);
    EXPECT_EQ(steps[1].calls[1].name, "list_authors");
    EXPECT_EQ(steps[2].text, "hello there");
}

TEST(ScriptedBackend, SubstitutesVariables)
{
    auto steps = ScriptedBackend::parse("finish {\"commit_hash\": \"${H}\"}", { { "H", "abc" } });
    EXPECT_EQ(steps[0].calls[0].raw_arguments, "{\"commit_hash\": \"abc\"}");
    EXPECT_THROW((void) ScriptedBackend::parse("finish ${MISSING}"), ScriptError);
    EXPECT_THROW((void) ScriptedBackend::parse("+ orphan"), ScriptError);
    EXPECT_THROW((void) ScriptedBackend::parse("feedback"), ScriptError);
}

TEST(ScriptedBackend, EmitsSequentialCallIdsAndTargetsFeedback)
{
    auto b = ScriptedBackend::from_text("list_commits\n"
                                        "+ issue_title\n"
                                        "feedback discard\n"
                                        "feedback preserve call_1\n");
    auto first = reply_calls(b);
    ASSERT_EQ(first.size(), 2u);
    EXPECT_EQ(first[0]["id"], "call_1");
    EXPECT_EQ(first[1]["id"], "call_2");
    auto fb = reply_calls(b);
    EXPECT_EQ(json::parse(fb[0]["function"]["arguments"].get<std::string>()),
              (json { { "call_id", "call_2" }, { "verdict", "discard" } }));
    auto explicit_fb = reply_calls(b);
    EXPECT_EQ(json::parse(explicit_fb[0]["function"]["arguments"].get<std::string>())["call_id"], "call_1");
}

TEST(ScriptedBackend, RecordsBodiesAndRepliesWhenExhausted)
{
    auto b = ScriptedBackend::from_text("say only line");
    (void) b.complete("one");
    auto last = json::parse(b.complete("two"));
    EXPECT_EQ(last["choices"][0]["message"]["content"], "(script exhausted)");
    EXPECT_EQ(b.wire_bodies(), (std::vector<std::string> { "one", "two" }));
    EXPECT_EQ(b.steps_consumed(), 1u);
}

TEST(ScriptedBackend, FromFileReportsMissingFiles)
{
    EXPECT_THROW((void) ScriptedBackend::from_file("/nonexistent/script"), ScriptError);
}

namespace
{
class CaptureTransport final: public HttpTransport
{
  public:
    auto send(const HttpRequest& r) -> HttpResponse override
    {
        requests.push_back(r);
        return response;
    }
    HttpResponse response { 200, R"({"choices":[]})", {} };
    std::vector<HttpRequest> requests;
};
} // namespace

TEST(OpenAiBackend, PostsToChatCompletionsWithBearerKey)
{
    auto t = std::make_shared<CaptureTransport>();
    OpenAiBackend b(t, "https://llm.example/v1/", "key-123");
    EXPECT_EQ(b.complete("{\"x\":1}"), R"({"choices":[]})");
    ASSERT_EQ(t->requests.size(), 1u);
    auto const& r = t->requests[0];
    EXPECT_EQ(r.method, "POST");
    EXPECT_EQ(r.url, "https://llm.example/v1/chat/completions");
    EXPECT_EQ(r.body, "{\"x\":1}");
    bool auth = false;
    for (auto const& [k, v]: r.headers)
        auth |= k == "Authorization" && v == "Bearer key-123";
    EXPECT_TRUE(auth);
}

TEST(OpenAiBackend, ClassifiesFailures)
{
    auto t = std::make_shared<CaptureTransport>();
    OpenAiBackend b(t, "https://llm.example/v1", "k");
    t->response = { 429, "slow down", {} };
    EXPECT_THROW(b.complete("{}"), TransportError);
    t->response = { 503, "", {} };
    EXPECT_THROW(b.complete("{}"), TransportError);
    t->response = { 401, "bad key", {} };
    EXPECT_THROW(b.complete("{}"), SessionError);
}

TEST(OpenAiBackend, KeyComesFromTheEnvironment)
{
    auto t = std::make_shared<CaptureTransport>();
    auto const* saved = std::getenv("OPENAI_API_KEY");
    std::string const keep = saved ? saved : "";
    ::unsetenv("OPENAI_API_KEY");
    EXPECT_THROW((void) OpenAiBackend::from_environment(t), SetupError);
    ::setenv("OPENAI_API_KEY", "env-key", 1);
    ::setenv("OPENAI_BASE_URL", "https://proxy.example/v1", 1);
    auto b = OpenAiBackend::from_environment(t);
    (void) b.complete("{}");
    EXPECT_EQ(t->requests.back().url, "https://proxy.example/v1/chat/completions");
    ::unsetenv("OPENAI_BASE_URL");
    if (saved)
        ::setenv("OPENAI_API_KEY", keep.c_str(), 1);
    else
        ::unsetenv("OPENAI_API_KEY");
}
