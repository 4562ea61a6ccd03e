// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/orchestrator.hpp>

#include <gtest/gtest.h>

#include <fmt/format.h>

using namespace issuelink;
using testing_support::run_scripted;
using testing_support::shared;

namespace
{
auto names(const SessionResult& r) -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (auto const& e: r.state.call_log)
        out.push_back(e.call.name);
    return out;
}

auto finish_line(const CommitHash& h) -> std::string
{
    return fmt::format("finish {{\"commit_hash\": \"{}\"}}\n", h.str());
}

auto repeat(const std::string& line, int n) -> std::string
{
    std::string out;
    for (int i = 0; i < n; ++i)
        out += line + "\n";
    return out;
}
} // namespace

TEST(Session, FinishesWithTheNamedCommit)
{
    auto const& fx = shared().fix;
    auto r = run_scripted("issue_title\ncommits_of_author {\"author_name\": \"alice\"}\n" + finish_line(fx.c4));
    EXPECT_EQ(r.outcome.kind, SessionOutcome::Kind::finished);
    EXPECT_EQ(r.outcome.commit_hash, fx.c4);
    EXPECT_EQ(r.state.iteration, 3);
    EXPECT_EQ(names(r), (std::vector<std::string> { "issue_title", "commits_of_author", "finish" }));
    EXPECT_EQ(r.wall_time_s, 0.0);
}

TEST(Session, GiveUpEndsAfterOneIteration)
{
    auto r = run_scripted("give_up\n");
    EXPECT_EQ(r.outcome.kind, SessionOutcome::Kind::gave_up);
    EXPECT_FALSE(r.outcome.commit_hash);
    EXPECT_EQ(r.state.iteration, 1);
}

TEST(Session, IterationBudgetStopsAtTheLimit)
{
    std::shared_ptr<ScriptedBackend> backend;
    auto r = run_scripted(repeat("issue_title", 25), Budgets {}, std::string(fixtures::kFixIssueUrl), {}, &backend);
    EXPECT_EQ(r.outcome.kind, SessionOutcome::Kind::budget_exhausted);
    EXPECT_EQ(r.outcome.reason, "iterations");
    EXPECT_EQ(r.state.iteration, 20);
    EXPECT_EQ(backend->wire_bodies().size(), 20u);
    EXPECT_EQ(r.state.call_log.size(), 20u);
}

TEST(Session, TokenBudgetStopsBeforeTheNextRequest)
{
    Budgets b;
    b.max_total_tokens = 3000;
    std::shared_ptr<ScriptedBackend> backend;
    auto r = run_scripted(repeat("list_commits", 20), b, std::string(fixtures::kFixIssueUrl), {}, &backend);
    EXPECT_EQ(r.outcome.kind, SessionOutcome::Kind::budget_exhausted);
    EXPECT_EQ(r.outcome.reason, "tokens");
    EXPECT_GT(r.state.ledger.cumulative_total(), b.max_total_tokens);
    EXPECT_LT(r.state.iteration, 20);
    EXPECT_EQ(backend->wire_bodies().size(), static_cast<std::size_t>(r.state.iteration));
}

TEST(Session, FinishWithAnotherKnownCommit)
{
    auto const& fx = shared().fix;
    auto r = run_scripted(finish_line(fx.c3));
    EXPECT_EQ(r.outcome.commit_hash, fx.c3);
    EXPECT_EQ(r.state.iteration, 1);
}

TEST(Session, FinishWithAnUnknownHashIsAnInBandError)
{
    auto const& fx = shared().fix;
    auto r = run_scripted(finish_line(*CommitHash::parse(std::string(40, '0'))) + finish_line(fx.c1));
    EXPECT_EQ(r.outcome.commit_hash, fx.c1);
    EXPECT_EQ(r.state.iteration, 2);
    ASSERT_EQ(r.state.call_log.size(), 2u);
    EXPECT_TRUE(r.state.call_log[0].is_error);
    bool saw = false;
    for (auto const& t: r.state.history)
        saw |= t.role == ChatRole::tool_result && t.content.find("unknown commit hash") != std::string::npos;
    EXPECT_TRUE(saw);
}

TEST(Session, CallsAfterATerminalCallAreNotExecuted)
{
    auto const& fx = shared().fix;
    auto r = run_scripted(finish_line(fx.c3) + "+ " + finish_line(fx.c4) + "+ give_up\n");
    EXPECT_EQ(r.outcome.kind, SessionOutcome::Kind::finished);
    EXPECT_EQ(r.outcome.commit_hash, fx.c3);
    EXPECT_EQ(r.state.call_log.size(), 1u);
}

TEST(Session, CallLogHasOneEntryPerExecutedCall)
{
    auto r = run_scripted("issue_title\nlist_authors\nlist_files {\"pattern\": \"**\"}\nissue_comments\nlist_commits\ngive_up\n");
    EXPECT_EQ(r.state.call_log.size(), 6u);
    for (std::size_t i = 0; i < r.state.call_log.size(); ++i)
        EXPECT_EQ(r.state.call_log[i].iteration, static_cast<int>(i) + 1);
}

TEST(Session, FreeTextGetsACorrection)
{
    auto r = run_scripted("say I believe it is the parsing commit\ngive_up\n");
    EXPECT_EQ(r.outcome.kind, SessionOutcome::Kind::gave_up);
    EXPECT_EQ(r.state.iteration, 2);
    bool corrected = false;
    for (auto const& t: r.state.history)
        corrected |= t.role == ChatRole::user && t.content == kNoToolCallCorrection;
    EXPECT_TRUE(corrected);
}

TEST(Session, ExhaustedScriptsRunOutOfIterations)
{
    auto r = run_scripted("");
    EXPECT_EQ(r.outcome.reason, "iterations");
    EXPECT_EQ(r.state.iteration, 20);
}

TEST(Session, BadArgumentsAndUnknownToolsStayInBand)
{
    auto r = run_scripted("no_such_tool\ncommit_diff {\"commit_hash\": \"abc\"}\nlist_files {oops\ngive_up\n");
    ASSERT_EQ(r.state.call_log.size(), 4u);
    EXPECT_TRUE(r.state.call_log[0].is_error);
    EXPECT_TRUE(r.state.call_log[1].is_error);
    EXPECT_TRUE(r.state.call_log[2].is_error);
    EXPECT_EQ(r.outcome.kind, SessionOutcome::Kind::gave_up);
}

TEST(Session, LargeResultsAreDiscardedOnRequest)
{
    auto const& b = testing_support::bulk(3, 48'000);
    std::string script;
    for (auto const& c: b.commits)
        script += fmt::format("commit_diff {{\"commit_hash\": \"{}\"}}\nfeedback discard\n", c.str());
    script += "give_up\n";
    auto r = run_scripted(script, Budgets {}, b.issue_url, b.dir);
    ASSERT_EQ(r.state.call_log.size(), 7u);
    for (int i = 0; i < 3; ++i)
    {
        auto const& data = r.state.call_log[static_cast<std::size_t>(2 * i)];
        auto const& fb = r.state.call_log[static_cast<std::size_t>(2 * i + 1)];
        EXPECT_GT(data.byte_size, 40'000u);
        EXPECT_EQ(data.verdict, FeedbackVerdict::discard);
        EXPECT_FALSE(fb.is_error);
        EXPECT_LT(fb.context_tokens_after, fb.context_tokens_before);
    }
    EXPECT_LT(r.state.ledger.cumulative_total(), 12'000);
}

TEST(Session, IgnoredFeedbackIsAutoDiscarded)
{
    auto const& b = testing_support::bulk(3, 48'000);
    auto script = fmt::format("commit_diff {{\"commit_hash\": \"{}\"}}\nissue_title\nissue_title\nissue_title\ngive_up\n",
                              b.commits[0].str());
    auto r = run_scripted(script, Budgets {}, b.issue_url, b.dir);
    EXPECT_EQ(r.state.call_log[0].verdict, FeedbackVerdict::auto_discard);
    EXPECT_TRUE(r.state.history[2].pruned);
}

TEST(Session, SmallResultsDoNotAcceptFeedback)
{
    auto r = run_scripted("issue_title\nfeedback discard\ngive_up\n");
    ASSERT_EQ(r.state.call_log.size(), 3u);
    EXPECT_TRUE(r.state.call_log[1].is_error);
    EXPECT_FALSE(r.state.call_log[0].verdict);
}

TEST(Session, RunIsSingleUse)
{
    auto backend = std::make_shared<ScriptedBackend>(ScriptedBackend::from_text("give_up"));
    SessionConfig config;
    config.clock = std::make_shared<FixedClock>(0);
    Session s(testing_support::inputs_for(std::string(fixtures::kFixIssueUrl), shared().fix.dir), *backend, config);
    (void) s.run();
    EXPECT_THROW((void) s.run(), std::logic_error);
}

TEST(Session, OpenIssueLifespanEndsAtTheClock)
{
    testing_support::TempDir rec;
    fixtures::record_github_issue(rec.path(),
                                  { "https://github.com/example/fixture/issues/77", "open", "", "dana",
                                    fixtures::kFixIssueCreated, std::nullopt, {} });
    RecordedTransport t(rec.path());
    auto inputs = testing_support::inputs_for(std::string(fixtures::kFixIssueUrl), shared().fix.dir);
    inputs.issue = fetch_issue("https://github.com/example/fixture/issues/77", t);
    auto const& fx = shared().fix;
    auto backend = std::make_shared<ScriptedBackend>(ScriptedBackend::from_text("list_commits\ngive_up"));
    SessionConfig config;
    // The clock stops between C2 and C3, so C3 and C4 are outside the lifespan.
    config.clock = std::make_shared<FixedClock>(static_cast<double>(inputs.history->find(fx.c2)->commit_time + 3600));
    Session s(std::move(inputs), *backend, config);
    auto r = s.run();
    auto const& listing = r.state.history[2].content;
    EXPECT_NE(listing.find(fx.c2.str()), std::string::npos);
    EXPECT_EQ(listing.find(fx.c3.str()), std::string::npos);
}

TEST(Session, PageSizeConfigurationReachesTheTools)
{
    auto backend = std::make_shared<ScriptedBackend>(ScriptedBackend::from_text("list_commits\ngive_up"));
    SessionConfig config;
    config.page_size = 2;
    config.clock = std::make_shared<FixedClock>(0);
    Session s(testing_support::inputs_for(std::string(fixtures::kFixIssueUrl), shared().fix.dir), *backend, config);
    auto r = s.run();
    EXPECT_NE(r.state.history[2].content.find("2 result(s)"), std::string::npos);
}

TEST(PrepareSession, FailuresHappenBeforeModelTraffic)
{
    RecordedTransport t(shared().recordings);
    testing_support::TempDir cache;
    EXPECT_THROW((void) prepare_session(fixtures::kFixIssueUrl, "/nonexistent/repo", t, cache.path()), SetupError);
    EXPECT_THROW((void) prepare_session("https://github.com/example/fixture/issues/404", shared().fix.dir.string(), t,
                                        cache.path()),
                 SetupError);
    auto inputs = prepare_session(fixtures::kFixIssueUrl, shared().fix.dir.string(), t, cache.path());
    EXPECT_EQ(inputs.history->size(), 4u);
    EXPECT_EQ(inputs.issue.title, "Port parsing fails on padded input");
}

TEST(ControlTools, AreRecognized)
{
    EXPECT_TRUE(is_control_tool("finish"));
    EXPECT_TRUE(is_control_tool("give_up"));
    EXPECT_TRUE(is_control_tool("feedback"));
    EXPECT_FALSE(is_control_tool("issue_title"));
}
