// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/issue_extractor.hpp>

#include <gtest/gtest.h>

#include <deque>

using namespace issuelink;
using testing_support::shared;

namespace
{
auto recorded() -> std::shared_ptr<RecordedTransport>
{
    return std::make_shared<RecordedTransport>(shared().recordings);
}

auto fix_issue() -> IssueExtractor
{
    auto t = recorded();
    return IssueExtractor(fetch_issue(fixtures::kFixIssueUrl, *t));
}

auto names(const std::vector<Author>& authors) -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (auto const& a: authors)
        out.push_back(a.tracker_username.value_or(a.name));
    return out;
}

/// Replays a fixed sequence of responses, then 404s.
class SequenceTransport final: public HttpTransport
{
  public:
    explicit SequenceTransport(std::deque<HttpResponse> responses): _responses(std::move(responses)) {}
    auto send(const HttpRequest& request) -> HttpResponse override
    {
        urls.push_back(request.url);
        if (_responses.empty())
            return { 404, "{}", {} };
        auto r = _responses.front();
        _responses.pop_front();
        return r;
    }
    std::vector<std::string> urls;

  private:
    std::deque<HttpResponse> _responses;
};

auto issue_json(const nlohmann::json& closed_at, const nlohmann::json& body) -> std::string
{
    return nlohmann::json { { "number", 9 },
                            { "title", "t" },
                            { "body", body },
                            { "user", { { "login", "zed" } } },
                            { "created_at", "2024-01-01T00:00:00Z" },
                            { "closed_at", closed_at },
                            { "comments", 0 } }
        .dump();
}

auto no_sleep() -> RetryPolicy
{
    return testing_support::no_sleep_retry(5);
}
} // namespace

TEST(IssueLocator, ParsesGithubAndJiraUrls)
{
    auto gh = IssueLocator::parse("https://github.com/example/fixture/issues/42");
    EXPECT_EQ(gh.platform, Platform::github);
    EXPECT_EQ(gh.owner, "example");
    EXPECT_EQ(gh.repo, "fixture");
    EXPECT_EQ(gh.key, "42");
    EXPECT_EQ(gh.issue_endpoint(), "https://api.github.com/repos/example/fixture/issues/42");

    auto jira = IssueLocator::parse("https://issues.apache.org/jira/browse/CALCITE-1234");
    EXPECT_EQ(jira.platform, Platform::jira);
    EXPECT_EQ(jira.api_base, "https://issues.apache.org/jira");
    EXPECT_EQ(jira.key, "CALCITE-1234");
}

TEST(IssueLocator, RejectsOtherUrls)
{
    EXPECT_THROW((void) IssueLocator::parse("https://example.com/foo"), SetupError);
    EXPECT_THROW((void) IssueLocator::parse("https://github.com/example/fixture/pull/42"), SetupError);
    EXPECT_THROW((void) IssueLocator::parse(""), SetupError);
}

TEST(IssueExtractor, GithubIssueFields)
{
    auto x = fix_issue();
    EXPECT_EQ(x.issue_title(), "Port parsing fails on padded input");
    EXPECT_NE(x.issue_description().find("8080"), std::string::npos);
    EXPECT_EQ(x.issue_created_at(), "2024-03-10T09:00:00Z");
    EXPECT_EQ(x.issue_closed_at(), "2024-03-20T17:00:00Z");
    EXPECT_EQ(x.issue_author().tracker_username, "dana");
    EXPECT_EQ(x.issue_comments(Pagination {}).size(), 3u);
}

TEST(IssueExtractor, JiraIssueHasClosedAt)
{
    auto t = recorded();
    IssueExtractor x(fetch_issue(fixtures::kFixJiraUrl, *t));
    EXPECT_EQ(x.snapshot().platform, Platform::jira);
    EXPECT_EQ(x.issue_title(), "Project has no README");
    EXPECT_EQ(x.issue_closed_at(), "2024-03-12T15:00:00Z");
    EXPECT_EQ(x.issue_author().tracker_username, "carol");
    ASSERT_EQ(x.issue_comments(Pagination {}).size(), 1u);
    EXPECT_EQ(x.issue_comments(Pagination {})[0].author.tracker_username, "alice");
}

TEST(IssueExtractor, UnrecognizedUrlIsASetupError)
{
    auto t = recorded();
    EXPECT_THROW((void) fetch_issue("https://example.com/foo", *t), SetupError);
}

TEST(IssueExtractor, OpenIssueIsUnresolvedAndEmptyBodyIsEmpty)
{
    SequenceTransport t({ { 200, issue_json(nullptr, nullptr), {} }, { 200, "[]", {} } });
    IssueExtractor x(fetch_issue("https://github.com/o/r/issues/9", t, {}, no_sleep()));
    EXPECT_EQ(x.issue_closed_at(), "unresolved");
    EXPECT_EQ(x.issue_description(), "");
    EXPECT_TRUE(x.issue_comments(Pagination {}).empty());
}

TEST(IssueExtractor, CommentPagination)
{
    auto x = fix_issue();
    auto first = x.issue_comments(Pagination::make(0, 2));
    ASSERT_EQ(first.size(), 2u);
    EXPECT_EQ(first[0].author.tracker_username, "dana");
    EXPECT_EQ(first[1].author.tracker_username, "erik");
    EXPECT_EQ(x.issue_comments(Pagination::make(1, 2)).size(), 1u);
    EXPECT_TRUE(x.issue_comments(Pagination::make(9, 2)).empty());
}

TEST(IssueExtractor, ParticipantsAreDeduplicated)
{
    EXPECT_EQ(names(fix_issue().issue_participants()), (std::vector<std::string> { "dana", "erik" }));
}

TEST(IssueExtractor, NoNetworkAfterTheFetch)
{
    auto counting = std::make_shared<CountingTransport>(recorded());
    IssueExtractor x(fetch_issue(fixtures::kFixIssueUrl, *counting));
    auto const after_fetch = counting->count();
    EXPECT_GE(after_fetch, 2u);
    SchemaRegistry r(x.bindings());
    for (auto const& name: r.names())
        (void) r.route({ "c", name, nlohmann::json::object() });
    EXPECT_EQ(counting->count(), after_fetch);
}

TEST(IssueExtractor, RateLimitedResponsesAreRetried)
{
    int sleeps = 0;
    auto retry = no_sleep();
    retry.sleep = [&](std::chrono::milliseconds) { ++sleeps; };
    SequenceTransport t({ { 429, "", {} },
                          { 403, "", { { "x-ratelimit-remaining", "0" } } },
                          { 200, issue_json("2024-01-02T00:00:00Z", "b"), {} },
                          { 200, "[]", {} } });
    IssueExtractor x(fetch_issue("https://github.com/o/r/issues/9", t, {}, retry));
    EXPECT_EQ(x.issue_title(), "t");
    EXPECT_EQ(sleeps, 2);
}

TEST(IssueExtractor, PersistentRateLimitIsASetupError)
{
    std::deque<HttpResponse> limited(10, HttpResponse { 429, "", {} });
    SequenceTransport t(limited);
    EXPECT_THROW((void) fetch_issue("https://github.com/o/r/issues/9", t, {}, no_sleep()), SetupError);
    EXPECT_EQ(t.urls.size(), 5u);
}

TEST(IssueExtractor, MissingIssueIsIssueNotFound)
{
    auto t = recorded();
    EXPECT_THROW((void) fetch_issue("https://github.com/example/fixture/issues/999", *t), IssueNotFound);
}

TEST(IssueExtractor, TokenTravelsInAHeader)
{
    struct Capture final: HttpTransport
    {
        std::vector<HttpRequest> seen;
        auto send(const HttpRequest& r) -> HttpResponse override
        {
            seen.push_back(r);
            return seen.size() == 1 ? HttpResponse { 200, issue_json(nullptr, "b"), {} } : HttpResponse { 200, "[]", {} };
        }
    } t;
    TrackerCredentials creds;
    creds.github_token = "sekrit";
    (void) fetch_issue("https://github.com/o/r/issues/9", t, creds, no_sleep());
    ASSERT_FALSE(t.seen.empty());
    bool found = false;
    for (auto const& [k, v]: t.seen[0].headers)
        found |= k == "Authorization" && v == "Bearer sekrit";
    EXPECT_TRUE(found);
    EXPECT_EQ(t.seen[0].url.find("sekrit"), std::string::npos);
}

TEST(IssueExtractor, ToolsRenderThroughTheRegistry)
{
    auto const x = fix_issue();
    SchemaRegistry r(x.bindings());
    EXPECT_EQ(r.size(), 7u);
    auto comments = r.route({ "c", "issue_comments", { { "page_size", 1 } } });
    EXPECT_FALSE(comments.is_error) << comments.payload;
    EXPECT_NE(comments.payload.find("Seen on the feat branch"), std::string::npos);
    EXPECT_EQ(comments.payload.find("Probably needs a trim"), std::string::npos);
}
