// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/metrics.hpp>

#include <gtest/gtest.h>

#include <fmt/format.h>

#include <algorithm>
#include <sstream>

using namespace issuelink;

namespace
{
auto entry(std::string name) -> CallLogEntry
{
    CallLogEntry e;
    e.call.name = std::move(name);
    return e;
}
} // namespace

TEST(Record, CountsEveryCall)
{
    TokenLedger ledger;
    ledger.add_consumed(1000);
    auto m = record({ entry("issue_title"), entry("issue_title"), entry("finish") }, ledger, 2.5);
    EXPECT_EQ(m.call_counts, (std::map<std::string, int> { { "issue_title", 2 }, { "finish", 1 } }));
    EXPECT_EQ(m.call_sequence, (std::vector<std::string> { "issue_title", "issue_title", "finish" }));
    EXPECT_EQ(m.total_tokens, 1000);
    EXPECT_DOUBLE_EQ(m.wall_time_s, 2.5);
    EXPECT_DOUBLE_EQ(m.estimated_cost, 1000 * kDefaultPricePerToken);
}

TEST(Record, DefaultPriceReproducesTheReferenceCost)
{
    // 115,296 tokens cost 0.0101 USD in the reference measurements.
    TokenLedger ledger;
    ledger.add_consumed(115'296);
    auto m = record({}, ledger, 0);
    EXPECT_NEAR(m.estimated_cost, 0.0101, 0.00005);
}

TEST(Record, EmptyLogIsAllZero)
{
    auto m = record({}, TokenLedger {}, 0);
    EXPECT_TRUE(m.call_counts.empty());
    EXPECT_EQ(m.total_tokens, 0);
    EXPECT_EQ(m.estimated_cost, 0);
}

TEST(Median, EvenAndOddCounts)
{
    EXPECT_DOUBLE_EQ(median({ 9.98, 29.13 }), 19.555);
    EXPECT_DOUBLE_EQ(median({ 3, 1, 2 }), 2);
    EXPECT_DOUBLE_EQ(median({ 5 }), 5);
    EXPECT_DOUBLE_EQ(median({}), 0.0);
}

TEST(Aggregate, MeanCallsCountMissingFunctionsAsZero)
{
    SessionMetrics a, b;
    a.call_counts = { { "issue_title", 1 } };
    b.call_counts = { { "issue_title", 2 }, { "list_commits", 1 } };
    auto agg = aggregate({ a, b });
    EXPECT_EQ(agg.sessions, 2u);
    EXPECT_DOUBLE_EQ(agg.mean_calls.at("issue_title"), 1.5);
    EXPECT_DOUBLE_EQ(agg.mean_calls.at("list_commits"), 0.5);
    EXPECT_THROW((void) aggregate({}), std::invalid_argument);
}

TEST(Aggregate, MatchesAHandComputedOracleOverScriptedSessions)
{
    auto const& fx = testing_support::shared().fix;
    std::vector<std::string> const scripts {
        "issue_title\ngive_up\n",
        "issue_title\nlist_authors\nissue_title\n" + fmt::format("finish {{\"commit_hash\": \"{}\"}}\n", fx.c3.str()),
        "list_commits\nlist_files {\"pattern\": \"**\"}\ngive_up\n",
    };
    std::vector<SessionMetrics> metrics;
    std::vector<double> tokens;
    std::map<std::string, double> counts;
    for (auto const& s: scripts)
    {
        auto r = testing_support::run_scripted(s);
        metrics.push_back(record(r.state.call_log, r.state.ledger, r.wall_time_s));
        tokens.push_back(static_cast<double>(r.state.ledger.consumed_total()));
        for (auto const& e: r.state.call_log)
            counts[e.call.name] += 1.0 / 3.0;
    }
    auto agg = aggregate(metrics);
    std::sort(tokens.begin(), tokens.end());
    EXPECT_DOUBLE_EQ(agg.median_tokens, tokens[1]);
    EXPECT_DOUBLE_EQ(agg.median_cost, tokens[1] * kDefaultPricePerToken);
    EXPECT_DOUBLE_EQ(agg.median_wall_time_s, 0.0);
    ASSERT_EQ(agg.mean_calls.size(), counts.size());
    for (auto const& [name, mean]: counts)
        EXPECT_NEAR(agg.mean_calls.at(name), mean, 1e-12) << name;
    EXPECT_NEAR(agg.mean_calls.at("issue_title"), 1.0, 1e-12);
}

TEST(Record, MeasuringDoesNotChangeTheSession)
{
    auto const script = "issue_title\nlist_authors\ngive_up\n";
    auto a = testing_support::run_scripted(script);
    auto b = testing_support::run_scripted(script);
    (void) record(b.state.call_log, b.state.ledger, b.wall_time_s);
    EXPECT_EQ(a.outcome.kind, b.outcome.kind);
    EXPECT_EQ(a.state.iteration, b.state.iteration);
    EXPECT_EQ(a.state.ledger.consumed_total(), b.state.ledger.consumed_total());
    ASSERT_EQ(a.state.history.size(), b.state.history.size());
    for (std::size_t i = 0; i < a.state.history.size(); ++i)
        EXPECT_EQ(a.state.history[i].content, b.state.history[i].content);
}

TEST(MetricsJson, RoundTrips)
{
    SessionMetrics m;
    m.call_counts = { { "finish", 1 } };
    m.call_sequence = { "finish" };
    m.wall_time_s = 1.25;
    m.total_tokens = 42;
    m.estimated_cost = 42 * kDefaultPricePerToken;
    EXPECT_EQ(session_metrics_from_json(nlohmann::json::parse(to_json(m).dump())), m);

    std::ostringstream out;
    write_metrics_line(out, m, { { "issue", "x" }, { "run", 1 } });
    auto const line = out.str();
    EXPECT_EQ(line.back(), '\n');
    EXPECT_EQ(line.find("{\"issue\":\"x\",\"run\":1,"), 0u);
    EXPECT_EQ(session_metrics_from_json(nlohmann::json::parse(line)), m);
}
