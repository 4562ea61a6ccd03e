// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/eval_harness.hpp>

#include <gtest/gtest.h>

#include <fmt/format.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace issuelink;
using testing_support::shared;

namespace
{
auto h(char c) -> CommitHash
{
    return *CommitHash::parse(std::string(40, c));
}

auto fix_times() -> CommitTimeResolver
{
    auto repo = GitRepository::open(shared().fix.dir);
    auto history = std::make_shared<UnifiedHistory>(UnifiedHistory::load(repo));
    return [history](const std::string&, const CommitHash& hash) -> std::optional<UnixTime> {
        if (auto const* c = history->find(hash))
            return c->commit_time;
        return std::nullopt;
    };
}

auto fix_dataset() -> Dataset
{
    auto const& fx = shared().fix;
    return parse_dataset(fmt::format("fix-42\t{}\tfixture\t{};{}\n"
                                     "fix-43\t{}\tfixture\t{}\n"
                                     "FIX-7\t{}\tfixture\t{}\n",
                                     fixtures::kFixIssueUrl, fx.c1.str(), fx.c3.str(),
                                     fixtures::kFixSecondIssueUrl, fx.c3.str(),
                                     fixtures::kFixJiraUrl, fx.c2.str()));
}

using Policy = std::function<std::string(const GroundTruthRecord&, int run)>;

auto eval_config(Policy policy, int runs = 3) -> EvalConfig
{
    EvalConfig c;
    c.runs = runs;
    c.session.clock = std::make_shared<FixedClock>(1'735'689'600.0);
    c.session.retry = testing_support::no_sleep_retry();
    c.transport = std::make_shared<RecordedTransport>(shared().recordings);
    c.repo_source = [](const std::string&) { return shared().fix.dir.string(); };
    c.backend_factory = [policy](const GroundTruthRecord& r, int run) -> std::unique_ptr<ChatBackend> {
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_text(policy(r, run)));
    };
    return c;
}

auto oracle(const GroundTruthRecord& r, int) -> std::string
{
    return fmt::format("finish {{\"commit_hash\": \"{}\"}}", r.resolving_commit.str());
}
} // namespace

TEST(GroundTruth, PicksTheLatestLink)
{
    auto const& fx = shared().fix;
    auto adjusted = adjust_ground_truth(fix_dataset().records, fix_times());
    ASSERT_EQ(adjusted.records.size(), 3u);
    EXPECT_EQ(adjusted.records[0].resolving_commit, fx.c3);
    EXPECT_EQ(adjusted.records[1].resolving_commit, fx.c3);
    EXPECT_EQ(adjusted.records[2].resolving_commit, fx.c2);
}

TEST(GroundTruth, EqualTimesPreferTheLargerHash)
{
    auto resolver = [](const std::string&, const CommitHash&) -> std::optional<UnixTime> { return 100; };
    auto adjusted = adjust_ground_truth({ { "i", "u", "r", { h('a'), h('c'), h('b') } } }, resolver);
    ASSERT_EQ(adjusted.records.size(), 1u);
    EXPECT_EQ(adjusted.records[0].resolving_commit, h('c'));
}

TEST(GroundTruth, UnresolvableLinksExcludeTheIssue)
{
    auto adjusted = adjust_ground_truth({ { "i", "u", "fixture", { shared().fix.c1, h('e') } } }, fix_times());
    EXPECT_TRUE(adjusted.records.empty());
    EXPECT_EQ(adjusted.excluded, std::vector<std::string> { "i" });
    EXPECT_FALSE(adjusted.warnings.empty());
}

TEST(GroundTruth, IsIdempotentAndOrderInvariant)
{
    auto const resolve = fix_times();
    auto const& fx = shared().fix;
    std::vector<CommitHash> links { fx.c1, fx.c2, fx.c3, fx.c4 };
    auto const expected = adjust_ground_truth({ { "i", "u", "r", links } }, resolve).records.at(0).resolving_commit;
    EXPECT_EQ(expected, fx.c4);
    std::mt19937 rng(7);
    for (int i = 0; i < 20; ++i)
    {
        std::shuffle(links.begin(), links.end(), rng);
        EXPECT_EQ(adjust_ground_truth({ { "i", "u", "r", links } }, resolve).records.at(0).resolving_commit, expected);
    }
    auto again = adjust_ground_truth({ { "i", "u", "r", { expected } } }, resolve);
    EXPECT_EQ(again.records.at(0).resolving_commit, expected);
}

TEST(HitAtK, IndicatorOverThePrefix)
{
    std::vector<std::string> ranked { "a", "b", "c", "d", "e", "f", "t" };
    EXPECT_EQ(hit_at_k({ "t" }, "t", 1), 1);
    EXPECT_EQ(hit_at_k(ranked, "t", 10), 1);
    EXPECT_EQ(hit_at_k(ranked, "t", 7), 1);
    EXPECT_EQ(hit_at_k(ranked, "t", 6), 0);
    EXPECT_EQ(hit_at_k(ranked, "t", 1), 0);
    EXPECT_EQ(hit_at_k({}, "t", 1), 0);
    EXPECT_THROW((void) hit_at_k(ranked, "t", 0), std::invalid_argument);
}

TEST(HitAtK, MeanOverQueries)
{
    std::vector<RankedQuery> q { { { "x" }, "x" }, { { "y" }, "y" }, { { "z" }, "z" }, { { "w" }, "v" } };
    EXPECT_DOUBLE_EQ(mean_hit_at_k(q, 1), 0.75);
    EXPECT_DOUBLE_EQ(mean_hit_at_k({}, 1), 0.0);
}

TEST(HitAtK, SingleAnswerRate)
{
    std::vector<std::optional<CommitHash>> answers { h('a'), std::nullopt, h('c'), h('0') };
    EXPECT_DOUBLE_EQ(single_answer_hit_rate(answers, { h('a'), h('b'), h('c'), h('d') }), 0.5);
}

TEST(Dataset, SkipsMalformedLinesWithWarnings)
{
    auto d = parse_dataset("# header\n"
                           "\n"
                           "ok\thttps://github.com/o/r/issues/1\trepo\t" + std::string(40, 'a') + "\n"
                           "too\tfew\tfields\n"
                           "bad\turl\trepo\tnot-a-hash\n"
                           "empty\turl\trepo\t\n"
                           "ok\thttps://github.com/o/r/issues/2\trepo\t" + std::string(40, 'b') + "\n");
    ASSERT_EQ(d.records.size(), 1u);
    EXPECT_EQ(d.records[0].issue_id, "ok");
    EXPECT_EQ(d.warnings.size(), 4u);
    EXPECT_NE(d.warnings[0].find("line 4"), std::string::npos);
}

TEST(Dataset, LoadFailureIsASetupError)
{
    EXPECT_THROW((void) load_dataset("/nonexistent/dataset.tsv"), SetupError);
}

TEST(Dataset, EalinkCsvGroupsLinksPerIssue)
{
    auto d = parse_ealink_csv("issue_key,commit_hash,label\n"
                              "CAL-1," + std::string(40, 'a') + ",1\n"
                              "CAL-2," + std::string(40, 'b') + ",1\n"
                              "CAL-1," + std::string(40, 'c') + ",1\n",
                              "calcite",
                              "https://issues.apache.org/jira/browse/{issue_id}");
    ASSERT_EQ(d.records.size(), 2u);
    EXPECT_EQ(d.records[0].issue_id, "CAL-1");
    EXPECT_EQ(d.records[0].issue_url, "https://issues.apache.org/jira/browse/CAL-1");
    EXPECT_EQ(d.records[0].repo_id, "calcite");
    EXPECT_EQ(d.records[0].true_links.size(), 2u);
    EXPECT_THROW((void) parse_ealink_csv("a,b\n1,2\n", "r", "{issue_id}"), SetupError);
}

TEST(RunEval, OracleBackendScoresOne)
{
    auto report = run_eval(fix_dataset(), eval_config(oracle));
    EXPECT_EQ(report.overall_per_run, (std::vector<double> { 1.0, 1.0, 1.0 }));
    EXPECT_DOUBLE_EQ(report.overall_mean, 1.0);
    EXPECT_EQ(report.projects, std::vector<std::string> { "fixture" });
    EXPECT_EQ(report.issues_per_project.at("fixture"), 3u);
    EXPECT_EQ(report.finished, 9u);
    EXPECT_EQ(report.sessions.size(), 9u);
    ASSERT_TRUE(report.metrics);
    EXPECT_EQ(report.metrics->sessions, 9u);
}

TEST(RunEval, GivingUpScoresZero)
{
    auto report = run_eval(fix_dataset(), eval_config([](auto const&, int) { return std::string("give_up"); }, 2));
    EXPECT_EQ(report.overall_per_run, (std::vector<double> { 0.0, 0.0 }));
    EXPECT_EQ(report.gave_up, 6u);
}

TEST(RunEval, HalfCorrectScoresHalf)
{
    auto d = fix_dataset();
    d.records.pop_back();
    auto report = run_eval(d, eval_config([](const GroundTruthRecord& r, int) {
        return r.source.issue_id == "fix-42" ? oracle(r, 0) : std::string("give_up");
    }));
    EXPECT_DOUBLE_EQ(report.overall_mean, 0.5);
    EXPECT_EQ(report.hit_at_1_mean.at("fixture"), 0.5);
}

TEST(RunEval, RunsAreIndependentAndParallelAgrees)
{
    auto policy = [](const GroundTruthRecord& r, int run) { return run == 2 ? std::string("give_up") : oracle(r, run); };
    auto serial = run_eval(fix_dataset(), eval_config(policy));
    auto cfg = eval_config(policy);
    cfg.parallel = 4;
    auto parallel = run_eval(fix_dataset(), cfg);
    EXPECT_EQ(serial.overall_per_run, (std::vector<double> { 1.0, 0.0, 1.0 }));
    EXPECT_EQ(parallel.overall_per_run, serial.overall_per_run);
    EXPECT_NEAR(serial.overall_mean, 2.0 / 3.0, 1e-12);
    for (std::size_t i = 0; i < serial.sessions.size(); ++i)
    {
        EXPECT_EQ(serial.sessions[i].issue_id, parallel.sessions[i].issue_id);
        EXPECT_EQ(serial.sessions[i].run, parallel.sessions[i].run);
    }
}

TEST(RunEval, FailuresAreMissesWithAReason)
{
    auto d = fix_dataset();
    d.records.push_back({ "missing", "https://github.com/example/fixture/issues/404", "fixture", { shared().fix.c1 } });
    auto report = run_eval(d, eval_config(oracle, 1));
    EXPECT_EQ(report.failed, 1u);
    EXPECT_NEAR(report.overall_mean, 0.75, 1e-12);
    auto it = std::find_if(report.sessions.begin(), report.sessions.end(), [](auto const& s) { return s.issue_id == "missing"; });
    ASSERT_NE(it, report.sessions.end());
    EXPECT_FALSE(it->error.empty());
    EXPECT_FALSE(it->hit);
}

TEST(RunEval, WritersProduceOneLinePerSession)
{
    auto report = run_eval(fix_dataset(), eval_config(oracle, 1));
    std::ostringstream records, metrics, table;
    write_report_records(records, report);
    write_session_metrics(metrics, report);
    write_report_table(table, report);
    auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
    EXPECT_EQ(count(records.str()), 4);
    EXPECT_EQ(count(metrics.str()), 3);
    EXPECT_NE(table.str().find("fixture"), std::string::npos);
    std::istringstream in(records.str());
    std::string line;
    while (std::getline(in, line))
        EXPECT_NO_THROW((void) nlohmann::json::parse(line));
}

TEST(LinkRecord, RoundTripsThroughJson)
{
    LinkRecord r;
    r.issue = "https://github.com/o/r/issues/1";
    r.outcome = SessionOutcome::Kind::finished;
    r.commit = std::string(40, 'a');
    r.iterations = 3;
    r.tokens = 1234;
    r.context_tokens = 900;
    r.wall_time_s = 1.5;
    auto j = to_json(r);
    std::vector<std::string> keys;
    for (auto const& [k, v]: j.items())
        keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string> { "issue", "outcome", "commit", "reason", "iterations", "tokens",
                                                "context_tokens", "wall_time_s" }));
    EXPECT_EQ(link_record_from_json(nlohmann::json::parse(j.dump())), r);
}

TEST(CallLog, WritesOneObjectPerCall)
{
    auto r = testing_support::run_scripted("issue_title\nlist_authors\ngive_up\n");
    std::ostringstream out;
    write_call_log(out, r.state.call_log);
    std::istringstream in(out.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line))
    {
        auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("context_tokens_before"));
        EXPECT_TRUE(j.contains("context_tokens_after"));
        ++n;
    }
    EXPECT_EQ(n, 3);
}
