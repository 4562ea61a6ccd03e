// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/eval_harness.hpp>
#include <issuelink/process.hpp>

#include <gtest/gtest.h>

#include <fmt/format.h>

#include <algorithm>
#include <fstream>

using namespace issuelink;
using testing_support::read_text;
using testing_support::TempDir;

namespace
{
struct CliFixtures
{
    TempDir dir { "issuelink-cli" };
    nlohmann::json paths;
};

auto cli(std::vector<std::string> args, const EnvOverrides& env = {}) -> ProcessResult
{
    args.insert(args.begin(), ISSUELINK_CLI_PATH);
    return run_process(args, {}, env);
}

auto fx() -> const CliFixtures&
{
    static auto const f = [] {
        auto c = std::make_unique<CliFixtures>();
        auto r = cli({ "fixtures", "--out", (c->dir.path() / "set").string() });
        if (!r.ok())
            throw std::runtime_error("fixtures failed: " + r.err);
        c->paths = nlohmann::json::parse(r.out);
        return c;
    }();
    return *f;
}

auto root() -> std::filesystem::path
{
    return fx().dir.path() / "set";
}

auto link_args(const std::string& script, const std::string& issue = std::string(fixtures::kFixIssueUrl))
    -> std::vector<std::string>
{
    return { "link", "--issue", issue, "--repo", (root() / "repos" / "fixture").string(), "--backend", "scripted",
             "--script", (root() / "scripts" / script).string(), "--recordings", (root() / "recordings").string(),
             "--clock", "fixed" };
}
} // namespace

TEST(Cli, FixturesReportsStableHashes)
{
    auto const& p = fx().paths;
    EXPECT_EQ(p["fixture"]["C4"], "42d79db6f1359be5ea8b1b3d107bafe3e1104daf");
    EXPECT_EQ(p["fixture"]["C1"], "26269c78b96e01c2a6265a1953a1a7bfc97b98f6");
}

TEST(Cli, LinkFinishedExitsZeroAndPrintsARecord)
{
    auto r = cli(link_args("finish_c4.script"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    auto record = link_record_from_json(nlohmann::json::parse(r.out));
    EXPECT_EQ(record.outcome, SessionOutcome::Kind::finished);
    EXPECT_EQ(record.commit, "42d79db6f1359be5ea8b1b3d107bafe3e1104daf");
    EXPECT_EQ(record.iterations, 3);
    EXPECT_EQ(record.issue, fixtures::kFixIssueUrl);
    EXPECT_EQ(record.wall_time_s, 0.0);
}

TEST(Cli, LinkGaveUpExitsTwo)
{
    auto r = cli(link_args("give_up.script"));
    EXPECT_EQ(r.exit_code, 2) << r.err;
    EXPECT_EQ(link_record_from_json(nlohmann::json::parse(r.out)).outcome, SessionOutcome::Kind::gave_up);
}

TEST(Cli, LinkExhaustedExitsThree)
{
    auto args = link_args("explore.script");
    args.insert(args.end(), { "--max-iterations", "2" });
    auto r = cli(args);
    EXPECT_EQ(r.exit_code, 3) << r.err;
    auto record = link_record_from_json(nlohmann::json::parse(r.out));
    EXPECT_EQ(record.reason, "iterations");
    EXPECT_EQ(record.iterations, 2);
}

TEST(Cli, UsageErrorsExitSixtyFour)
{
    EXPECT_EQ(cli({ "link", "--repo", "." }).exit_code, 64);
    EXPECT_EQ(cli({ "bogus" }).exit_code, 64);
    auto args = link_args("give_up.script");
    args.insert(args.end(), { "--max-iterations", "0" });
    EXPECT_EQ(cli(args).exit_code, 64);
}

TEST(Cli, SecretsAreNotAcceptedAsFlags)
{
    auto args = link_args("give_up.script");
    args.insert(args.end(), { "--api-key", "sk-test" });
    EXPECT_EQ(cli(args).exit_code, 64);
}

TEST(Cli, LiveBackendWithoutAKeyIsASetupError)
{
    auto r = cli({ "link", "--issue", std::string(fixtures::kFixIssueUrl), "--repo", (root() / "repos" / "fixture").string(),
                   "--recordings", (root() / "recordings").string() },
                 { { "OPENAI_API_KEY", "" } });
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("OPENAI_API_KEY"), std::string::npos);
}

TEST(Cli, SetupErrorsExitOne)
{
    auto args = link_args("give_up.script", "https://github.com/example/fixture/issues/999");
    EXPECT_EQ(cli(args).exit_code, 1);
    args = link_args("give_up.script");
    args[4] = "/nonexistent/repo";
    EXPECT_EQ(cli(args).exit_code, 1);
}

TEST(Cli, LinkWritesOutputFiles)
{
    TempDir out;
    auto args = link_args("finish_c4.script");
    args.insert(args.end(), { "--out", (out.path() / "rec.json").string(), "--call-log", (out.path() / "calls.jsonl").string(),
                              "--metrics", (out.path() / "metrics.json").string() });
    auto r = cli(args);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(read_text(out.path() / "rec.json")), nlohmann::json::parse(r.out));
    auto calls = read_text(out.path() / "calls.jsonl");
    EXPECT_EQ(std::count(calls.begin(), calls.end(), '\n'), 3);
    auto m = session_metrics_from_json(nlohmann::json::parse(read_text(out.path() / "metrics.json")));
    EXPECT_EQ(m.call_counts.at("finish"), 1);
}

TEST(Cli, EvalWithTheOracleScriptScoresOne)
{
    TempDir out;
    auto r = cli({ "eval", "--dataset", (root() / "dataset.tsv").string(), "--repo-root", (root() / "repos").string(),
                   "--recordings", (root() / "recordings").string(), "--backend", "scripted", "--script",
                   (root() / "scripts" / "oracle.script").string(), "--clock", "fixed", "--records",
                   (out.path() / "records.jsonl").string() });
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("1.000"), std::string::npos) << r.out;
    auto records = read_text(out.path() / "records.jsonl");
    auto const last = records.substr(records.rfind('\n', records.size() - 2) + 1);
    auto summary = nlohmann::json::parse(last);
    EXPECT_DOUBLE_EQ(summary["overall_mean"].get<double>(), 1.0);
}

TEST(Cli, EvalSingleRunAndSkippedLines)
{
    TempDir out;
    auto dataset = read_text(root() / "dataset.tsv") + "broken line\n";
    {
        std::ofstream f(out.path() / "data.tsv");
        f << dataset;
    }
    auto r = cli({ "eval", "--dataset", (out.path() / "data.tsv").string(), "--repo-root", (root() / "repos").string(),
                   "--recordings", (root() / "recordings").string(), "--backend", "scripted", "--script",
                   (root() / "scripts" / "give_up.script").string(), "--clock", "fixed", "--runs", "1", "--records",
                   (out.path() / "records.jsonl").string() });
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("line 6: expected 4 tab-separated fields, found 1; skipped"), std::string::npos) << r.out;
    auto records = read_text(out.path() / "records.jsonl");
    EXPECT_EQ(std::count(records.begin(), records.end(), '\n'), 5);
}

TEST(Cli, EvalWithAMissingDatasetExitsOne)
{
    EXPECT_EQ(cli({ "eval", "--dataset", "/nonexistent.tsv" }).exit_code, 1);
}
