// SPDX-License-Identifier: Apache-2.0
//
// issuelink: link an issue to the commit that resolved it.
//
//   issuelink link --issue URL --repo PATH|URL [options]
//   issuelink eval --dataset FILE [options]
//   issuelink fixtures --out DIR

#include <issuelink/backends.hpp>
#include <issuelink/eval_harness.hpp>
#include <issuelink/fixtures.hpp>
#include <issuelink/metrics.hpp>
#include <issuelink/orchestrator.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace issuelink;

namespace
{

constexpr int kExitFinished = 0;
constexpr int kExitSetup = 1;
constexpr int kExitGaveUp = 2;
constexpr int kExitExhausted = 3;
constexpr int kExitSessionsFailed = 4;
constexpr int kExitUsage = 64;

class UsageError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

auto exit_code_for(SessionOutcome::Kind kind) -> int
{
    switch (kind)
    {
        case SessionOutcome::Kind::finished: return kExitFinished;
        case SessionOutcome::Kind::gave_up: return kExitGaveUp;
        case SessionOutcome::Kind::budget_exhausted: return kExitExhausted;
    }
    return kExitSetup;
}

/// Flags shared by `link` and `eval`.
struct CommonOptions
{
    int max_iterations = Budgets {}.max_iterations;
    std::int64_t max_tokens = Budgets {}.max_total_tokens;
    std::size_t feedback_threshold = Budgets {}.feedback_threshold_bytes;
    std::string model = MiddlewareConfig {}.model;
    std::string backend = "live";
    std::string script;
    std::vector<std::string> vars;
    int page_size = Pagination::kDefaultPageSize;
    std::string recordings;
    std::string clock = "system";
    std::string fixed_time = "2025-01-01T00:00:00Z";
    std::string cache_dir;
    double price = kDefaultPricePerToken;

    void add_to(CLI::App& app)
    {
        app.add_option("--max-iterations", max_iterations, "assistant turns per session")->capture_default_str();
        app.add_option("--max-tokens", max_tokens, "estimated tokens per session")->capture_default_str();
        app.add_option("--feedback-threshold-bytes", feedback_threshold, "result size that triggers a feedback request")
            ->capture_default_str();
        app.add_option("--model", model, "chat model id")->capture_default_str();
        app.add_option("--backend", backend, "live or scripted")
            ->check(CLI::IsMember({ "live", "scripted" }))
            ->capture_default_str();
        app.add_option("--script", script, "session script for the scripted backend")->check(CLI::ExistingFile);
        app.add_option("--var", vars, "script variable NAME=VALUE (repeatable)");
        app.add_option("--page-size", page_size, "default page size of paginated functions")
            ->check(CLI::Range(1, Pagination::kMaxPageSize))
            ->capture_default_str();
        app.add_option("--recordings", recordings, "serve tracker requests from recorded responses in DIR")
            ->check(CLI::ExistingDirectory);
        app.add_option("--clock", clock, "system, or fixed for reproducible records")
            ->check(CLI::IsMember({ "system", "fixed" }))
            ->capture_default_str();
        app.add_option("--fixed-time", fixed_time, "the instant used by --clock fixed")->capture_default_str();
        app.add_option("--cache-dir", cache_dir, "where remote repositories are cloned");
        app.add_option("--price", price, "USD per token for cost estimates")->capture_default_str();
    }

    [[nodiscard]] auto budgets() const -> Budgets
    {
        Budgets b { max_iterations, max_tokens, feedback_threshold };
        try
        {
            b.validate();
        }
        catch (SetupError const& e)
        {
            throw UsageError(e.what());
        }
        return b;
    }

    [[nodiscard]] auto make_clock() const -> std::shared_ptr<const Clock>
    {
        if (clock == "system")
            return std::make_shared<SystemClock>();
        auto const t = parse_timestamp(fixed_time);
        if (!t)
            throw UsageError(fmt::format("--fixed-time '{}' is not an ISO-8601 timestamp", fixed_time));
        return std::make_shared<FixedClock>(static_cast<double>(*t));
    }

    [[nodiscard]] auto session_config() const -> SessionConfig
    {
        SessionConfig c;
        c.budgets = budgets();
        c.model = model;
        c.page_size = page_size;
        c.clock = make_clock();
        return c;
    }

    [[nodiscard]] auto transport() const -> std::shared_ptr<HttpTransport>
    {
        if (!recordings.empty())
            return std::make_shared<RecordedTransport>(recordings);
        return std::make_shared<NetworkTransport>();
    }

    [[nodiscard]] auto cache_path() const -> fs::path
    {
        if (!cache_dir.empty())
            return cache_dir;
        if (auto const* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
            return fs::path(xdg) / "issuelink";
        if (auto const* home = std::getenv("HOME"); home && *home)
            return fs::path(home) / ".cache" / "issuelink";
        return fs::temp_directory_path() / "issuelink-cache";
    }

    [[nodiscard]] auto variables() const -> ScriptedBackend::Variables
    {
        ScriptedBackend::Variables out;
        for (auto const& v: vars)
        {
            auto const eq = v.find('=');
            if (eq == std::string::npos || eq == 0)
                throw UsageError(fmt::format("--var '{}' is not NAME=VALUE", v));
            out[v.substr(0, eq)] = v.substr(eq + 1);
        }
        return out;
    }

    void check_backend() const
    {
        if (backend == "scripted" && script.empty())
            throw UsageError("--backend scripted needs --script");
    }

    /// A backend for one session. Live backends share `http`.
    [[nodiscard]] auto make_backend(const ScriptedBackend::Variables& extra, const std::shared_ptr<HttpTransport>& http) const
        -> std::unique_ptr<ChatBackend>
    {
        if (backend == "scripted")
        {
            auto vars = variables();
            vars.insert(extra.begin(), extra.end());
            return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(script, vars));
        }
        return std::make_unique<OpenAiBackend>(OpenAiBackend::from_environment(http));
    }
};

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw SetupError(fmt::format("cannot write {}", path));
    out << content;
}

// link ----------------------------------------------------------------------------------------

struct LinkOptions
{
    std::string issue;
    std::string repo;
    std::string out;
    std::string call_log;
    std::string metrics;
};

auto run_link(const CommonOptions& common, const LinkOptions& opts) -> int
{
    common.check_backend();
    auto config = common.session_config();
    auto transport = common.transport();

    // Everything that can fail for setup reasons happens before the first request.
    auto inputs = prepare_session(opts.issue, opts.repo, *transport, common.cache_path(), TrackerCredentials::from_environment());
    auto backend = common.make_backend({ { "ISSUE_URL", opts.issue } }, std::make_shared<NetworkTransport>());

    Session session(std::move(inputs), *backend, config);
    auto const result = session.run();

    auto const line = to_json(LinkRecord::from_session(opts.issue, result)).dump();
    std::cout << line << '\n';
    if (!opts.out.empty())
        write_file(opts.out, line + "\n");
    if (!opts.call_log.empty())
    {
        std::ostringstream log;
        write_call_log(log, result.state.call_log);
        write_file(opts.call_log, log.str());
    }
    if (!opts.metrics.empty())
    {
        std::ostringstream m;
        nlohmann::ordered_json extra { { "issue", opts.issue } };
        write_metrics_line(m, record(result.state.call_log, result.state.ledger, result.wall_time_s, common.price), extra);
        write_file(opts.metrics, m.str());
    }
    return exit_code_for(result.outcome.kind);
}

// eval ----------------------------------------------------------------------------------------

struct EvalOptions
{
    std::string dataset;
    std::string format = "tsv";
    std::string ealink_repo;
    std::string ealink_url_template;
    int runs = 3;
    int parallel = 1;
    std::string repo_root = ".";
    std::string report;
    std::string records;
    std::string metrics;
};

auto run_evaluation(const CommonOptions& common, const EvalOptions& opts) -> int
{
    common.check_backend();
    if (opts.runs < 1)
        throw UsageError("--runs must be at least 1");

    Dataset dataset;
    try
    {
        dataset = opts.format == "ealink" ? load_ealink_csv(opts.dataset, opts.ealink_repo, opts.ealink_url_template)
                                          : load_dataset(opts.dataset);
    }
    catch (SetupError const& e)
    {
        std::cerr << "issuelink: " << e.what() << '\n';
        return kExitSetup;
    }

    EvalConfig config;
    config.session = common.session_config();
    config.runs = opts.runs;
    config.parallel = opts.parallel;
    config.price_per_token = common.price;
    config.cache_dir = common.cache_path();
    config.credentials = TrackerCredentials::from_environment();
    config.transport = common.transport();
    auto const llmHttp = std::make_shared<NetworkTransport>();
    config.repo_source = [root = opts.repo_root](const std::string& repo_id) {
        return GitRepository::looks_like_url(repo_id) ? repo_id : (fs::path(root) / repo_id).string();
    };
    config.backend_factory = [&](const GroundTruthRecord& record, int run) {
        return common.make_backend({ { "ISSUE_ID", record.source.issue_id },
                                     { "ISSUE_URL", record.source.issue_url },
                                     { "RESOLVING_COMMIT", record.resolving_commit.str() },
                                     { "RUN", std::to_string(run) } },
                                   llmHttp);
    };

    auto const report = run_eval(dataset, config);

    std::ostringstream table;
    write_report_table(table, report);
    std::cout << table.str();
    if (!opts.report.empty())
        write_file(opts.report, table.str());
    if (!opts.records.empty())
    {
        std::ostringstream out;
        write_report_records(out, report);
        write_file(opts.records, out.str());
    }
    if (!opts.metrics.empty())
    {
        std::ostringstream out;
        write_session_metrics(out, report);
        write_file(opts.metrics, out.str());
    }
    for (auto const& s: report.sessions)
        if (!s.link)
            std::cerr << fmt::format("issuelink: run {} issue {}: {}\n", s.run, s.issue_id, s.error);
    return report.failed == 0 ? 0 : kExitSessionsFailed;
}

// fixtures --------------------------------------------------------------------------------------

auto run_fixtures(const std::string& out) -> int
{
    auto const set = fixtures::build_fixture_set(out);
    nlohmann::ordered_json j;
    j["root"] = fs::absolute(set.root).string();
    j["dataset"] = fs::absolute(set.dataset).string();
    j["recordings"] = fs::absolute(set.recordings).string();
    j["scripts"] = fs::absolute(set.scripts).string();
    j["fixture"] = { { "repo", fs::absolute(set.fix.dir).string() },
                     { "issue", fixtures::kFixIssueUrl },
                     { "C1", set.fix.c1.str() },
                     { "C2", set.fix.c2.str() },
                     { "C3", set.fix.c3.str() },
                     { "C4", set.fix.c4.str() } };
    j["polyglot"] = { { "repo", fs::absolute(set.polyglot.dir).string() },
                      { "P1", set.polyglot.p1.str() },
                      { "P2", set.polyglot.p2.str() } };
    j["lifespan"] = { { "repo", fs::absolute(set.lifespan.dir).string() }, { "issue", set.lifespan.issue_url } };
    std::cout << j.dump(2) << '\n';
    return 0;
}

} // namespace

auto main(int argc, char** argv) -> int
{
    CLI::App app { "Links an issue report to the commit that resolved it." };
    app.require_subcommand(1);

    CommonOptions linkCommon, evalCommon;
    LinkOptions link;
    auto* linkCmd = app.add_subcommand("link", "link one issue to its resolving commit");
    linkCmd->add_option("--issue", link.issue, "GitHub issue or Jira browse URL")->required();
    linkCmd->add_option("--repo", link.repo, "repository path or clone URL")->required();
    linkCmd->add_option("--out", link.out, "also write the result record to FILE");
    linkCmd->add_option("--call-log", link.call_log, "write the call log (one JSON object per line) to FILE");
    linkCmd->add_option("--metrics", link.metrics, "write the session metrics record to FILE");
    linkCommon.add_to(*linkCmd);

    EvalOptions eval;
    auto* evalCmd = app.add_subcommand("eval", "run sessions over a ground-truth dataset and report Hit@1");
    evalCmd->add_option("--dataset", eval.dataset, "dataset file")->required();
    evalCmd->add_option("--format", eval.format, "tsv, or ealink for a CSV link table")
        ->check(CLI::IsMember({ "tsv", "ealink" }))
        ->capture_default_str();
    evalCmd->add_option("--ealink-repo", eval.ealink_repo, "repo id for every issue of an ealink table");
    evalCmd->add_option("--ealink-url-template", eval.ealink_url_template, "issue URL with {issue_id} placeholder");
    evalCmd->add_option("--runs", eval.runs, "independent passes")->capture_default_str();
    evalCmd->add_option("--parallel", eval.parallel, "concurrent sessions")->check(CLI::Range(1, 64))->capture_default_str();
    evalCmd->add_option("--repo-root", eval.repo_root, "directory holding one repository per repo id")->capture_default_str();
    evalCmd->add_option("--report", eval.report, "write the report table to FILE");
    evalCmd->add_option("--records", eval.records, "write per-session records and a summary line to FILE");
    evalCmd->add_option("--metrics", eval.metrics, "write per-session metrics to FILE");
    evalCommon.add_to(*evalCmd);

    std::string fixturesOut;
    auto* fixturesCmd = app.add_subcommand("fixtures", "build the test repositories, recordings and scripts");
    fixturesCmd->add_option("--out", fixturesOut, "output directory")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::CallForHelp const& e)
    {
        return app.exit(e);
    }
    catch (CLI::CallForAllHelp const& e)
    {
        return app.exit(e);
    }
    catch (CLI::ParseError const& e)
    {
        app.exit(e);
        return kExitUsage;
    }

    try
    {
        if (linkCmd->parsed())
            return run_link(linkCommon, link);
        if (evalCmd->parsed())
            return run_evaluation(evalCommon, eval);
        return run_fixtures(fixturesOut);
    }
    catch (UsageError const& e)
    {
        std::cerr << "issuelink: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }
    catch (std::exception const& e)
    {
        std::cerr << "issuelink: " << e.what() << '\n';
        return kExitSetup;
    }
}
