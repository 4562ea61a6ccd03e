// SPDX-License-Identifier: Apache-2.0
#include <issuelink/eval_harness.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace issuelink
{

using nlohmann::json;
using nlohmann::ordered_json;

namespace
{
    auto trim(std::string_view s) -> std::string_view
    {
        auto const b = s.find_first_not_of(" \t\r\n");
        if (b == std::string_view::npos)
            return {};
        auto const e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    auto split(std::string_view s, char sep) -> std::vector<std::string_view>
    {
        std::vector<std::string_view> parts;
        std::size_t pos = 0;
        while (true)
        {
            auto const next = s.find(sep, pos);
            parts.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
            if (next == std::string_view::npos)
                break;
            pos = next + 1;
        }
        return parts;
    }

    auto read_file(const std::filesystem::path& file) -> std::string
    {
        std::ifstream in(file, std::ios::binary);
        if (!in)
            throw SetupError(fmt::format("cannot read {}", file.string()));
        std::stringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    }

    /// RFC 4180 fields of one line: quoted fields may contain commas and "".
    auto csv_fields(std::string_view line) -> std::vector<std::string>
    {
        std::vector<std::string> fields(1);
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i)
        {
            char const c = line[i];
            if (quoted)
            {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"')
                    fields.back() += '"', ++i;
                else if (c == '"')
                    quoted = false;
                else
                    fields.back() += c;
            }
            else if (c == '"')
                quoted = true;
            else if (c == ',')
                fields.emplace_back();
            else if (c != '\r')
                fields.back() += c;
        }
        return fields;
    }

    auto lower(std::string s) -> std::string
    {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    }
} // namespace

// Dataset loading ----------------------------------------------------------------------

auto parse_dataset(std::string_view text) -> Dataset
{
    Dataset dataset;
    std::set<std::string> seen;
    int lineNo = 0;
    for (auto raw: split(text, '\n'))
    {
        ++lineNo;
        auto const line = trim(raw);
        if (line.empty() || line.starts_with("#"))
            continue;

        auto const fields = split(line, '\t');
        auto warn = [&](std::string_view what) {
            dataset.warnings.push_back(fmt::format("line {}: {}; skipped", lineNo, what));
        };
        if (fields.size() != 4)
        {
            warn(fmt::format("expected 4 tab-separated fields, found {}", fields.size()));
            continue;
        }
        DatasetRecord record { std::string(trim(fields[0])), std::string(trim(fields[1])), std::string(trim(fields[2])), {} };
        if (record.issue_id.empty() || record.issue_url.empty() || record.repo_id.empty())
        {
            warn("empty issue id, URL or repo id");
            continue;
        }
        bool bad = false;
        for (auto h: split(fields[3], ';'))
        {
            h = trim(h);
            if (h.empty())
                continue;
            auto hash = CommitHash::parse(h);
            if (!hash)
            {
                warn(fmt::format("'{}' is not a full 40-character commit hash", h));
                bad = true;
                break;
            }
            record.true_links.push_back(*hash);
        }
        if (bad)
            continue;
        if (record.true_links.empty())
        {
            warn("no true links");
            continue;
        }
        if (!seen.insert(record.issue_id).second)
        {
            warn(fmt::format("duplicate issue id '{}'", record.issue_id));
            continue;
        }
        dataset.records.push_back(std::move(record));
    }
    return dataset;
}

auto load_dataset(const std::filesystem::path& file) -> Dataset
{
    return parse_dataset(read_file(file));
}

auto parse_ealink_csv(std::string_view text, std::string_view repo_id, std::string_view url_template) -> Dataset
{
    Dataset dataset;
    auto const lines = split(text, '\n');
    std::size_t first = 0;
    while (first < lines.size() && trim(lines[first]).empty())
        ++first;
    if (first == lines.size())
        return dataset;

    auto const header = csv_fields(lines[first]);
    auto column = [&](std::initializer_list<std::string_view> names) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            for (auto n: names)
                if (lower(std::string(trim(header[i]))) == n)
                    return i;
        return std::nullopt;
    };
    auto const issueCol = column({ "issue_id", "issue_key", "issue" });
    auto const hashCol = column({ "commit_hash", "commit_id", "hash", "sha" });
    auto const urlCol = column({ "issue_url", "url" });
    if (!issueCol || !hashCol)
        throw SetupError("link table header needs an issue column and a commit hash column");

    std::map<std::string, std::size_t> index;
    for (std::size_t n = first + 1; n < lines.size(); ++n)
    {
        auto const line = trim(lines[n]);
        if (line.empty())
            continue;
        auto const fields = csv_fields(line);
        auto const need = std::max({ *issueCol, *hashCol, urlCol.value_or(0) });
        if (fields.size() <= need)
        {
            dataset.warnings.push_back(fmt::format("line {}: too few columns; skipped", n + 1));
            continue;
        }
        auto const issue = std::string(trim(fields[*issueCol]));
        auto const hash = CommitHash::parse(trim(fields[*hashCol]));
        if (issue.empty() || !hash)
        {
            dataset.warnings.push_back(fmt::format("line {}: missing issue id or malformed hash; skipped", n + 1));
            continue;
        }
        auto [it, fresh] = index.try_emplace(issue, dataset.records.size());
        if (fresh)
        {
            std::string url;
            if (urlCol && !trim(fields[*urlCol]).empty())
                url = std::string(trim(fields[*urlCol]));
            else
            {
                url = std::string(url_template);
                auto const at = url.find("{issue_id}");
                if (at != std::string::npos)
                    url.replace(at, 10, issue);
            }
            dataset.records.push_back({ issue, url, std::string(repo_id), {} });
        }
        auto& links = dataset.records[it->second].true_links;
        if (std::find(links.begin(), links.end(), *hash) == links.end())
            links.push_back(*hash);
    }
    return dataset;
}

auto load_ealink_csv(const std::filesystem::path& file, std::string_view repo_id, std::string_view url_template) -> Dataset
{
    return parse_ealink_csv(read_file(file), repo_id, url_template);
}

// Ground truth and Hit@K -----------------------------------------------------------------

auto adjust_ground_truth(const std::vector<DatasetRecord>& records, const CommitTimeResolver& resolver) -> AdjustedDataset
{
    AdjustedDataset out;
    for (auto const& record: records)
    {
        std::optional<std::pair<UnixTime, CommitHash>> best;
        std::optional<CommitHash> unresolved;
        for (auto const& link: record.true_links)
        {
            auto const t = resolver(record.repo_id, link);
            if (!t)
            {
                unresolved = link;
                break;
            }
            std::pair candidate { *t, link };
            if (!best || *best < candidate)
                best = candidate;
        }
        if (unresolved || !best)
        {
            out.excluded.push_back(record.issue_id);
            out.warnings.push_back(
                fmt::format("issue {}: link {} is not in repository {}; excluded",
                            record.issue_id,
                            unresolved ? unresolved->str() : std::string("(none)"),
                            record.repo_id));
            continue;
        }
        out.records.push_back({ record, best->second });
    }
    return out;
}

auto hit_at_k(const std::vector<std::string>& ranked, std::string_view truth, int k) -> int
{
    if (k < 1)
        throw std::invalid_argument("k must be at least 1");
    auto const limit = std::min(ranked.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < limit; ++i)
        if (ranked[i] == truth)
            return 1;
    return 0;
}

auto mean_hit_at_k(const std::vector<RankedQuery>& queries, int k) -> double
{
    if (queries.empty())
        return 0;
    std::size_t hits = 0;
    for (auto const& q: queries)
        hits += static_cast<std::size_t>(hit_at_k(q.ranked, q.truth, k));
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

auto single_answer_hit_rate(const std::vector<std::optional<CommitHash>>& answers, const std::vector<CommitHash>& truths)
    -> double
{
    if (answers.size() != truths.size())
        throw std::invalid_argument("one answer per issue is required");
    if (truths.empty())
        return 0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truths.size(); ++i)
        hits += answers[i] && *answers[i] == truths[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truths.size());
}

// Records ------------------------------------------------------------------------------------

auto LinkRecord::from_session(std::string issue, const SessionResult& result) -> LinkRecord
{
    LinkRecord r;
    r.issue = std::move(issue);
    r.outcome = result.outcome.kind;
    if (result.outcome.commit_hash)
        r.commit = result.outcome.commit_hash->str();
    r.reason = result.outcome.reason;
    r.iterations = result.state.iteration;
    r.tokens = result.state.ledger.consumed_total();
    r.context_tokens = result.state.ledger.cumulative_total();
    r.wall_time_s = result.wall_time_s;
    return r;
}

auto to_json(const LinkRecord& r) -> ordered_json
{
    ordered_json j;
    j["issue"] = r.issue;
    j["outcome"] = to_string(r.outcome);
    j["commit"] = r.commit ? ordered_json(*r.commit) : ordered_json(nullptr);
    j["reason"] = r.reason;
    j["iterations"] = r.iterations;
    j["tokens"] = r.tokens;
    j["context_tokens"] = r.context_tokens;
    j["wall_time_s"] = r.wall_time_s;
    return j;
}

auto link_record_from_json(const json& j) -> LinkRecord
{
    LinkRecord r;
    r.issue = j.at("issue").get<std::string>();
    auto const kind = parse_outcome_kind(j.at("outcome").get<std::string>());
    if (!kind)
        throw std::invalid_argument(fmt::format("unknown outcome '{}'", j.at("outcome").get<std::string>()));
    r.outcome = *kind;
    if (j.contains("commit") && j["commit"].is_string())
        r.commit = j["commit"].get<std::string>();
    r.reason = j.value("reason", std::string());
    r.iterations = j.at("iterations").get<int>();
    r.tokens = j.at("tokens").get<std::int64_t>();
    r.context_tokens = j.value("context_tokens", std::int64_t { 0 });
    r.wall_time_s = j.at("wall_time_s").get<double>();
    return r;
}

void write_call_log(std::ostream& out, const std::vector<CallLogEntry>& call_log)
{
    for (auto const& e: call_log)
    {
        ordered_json j;
        j["iteration"] = e.iteration;
        j["call_id"] = e.call.call_id;
        j["name"] = e.call.name;
        j["arguments"] = e.call.arguments;
        j["byte_size"] = e.byte_size;
        j["error"] = e.is_error;
        j["context_tokens_before"] = e.context_tokens_before;
        j["context_tokens_after"] = e.context_tokens_after;
        j["verdict"] = e.verdict ? ordered_json(std::string(to_string(*e.verdict))) : ordered_json(nullptr);
        out << j.dump(-1, ' ', false, ordered_json::error_handler_t::replace) << '\n';
    }
}

// Evaluation run ------------------------------------------------------------------------------

namespace
{
    struct RepoEntry
    {
        std::shared_ptr<const GitRepository> repo;
        std::shared_ptr<const UnifiedHistory> history;
        std::string error;
    };

    struct IssueEntry
    {
        std::optional<IssueSnapshot> snapshot;
        std::string error;
    };
} // namespace

auto run_eval(const Dataset& dataset, const EvalConfig& config) -> RunReport
{
    if (config.runs < 1)
        throw SetupError("runs must be at least 1");
    if (!config.repo_source || !config.backend_factory || !config.transport)
        throw SetupError("evaluation config is incomplete");

    RunReport report;
    report.runs = config.runs;
    report.warnings = dataset.warnings;

    auto languages = config.languages;
    if (!languages)
        languages = std::make_shared<const LanguageRegistry>(LanguageRegistry::load(LanguageRegistry::default_directory()));

    std::map<std::string, RepoEntry> repos;
    for (auto const& record: dataset.records)
    {
        if (repos.contains(record.repo_id))
            continue;
        RepoEntry entry;
        try
        {
            auto repo = std::make_shared<const GitRepository>(
                GitRepository::open_or_clone(config.repo_source(record.repo_id), config.cache_dir));
            entry.history = std::make_shared<const UnifiedHistory>(UnifiedHistory::load(*repo));
            entry.repo = std::move(repo);
        }
        catch (std::exception const& e)
        {
            entry.error = e.what();
            report.warnings.push_back(fmt::format("repository {}: {}", record.repo_id, e.what()));
        }
        repos.emplace(record.repo_id, std::move(entry));
    }

    auto adjusted = adjust_ground_truth(dataset.records, [&](const std::string& repo_id, const CommitHash& hash) {
        auto const& entry = repos.at(repo_id);
        std::optional<UnixTime> t;
        if (entry.history)
            if (auto const* c = entry.history->find(hash))
                t = c->commit_time;
        return t;
    });
    report.excluded = adjusted.excluded;
    report.warnings.insert(report.warnings.end(), adjusted.warnings.begin(), adjusted.warnings.end());

    // Each issue is fetched once and shared by every run.
    std::map<std::string, IssueEntry> issues;
    for (auto const& record: adjusted.records)
    {
        IssueEntry entry;
        try
        {
            entry.snapshot = fetch_issue(record.source.issue_url, *config.transport, config.credentials);
        }
        catch (std::exception const& e)
        {
            entry.error = e.what();
        }
        issues.emplace(record.source.issue_id, std::move(entry));
    }

    auto const perRun = adjusted.records.size();
    report.sessions.resize(perRun * static_cast<std::size_t>(config.runs));

    auto execute = [&](std::size_t task) {
        auto const run = static_cast<int>(task / perRun) + 1;
        auto const& record = adjusted.records[task % perRun];
        SessionReport s;
        s.issue_id = record.source.issue_id;
        s.repo_id = record.source.repo_id;
        s.run = run;
        s.truth = record.resolving_commit;
        try
        {
            auto const& repo = repos.at(s.repo_id);
            auto const& issue = issues.at(s.issue_id);
            if (!issue.snapshot)
                throw SetupError(issue.error);
            SessionInputs inputs { record.source.issue_url, repo.repo, repo.history, *issue.snapshot, languages };
            auto backend = config.backend_factory(record, run);
            Session session(std::move(inputs), *backend, config.session);
            auto const result = session.run();
            s.link = LinkRecord::from_session(record.source.issue_url, result);
            s.metrics = issuelink::record(result.state.call_log, result.state.ledger, result.wall_time_s, config.price_per_token);
            s.hit = result.outcome.commit_hash && *result.outcome.commit_hash == record.resolving_commit;
        }
        catch (std::exception const& e)
        {
            s.error = e.what();
        }
        report.sessions[task] = std::move(s);
    };

    std::atomic<std::size_t> next { 0 };
    auto worker = [&] {
        for (auto task = next++; task < report.sessions.size(); task = next++)
            execute(task);
    };
    auto const threads = static_cast<std::size_t>(std::clamp(config.parallel, 1, 64));
    if (threads == 1)
        worker();
    else
    {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < std::min(threads, report.sessions.size()); ++i)
            pool.emplace_back(worker);
        for (auto& t: pool)
            t.join();
    }

    // Assembly.
    std::map<std::string, std::vector<std::size_t>> hits; // project -> hits per run
    std::vector<std::size_t> overallHits(static_cast<std::size_t>(config.runs), 0);
    for (auto const& record: adjusted.records)
        ++report.issues_per_project[record.source.repo_id];
    for (auto const& [project, n]: report.issues_per_project)
    {
        report.projects.push_back(project);
        hits[project].assign(static_cast<std::size_t>(config.runs), 0);
    }

    std::vector<SessionMetrics> allMetrics;
    for (auto const& s: report.sessions)
    {
        if (!s.link)
            ++report.failed;
        else if (s.link->outcome == SessionOutcome::Kind::finished)
            ++report.finished;
        else if (s.link->outcome == SessionOutcome::Kind::gave_up)
            ++report.gave_up;
        else
            ++report.budget_exhausted;
        if (s.hit)
        {
            ++hits[s.repo_id][static_cast<std::size_t>(s.run - 1)];
            ++overallHits[static_cast<std::size_t>(s.run - 1)];
        }
        if (s.metrics)
            allMetrics.push_back(*s.metrics);
    }

    for (auto const& project: report.projects)
    {
        auto const n = static_cast<double>(report.issues_per_project[project]);
        auto& values = report.hit_at_1_per_run[project];
        for (auto h: hits[project])
            values.push_back(static_cast<double>(h) / n);
        double sum = 0;
        for (auto v: values)
            sum += v;
        report.hit_at_1_mean[project] = sum / static_cast<double>(config.runs);
    }
    double overallSum = 0;
    for (auto h: overallHits)
    {
        auto const v = perRun == 0 ? 0.0 : static_cast<double>(h) / static_cast<double>(perRun);
        report.overall_per_run.push_back(v);
        overallSum += v;
    }
    report.overall_mean = overallSum / static_cast<double>(config.runs);
    if (!allMetrics.empty())
        report.metrics = aggregate(allMetrics);
    return report;
}

void write_report_table(std::ostream& out, const RunReport& report)
{
    std::string header = fmt::format("{:<24} {:>7}", "project", "issues");
    for (int r = 1; r <= report.runs; ++r)
        header += fmt::format(" {:>8}", fmt::format("run{}", r));
    header += fmt::format(" {:>8}", "mean");
    out << "Hit@1 per project\n" << header << '\n' << std::string(header.size(), '-') << '\n';

    auto row = [&](std::string_view name, std::size_t issues, const std::vector<double>& values, double mean) {
        std::string line = fmt::format("{:<24} {:>7}", name, issues);
        for (auto v: values)
            line += fmt::format(" {:>8.4f}", v);
        line += fmt::format(" {:>8.4f}", mean);
        out << line << '\n';
    };
    std::size_t total = 0;
    for (auto const& project: report.projects)
    {
        auto const n = report.issues_per_project.at(project);
        total += n;
        row(project, n, report.hit_at_1_per_run.at(project), report.hit_at_1_mean.at(project));
    }
    out << std::string(header.size(), '-') << '\n';
    row("all", total, report.overall_per_run, report.overall_mean);

    out << fmt::format("\nsessions: {} finished, {} gave up, {} budget exhausted, {} failed to run\n",
                       report.finished,
                       report.gave_up,
                       report.budget_exhausted,
                       report.failed);
    out << "Hit@1 counts a session as correct only when it finished with the resolving commit. Give-ups, exhausted "
           "budgets and failed sessions count as misses; the denominator is every issue kept after ground-truth "
           "adjustment.\n";
    if (!report.excluded.empty())
        out << fmt::format("excluded issues (unresolvable links): {}\n", fmt::join(report.excluded, ", "));
    if (!report.warnings.empty())
    {
        out << "warnings:\n";
        for (auto const& w: report.warnings)
            out << "  " << w << '\n';
    }
    if (report.metrics)
        out << fmt::format("median wall time {:.2f}s, median tokens {:.0f}, median cost {:.6f} USD\n",
                           report.metrics->median_wall_time_s,
                           report.metrics->median_tokens,
                           report.metrics->median_cost);
}

void write_report_records(std::ostream& out, const RunReport& report)
{
    for (auto const& s: report.sessions)
    {
        ordered_json j;
        j["record"] = "session";
        j["run"] = s.run;
        j["issue_id"] = s.issue_id;
        j["project"] = s.repo_id;
        j["truth"] = s.truth.str();
        j["hit"] = s.hit;
        if (s.link)
        {
            auto const fields = to_json(*s.link);
            for (auto const& [key, value]: fields.items())
                j[key] = value;
        }
        else
            j["error"] = s.error;
        out << j.dump() << '\n';
    }
    ordered_json summary;
    summary["record"] = "summary";
    summary["runs"] = report.runs;
    summary["hit_at_1_per_run"] = report.hit_at_1_per_run;
    summary["hit_at_1_mean"] = report.hit_at_1_mean;
    summary["overall_per_run"] = report.overall_per_run;
    summary["overall_mean"] = report.overall_mean;
    summary["finished"] = report.finished;
    summary["gave_up"] = report.gave_up;
    summary["budget_exhausted"] = report.budget_exhausted;
    summary["failed"] = report.failed;
    summary["excluded"] = report.excluded;
    summary["warnings"] = report.warnings;
    summary["misses_include"] = "gave_up, budget_exhausted, failed";
    if (report.metrics)
        summary["metrics"] = to_json(*report.metrics);
    out << summary.dump() << '\n';
}

void write_session_metrics(std::ostream& out, const RunReport& report)
{
    for (auto const& s: report.sessions)
    {
        if (!s.metrics)
            continue;
        ordered_json extra;
        extra["run"] = s.run;
        extra["issue_id"] = s.issue_id;
        extra["project"] = s.repo_id;
        write_metrics_line(out, *s.metrics, extra);
    }
}

} // namespace issuelink
