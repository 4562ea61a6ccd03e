// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/metrics.hpp>
#include <issuelink/orchestrator.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace issuelink
{

struct DatasetRecord
{
    std::string issue_id;
    std::string issue_url;
    std::string repo_id;
    std::vector<CommitHash> true_links;
};

struct Dataset
{
    std::vector<DatasetRecord> records;
    std::vector<std::string> warnings; // one per skipped line
};

/// Tab-delimited, one record per line:
///     issue_id <TAB> issue_url <TAB> repo_id <TAB> hash1;hash2;...
/// Blank lines and lines starting with '#' are ignored. Malformed lines are
/// skipped with a warning.
[[nodiscard]] auto parse_dataset(std::string_view text) -> Dataset;
/// Throws SetupError when the file can not be read.
[[nodiscard]] auto load_dataset(const std::filesystem::path& file) -> Dataset;

/// EALink-style link table: a CSV with a header row naming at least an issue
/// column (`issue_id`, `issue_key` or `issue`) and a hash column
/// (`commit_hash`, `commit_id`, `hash` or `sha`), one link per row. Rows are
/// grouped per issue. The URL comes from an `issue_url` column when present,
/// otherwise from `url_template` with "{issue_id}" substituted.
[[nodiscard]] auto parse_ealink_csv(std::string_view text, std::string_view repo_id, std::string_view url_template)
    -> Dataset;
[[nodiscard]] auto load_ealink_csv(const std::filesystem::path& file, std::string_view repo_id, std::string_view url_template)
    -> Dataset;

struct GroundTruthRecord
{
    DatasetRecord source;
    CommitHash resolving_commit; // latest true link by (commit_time, hash)
};

/// Commit time of `hash` in the repository `repo_id`, or nullopt when the
/// hash can not be resolved there.
using CommitTimeResolver = std::function<std::optional<UnixTime>(const std::string& repo_id, const CommitHash& hash)>;

struct AdjustedDataset
{
    std::vector<GroundTruthRecord> records;
    std::vector<std::string> excluded; // issue ids with an unresolvable link
    std::vector<std::string> warnings;
};

/// Picks each issue's resolving commit: the true link with the largest
/// (commit_time, hash). Records with an unresolvable link are excluded.
[[nodiscard]] auto adjust_ground_truth(const std::vector<DatasetRecord>& records, const CommitTimeResolver& resolver)
    -> AdjustedDataset;

/// 1 when `truth` is among the first `k` entries of `ranked`, else 0.
/// Throws std::invalid_argument for k < 1.
[[nodiscard]] auto hit_at_k(const std::vector<std::string>& ranked, std::string_view truth, int k) -> int;

struct RankedQuery
{
    std::vector<std::string> ranked;
    std::string truth;
};

/// (1/|Q|) * sum of hit_at_k over the query set. 0 for an empty set.
[[nodiscard]] auto mean_hit_at_k(const std::vector<RankedQuery>& queries, int k) -> double;

/// Hit@1 for single-answer sessions: correct finishes over all issues.
/// Sessions without a finished hash count as misses.
[[nodiscard]] auto single_answer_hit_rate(const std::vector<std::optional<CommitHash>>& answers,
                                          const std::vector<CommitHash>& truths) -> double;

/// The machine-readable result of one `link` run.
struct LinkRecord
{
    std::string issue;
    SessionOutcome::Kind outcome = SessionOutcome::Kind::gave_up;
    std::optional<std::string> commit;
    std::string reason;
    int iterations = 0;
    std::int64_t tokens = 0;         // consumed, prompt plus completion
    std::int64_t context_tokens = 0; // live history size at the end
    double wall_time_s = 0;

    static auto from_session(std::string issue, const SessionResult& result) -> LinkRecord;
    friend auto operator==(const LinkRecord&, const LinkRecord&) -> bool = default;
};

/// Stable field order: issue, outcome, commit, reason, iterations, tokens,
/// context_tokens, wall_time_s.
[[nodiscard]] auto to_json(const LinkRecord& r) -> nlohmann::ordered_json;
/// Reads a record written by to_json, ignoring any extra fields.
[[nodiscard]] auto link_record_from_json(const nlohmann::json& j) -> LinkRecord;

/// Writes every call of a session, one JSON object per line.
void write_call_log(std::ostream& out, const std::vector<CallLogEntry>& call_log);

struct EvalConfig
{
    SessionConfig session;
    int runs = 3;
    int parallel = 1;
    double price_per_token = kDefaultPricePerToken;
    std::filesystem::path cache_dir;
    TrackerCredentials credentials;
    std::shared_ptr<HttpTransport> transport; // shared by all workers
    std::shared_ptr<const LanguageRegistry> languages;
    /// Repository path or URL for a dataset repo id.
    std::function<std::string(const std::string& repo_id)> repo_source;
    /// A fresh backend per session.
    std::function<std::unique_ptr<ChatBackend>(const GroundTruthRecord& record, int run)> backend_factory;
};

struct SessionReport
{
    std::string issue_id;
    std::string repo_id;
    int run = 0; // 1-based
    CommitHash truth;
    std::optional<LinkRecord> link; // empty when the session could not start
    std::optional<SessionMetrics> metrics;
    std::string error;
    bool hit = false;
};

struct RunReport
{
    int runs = 0;
    std::vector<std::string> projects;                          // sorted
    std::map<std::string, std::size_t> issues_per_project;
    std::map<std::string, std::vector<double>> hit_at_1_per_run; // project -> one value per run
    std::map<std::string, double> hit_at_1_mean;
    std::vector<double> overall_per_run;
    double overall_mean = 0;
    std::size_t finished = 0;
    std::size_t gave_up = 0;
    std::size_t budget_exhausted = 0;
    std::size_t failed = 0; // setup or backend errors
    std::vector<std::string> warnings;
    std::vector<std::string> excluded;
    std::vector<SessionReport> sessions; // ordered by (run, dataset order)
    std::optional<AggregateMetrics> metrics;
};

/// Runs `runs` independent passes over the dataset. Per-issue failures are
/// recorded as misses with their reason and never abort the run.
[[nodiscard]] auto run_eval(const Dataset& dataset, const EvalConfig& config) -> RunReport;

/// Human-readable table.
void write_report_table(std::ostream& out, const RunReport& report);
/// One line per session, then a final summary line.
void write_report_records(std::ostream& out, const RunReport& report);
/// One metrics line per session.
void write_session_metrics(std::ostream& out, const RunReport& report);

} // namespace issuelink
