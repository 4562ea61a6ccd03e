// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/domain.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace issuelink::fixtures
{

struct Identity
{
    std::string name;
    std::string email;
};

/// Creates commits with fixed identities and dates, so hashes are stable.
class RepoBuilder
{
  public:
    /// Initializes an empty repository at `dir` on branch `main`.
    explicit RepoBuilder(std::filesystem::path dir);

    [[nodiscard]] auto dir() const -> const std::filesystem::path& { return _dir; }

    void write(const std::string& path, const std::string& content);
    void remove(const std::string& path);
    void rename(const std::string& from, const std::string& to);

    /// Stages everything and commits.
    auto commit(const std::string& message, const Identity& author, UnixTime time) -> CommitHash;
    /// Merges `branch` into the current branch with a merge commit.
    auto merge(const std::string& branch, const std::string& message, const Identity& author, UnixTime time) -> CommitHash;

    void create_branch(const std::string& name, const std::optional<std::string>& start = std::nullopt);
    void checkout(const std::string& branch);
    void tag(const std::string& name);

    auto git(const std::vector<std::string>& args, const std::optional<Identity>& who = std::nullopt,
             std::optional<UnixTime> time = std::nullopt) -> std::string;

  private:
    std::filesystem::path _dir;
};

inline const Identity kAliceId { "alice", "alice@example.com" };
inline const Identity kBobId { "bob", "bob@example.com" };

/// The small reference repository.
///   C1 alice adds src/app.rs        2024-03-11
///   C2 alice adds README.md         2024-03-12
///   C3 bob modifies src/app.rs      2024-03-13
///   C4 alice adds src/lib.rs        2024-03-14, on branch feat (from C2)
struct FixRepo
{
    std::filesystem::path dir;
    CommitHash c1, c2, c3, c4;
};

auto build_fix_repo(const std::filesystem::path& dir) -> FixRepo;

/// Files written to a recordings directory for FIX's tracker issues.
inline constexpr std::string_view kFixIssueUrl = "https://github.com/example/fixture/issues/42";
inline constexpr std::string_view kFixSecondIssueUrl = "https://github.com/example/fixture/issues/43";
inline constexpr std::string_view kFixJiraUrl = "https://issues.example.org/jira/browse/FIX-7";
inline constexpr UnixTime kFixIssueCreated = 1710061200; // 2024-03-10T09:00:00Z
inline constexpr UnixTime kFixIssueClosed = 1710954000;  // 2024-03-20T17:00:00Z

/// A GitHub issue: recordings for the issue endpoint and its comment page.
struct RecordedIssue
{
    std::string url;
    std::string title;
    std::string body;
    std::string author;
    UnixTime created_at = 0;
    std::optional<UnixTime> closed_at;
    struct Comment
    {
        std::string author;
        std::string body;
        UnixTime created_at = 0;
    };
    std::vector<Comment> comments;
};

void record_github_issue(const std::filesystem::path& recordings_dir, const RecordedIssue& issue);
void record_jira_issue(const std::filesystem::path& recordings_dir, const RecordedIssue& issue);

/// Recordings for issue 42, issue 43 and FIX-7.
void record_fix_issues(const std::filesystem::path& recordings_dir);

/// Python, Go and Rust sources, a later commit that adds a file and a
/// function, and a file in an unsupported language.
///   P1 adds src/calc.py, cmd/main.go, src/util.rs, notes/readme.txt
///   P2 adds src/late.py and the function `late_addition` to src/calc.py
struct PolyglotRepo
{
    std::filesystem::path dir;
    CommitHash p1, p2;
};

auto build_polyglot_repo(const std::filesystem::path& dir) -> PolyglotRepo;

/// Commits placed around an issue lifespan.
struct LifespanRepo
{
    std::filesystem::path dir;
    UnixTime created_at = 0;
    UnixTime closed_at = 0;
    std::string issue_url;
    /// Offsets in seconds relative to the reference point, and their hashes.
    std::vector<std::pair<std::string, CommitHash>> commits; // label -> hash
    std::map<std::string, UnixTime> times;                   // label -> commit time
};

/// Commits at created-10d, created-7d, created-1d, closed+3d, closed+7d,
/// closed+8d. Writes the issue recording into `recordings_dir`.
auto build_lifespan_repo(const std::filesystem::path& dir, const std::filesystem::path& recordings_dir) -> LifespanRepo;

/// Commits that each add one large text file, for budget and pruning tests.
struct BulkRepo
{
    std::filesystem::path dir;
    std::string issue_url;
    std::vector<CommitHash> commits;
};

auto build_bulk_repo(const std::filesystem::path& dir,
                     const std::filesystem::path& recordings_dir,
                     int commit_count,
                     std::size_t file_bytes) -> BulkRepo;

/// Seeded random history with several branches, merges, renames, deletes
/// and equal timestamps.
struct RandomRepo
{
    std::filesystem::path dir;
    std::vector<CommitHash> commits; // creation order
};

auto build_random_repo(const std::filesystem::path& dir, std::uint32_t seed, int commit_count = 40) -> RandomRepo;

/// Everything `fixtures --out` writes.
struct FixtureSet
{
    std::filesystem::path root;
    FixRepo fix;
    PolyglotRepo polyglot;
    LifespanRepo lifespan;
    std::filesystem::path recordings;
    std::filesystem::path dataset;
    std::filesystem::path scripts;
};

/// Writes repos/{fixture,polyglot,lifespan}, recordings/, dataset.tsv and
/// scripts/ under `root`.
auto build_fixture_set(const std::filesystem::path& root) -> FixtureSet;

} // namespace issuelink::fixtures
