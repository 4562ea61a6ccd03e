// SPDX-License-Identifier: Apache-2.0
#include <issuelink/fixtures.hpp>
#include <issuelink/git_repo.hpp>
#include <issuelink/http.hpp>
#include <issuelink/issue_extractor.hpp>
#include <issuelink/process.hpp>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <random>

namespace issuelink::fixtures
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{
    void write_text(const fs::path& file, const std::string& content)
    {
        fs::create_directories(file.parent_path());
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error(fmt::format("cannot write {}", file.string()));
        out << content;
    }

    auto at(int year, unsigned month, unsigned day, int hour = 0, int minute = 0) -> UnixTime
    {
        return days_from_civil(year, month, day) * kSecondsPerDay + hour * 3600 + minute * 60;
    }

    auto jira_time(UnixTime t) -> std::string
    {
        auto s = format_utc(t); // 2024-03-10T09:00:00Z
        s.pop_back();
        return s + ".000+0000";
    }

    auto file_name_for(const std::string& url) -> std::string
    {
        std::string name;
        for (char c: url)
            name += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
        return name + ".http";
    }

    void record(const fs::path& dir, const std::string& url, const json& body)
    {
        fs::create_directories(dir);
        write_recording(dir / file_name_for(url), url, 200, body.dump(2));
    }
} // namespace

// RepoBuilder -----------------------------------------------------------------------------

RepoBuilder::RepoBuilder(fs::path dir): _dir(std::move(dir))
{
    if (fs::exists(_dir))
        fs::remove_all(_dir);
    fs::create_directories(_dir);
    git({ "init", "-q", "-b", "main" });
}

auto RepoBuilder::git(const std::vector<std::string>& args, const std::optional<Identity>& who, std::optional<UnixTime> time)
    -> std::string
{
    std::vector<std::string> argv { "git", "-c", "commit.gpgsign=false", "-c", "core.autocrlf=false" };
    argv.insert(argv.end(), args.begin(), args.end());
    auto env = hermetic_git_env();
    auto const id = who.value_or(Identity { "fixture", "fixture@example.com" });
    auto const date = fmt::format("@{} +0000", time.value_or(0));
    env.insert(env.end(),
               { { "GIT_AUTHOR_NAME", id.name },
                 { "GIT_AUTHOR_EMAIL", id.email },
                 { "GIT_COMMITTER_NAME", id.name },
                 { "GIT_COMMITTER_EMAIL", id.email },
                 { "GIT_AUTHOR_DATE", date },
                 { "GIT_COMMITTER_DATE", date } });
    auto result = run_process(argv, _dir, env);
    if (!result.ok())
        throw std::runtime_error(fmt::format("git {} failed: {}", fmt::join(args, " "), result.err));
    return result.out;
}

void RepoBuilder::write(const std::string& path, const std::string& content)
{
    write_text(_dir / path, content);
}

void RepoBuilder::remove(const std::string& path)
{
    git({ "rm", "-q", "--", path });
}

void RepoBuilder::rename(const std::string& from, const std::string& to)
{
    fs::create_directories((_dir / to).parent_path());
    git({ "mv", "--", from, to });
}

auto RepoBuilder::commit(const std::string& message, const Identity& author, UnixTime time) -> CommitHash
{
    git({ "add", "-A" });
    git({ "commit", "-q", "--allow-empty", "-m", message }, author, time);
    auto out = git({ "rev-parse", "HEAD" });
    return CommitHash::require(out.substr(0, 40));
}

auto RepoBuilder::merge(const std::string& branch, const std::string& message, const Identity& author, UnixTime time)
    -> CommitHash
{
    git({ "merge", "-q", "--no-ff", "-m", message, branch }, author, time);
    auto out = git({ "rev-parse", "HEAD" });
    return CommitHash::require(out.substr(0, 40));
}

void RepoBuilder::create_branch(const std::string& name, const std::optional<std::string>& start)
{
    std::vector<std::string> args { "checkout", "-q", "-b", name };
    if (start)
        args.push_back(*start);
    git(args);
}

void RepoBuilder::checkout(const std::string& branch)
{
    git({ "checkout", "-q", branch });
}

void RepoBuilder::tag(const std::string& name)
{
    git({ "tag", name });
}

// FIX ---------------------------------------------------------------------------------------

namespace
{
    constexpr auto kAppV1 = R"(// Application entry point.
fn main() {
    println!("{}", greet("world"));
}

fn greet(name: &str) -> String {
    format!("hello {}", name)
}
)";

    constexpr auto kAppV2 = R"(// Application entry point.
fn main() {
    println!("{}", greet("  world  "));
}

fn greet(name: &str) -> String {
    format!("hello {}", name.trim())
}
)";

    constexpr auto kReadme = R"(# fixture

A tiny project used by the tests.

Run it with `cargo run`.
)";

    constexpr auto kLib = R"(/// Parses a port number from text.
///
/// Returns None when the text is not a number.
pub fn parse_port(text: &str) -> Option<u16> {
    text.trim().parse().ok()
}

pub fn undocumented_helper(x: i32) -> i32 {
    x * 2
}

/// Connection settings.
#[derive(Debug, Clone)]
pub struct Config {
    pub host: String,
    pub port: u16,
}
)";
} // namespace

auto build_fix_repo(const fs::path& dir) -> FixRepo
{
    RepoBuilder b(dir);
    FixRepo r;
    r.dir = dir;
    b.write("src/app.rs", kAppV1);
    r.c1 = b.commit("Add application entry point", kAliceId, at(2024, 3, 11, 10));
    b.write("README.md", kReadme);
    r.c2 = b.commit("Add README", kAliceId, at(2024, 3, 12, 10));
    b.create_branch("feat");
    b.write("src/lib.rs", kLib);
    r.c4 = b.commit("Add port parsing library\n\nFixes #42.", kAliceId, at(2024, 3, 14, 10));
    b.checkout("main");
    b.write("src/app.rs", kAppV2);
    r.c3 = b.commit("Trim the greeting name", kBobId, at(2024, 3, 13, 10));
    return r;
}

void record_github_issue(const fs::path& recordings_dir, const RecordedIssue& issue)
{
    auto const loc = IssueLocator::parse(issue.url);
    json body {
        { "number", std::stoll(loc.key) },
        { "title", issue.title },
        { "body", issue.body },
        { "user", { { "login", issue.author } } },
        { "created_at", format_utc(issue.created_at) },
        { "closed_at", issue.closed_at ? json(format_utc(*issue.closed_at)) : json(nullptr) },
        { "state", issue.closed_at ? "closed" : "open" },
        { "comments", issue.comments.size() },
    };
    record(recordings_dir, loc.issue_endpoint(), body);

    auto comments = json::array();
    for (auto const& c: issue.comments)
        comments.push_back({ { "user", { { "login", c.author } } }, { "body", c.body }, { "created_at", format_utc(c.created_at) } });
    record(recordings_dir, loc.comments_endpoint(1, 100), comments);
}

void record_jira_issue(const fs::path& recordings_dir, const RecordedIssue& issue)
{
    auto const loc = IssueLocator::parse(issue.url);
    auto comments = json::array();
    for (auto const& c: issue.comments)
        comments.push_back({ { "author", { { "name", c.author }, { "displayName", c.author } } },
                             { "body", c.body },
                             { "created", jira_time(c.created_at) } });
    json fields {
        { "summary", issue.title },
        { "description", issue.body },
        { "created", jira_time(issue.created_at) },
        { "resolutiondate", issue.closed_at ? json(jira_time(*issue.closed_at)) : json(nullptr) },
        { "creator", { { "name", issue.author }, { "displayName", issue.author } } },
        { "status", { { "statusCategory", { { "key", issue.closed_at ? "done" : "new" } } } } },
        { "comment", { { "comments", comments }, { "total", comments.size() } } },
    };
    record(recordings_dir, loc.issue_endpoint(), json { { "key", loc.key }, { "fields", fields } });
}

void record_fix_issues(const fs::path& recordings_dir)
{
    record_github_issue(recordings_dir,
                        { std::string(kFixIssueUrl),
                          "Port parsing fails on padded input",
                          "Passing \" 8080\" as the port makes startup fail.\nExpected the value to be trimmed.",
                          "dana",
                          kFixIssueCreated,
                          kFixIssueClosed,
                          { { "dana", "Seen on the feat branch as well.", at(2024, 3, 10, 10) },
                            { "erik", "Probably needs a trim before parse.", at(2024, 3, 12, 8) },
                            { "dana", "Confirmed fixed, thanks alice.", at(2024, 3, 15, 12) } } });
    record_github_issue(recordings_dir,
                        { std::string(kFixSecondIssueUrl),
                          "Greeting keeps surrounding whitespace",
                          "greet(\"  world  \") prints the spaces.",
                          "erik",
                          at(2024, 3, 12, 0),
                          at(2024, 3, 13, 18),
                          { { "bob", "I will take this one.", at(2024, 3, 12, 9) } } });
    record_jira_issue(recordings_dir,
                      { std::string(kFixJiraUrl),
                        "Project has no README",
                        "New contributors do not know how to run the project.",
                        "carol",
                        at(2024, 3, 10, 12),
                        at(2024, 3, 12, 15),
                        { { "alice", "Adding one now.", at(2024, 3, 11, 9) } } });
}

// Polyglot ----------------------------------------------------------------------------------

namespace
{
    constexpr auto kCalcV1 = R"PY("""Small calculator."""


def add(a, b):
    """Return the sum of a and b."""
    return a + b


def sub(a, b):
    return a - b


class Accumulator:
    """Keeps a running total."""

    def __init__(self):
        self.total = 0

    def push(self, value):
        """Add value to the total."""
        self.total = add(self.total, value)
        return self.total
)PY";

    constexpr auto kCalcAddition = R"PY(

def late_addition(values):
    """Sum a list of values."""
    total = 0
    for v in values:
        total = add(total, v)
    return total
)PY";

    constexpr auto kLate = R"PY(def arrived_late():
    return "late"
)PY";

    constexpr auto kMainGo = R"GO(package main

import "fmt"

// Point is a location on the plane.
type Point struct {
	X, Y int
}

// Scale multiplies both coordinates by k.
func (p Point) Scale(k int) Point {
	return Point{p.X * k, p.Y * k}
}

// Distance2 returns the squared distance
// between two points.
func Distance2(a, b Point) int {
	dx, dy := a.X-b.X, a.Y-b.Y
	return dx*dx + dy*dy
}

func main() {
	fmt.Println(Distance2(Point{0, 0}, Point{3, 4}))
}
)GO";

    constexpr auto kUtilRs = R"RS(/// Clamps a value into a range.
pub fn clamp(v: i64, lo: i64, hi: i64) -> i64 {
    v.max(lo).min(hi)
}

/// Supported shapes.
pub enum Shape {
    Circle(f64),
    Square(f64),
}

pub trait Area {
    fn area(&self) -> f64;
}

impl Area for Shape {
    /// Area of the shape.
    fn area(&self) -> f64 {
        match self {
            Shape::Circle(r) => 3.14159 * r * r,
            Shape::Square(s) => s * s,
        }
    }
}
)RS";
} // namespace

auto build_polyglot_repo(const fs::path& dir) -> PolyglotRepo
{
    RepoBuilder b(dir);
    PolyglotRepo r;
    r.dir = dir;
    b.write("src/calc.py", kCalcV1);
    b.write("cmd/main.go", kMainGo);
    b.write("src/util.rs", kUtilRs);
    b.write("notes/readme.txt", "def not_code():\n    pass\n");
    r.p1 = b.commit("Initial sources", kAliceId, at(2024, 1, 5, 12));
    b.write("src/calc.py", std::string(kCalcV1) + kCalcAddition);
    b.write("src/late.py", kLate);
    r.p2 = b.commit("Add late additions", kBobId, at(2024, 1, 6, 12));
    return r;
}

// Lifespan --------------------------------------------------------------------------------

auto build_lifespan_repo(const fs::path& dir, const fs::path& recordings_dir) -> LifespanRepo
{
    LifespanRepo r;
    r.dir = dir;
    r.created_at = at(2024, 5, 10, 12);
    r.closed_at = at(2024, 5, 20, 12);
    r.issue_url = "https://github.com/example/lifespan/issues/5";

    auto constexpr day = kSecondsPerDay;
    std::vector<std::pair<std::string, UnixTime>> plan {
        { "created-10d", r.created_at - 10 * day }, { "created-7d", r.created_at - 7 * day },
        { "created-1d", r.created_at - 1 * day },   { "closed+3d", r.closed_at + 3 * day },
        { "closed+7d", r.closed_at + 7 * day },     { "closed+8d", r.closed_at + 8 * day },
    };

    RepoBuilder b(dir);
    int n = 0;
    for (auto const& [label, t]: plan)
    {
        auto const& who = n % 2 == 0 ? kAliceId : kBobId;
        b.write("src/module.py", fmt::format("def step():\n    return {}\n", n));
        b.write(fmt::format("log/{}.txt", n), label + "\n");
        r.commits.emplace_back(label, b.commit("Change at " + label, who, t));
        r.times[label] = t;
        ++n;
    }

    record_github_issue(recordings_dir,
                        { r.issue_url,
                          "Step returns the wrong value",
                          "step() should return the current stage.",
                          "frank",
                          r.created_at,
                          r.closed_at,
                          { { "alice", "Looking into it.", r.created_at + 3600 } } });
    return r;
}

// Bulk ----------------------------------------------------------------------------------------

auto build_bulk_repo(const fs::path& dir, const fs::path& recordings_dir, int commit_count, std::size_t file_bytes)
    -> BulkRepo
{
    BulkRepo r;
    r.dir = dir;
    r.issue_url = fmt::format("https://github.com/example/bulk/issues/{}", commit_count);
    auto const base = at(2024, 6, 3, 8);

    RepoBuilder b(dir);
    for (int i = 0; i < commit_count; ++i)
    {
        std::string content;
        content.reserve(file_bytes + 64);
        for (int line = 0; content.size() < file_bytes; ++line)
            content += fmt::format("blob {:03} line {:06} lorem ipsum dolor sit amet consectetur\n", i, line);
        content.resize(file_bytes);
        content.back() = '\n';
        b.write(fmt::format("data/blob_{:03}.txt", i), content);
        r.commits.push_back(b.commit(fmt::format("Add data blob {}", i), i % 2 ? kBobId : kAliceId, base + i * 3600));
    }

    record_github_issue(recordings_dir,
                        { r.issue_url,
                          "Data blobs are corrupted",
                          "Some data blob has the wrong content.",
                          "gina",
                          base - kSecondsPerDay,
                          base + (commit_count + 1) * 3600,
                          {} });
    return r;
}

// Random ------------------------------------------------------------------------------------

auto build_random_repo(const fs::path& dir, std::uint32_t seed, int commit_count) -> RandomRepo
{
    std::mt19937 rng(seed);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };

    static const std::vector<Identity> people {
        { "alice", "alice@example.com" }, { "bob", "bob@example.com" }, { "Carol Díaz", "carol@example.org" },
        { "alice", "alice@work.example" },
    };
    static const std::vector<std::string> words { "alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "zeta" };
    static const std::vector<std::string> exts { ".py", ".rs", ".go", ".md", ".txt" };

    auto random_line = [&] { return words[pick(words.size())] + " " + words[pick(words.size())] + " " + std::to_string(pick(1000)); };
    auto random_content = [&] {
        std::string s;
        auto const lines = 3 + pick(8);
        for (std::size_t i = 0; i < lines; ++i)
            s += random_line() + "\n";
        return s;
    };

    RepoBuilder b(dir);
    RandomRepo r;
    r.dir = dir;

    // Each branch owns the files under its own directory, so merges never conflict.
    std::map<std::string, std::vector<std::string>> files;
    std::vector<std::string> branches { "main" };
    std::string current = "main";
    int fileCounter = 0;
    UnixTime t = at(2023, 9, 1, 9);

    auto new_path = [&](const std::string& branch) {
        auto const sub = chance(0.3) ? std::string("deep/er/") : chance(0.2) ? std::string("with space/") : std::string();
        return fmt::format("{}/{}f{}{}", branch, sub, fileCounter++, exts[pick(exts.size())]);
    };

    for (int i = 0; i < commit_count; ++i)
    {
        if (!chance(0.15))
            t += static_cast<UnixTime>(600 + pick(20'000));
        auto const& who = people[pick(people.size())];

        if (i > 3 && chance(0.12) && branches.size() < 4)
        {
            auto const name = fmt::format("topic{}", branches.size());
            b.create_branch(name);
            branches.push_back(name);
            current = name;
        }
        else if (i > 3 && chance(0.15))
        {
            auto const target = branches[pick(branches.size())];
            if (target != current)
            {
                b.checkout(target);
                current = target;
            }
        }

        if (branches.size() > 1 && chance(0.12))
        {
            auto const other = branches[pick(branches.size())];
            if (other != current)
            {
                r.commits.push_back(b.merge(other, fmt::format("Merge {} into {}", other, current), who, t));
                continue;
            }
        }

        auto& own = files[current];
        auto const action = own.empty() ? 0 : pick(10);
        std::string message;
        if (action <= 1)
        {
            auto const path = new_path(current);
            b.write(path, random_content());
            own.push_back(path);
            message = "Add " + path;
        }
        else if (action == 2 && own.size() > 1)
        {
            auto const k = pick(own.size());
            b.remove(own[k]);
            message = "Remove " + own[k];
            own.erase(own.begin() + static_cast<std::ptrdiff_t>(k));
        }
        else if (action == 3)
        {
            auto const k = pick(own.size());
            auto const to = new_path(current);
            b.rename(own[k], to);
            message = fmt::format("Rename {} to {}", own[k], to);
            own[k] = to;
        }
        else
        {
            auto const edits = 1 + pick(std::min<std::size_t>(own.size(), 3));
            for (std::size_t e = 0; e < edits; ++e)
            {
                auto const& path = own[pick(own.size())];
                std::ifstream in(dir / path);
                std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
                content += random_line() + "\n";
                b.write(path, content);
            }
            message = fmt::format("Edit {} file(s)\n\nstep {}", edits, i);
        }
        r.commits.push_back(b.commit(message, who, t));
    }
    b.checkout("main");
    if (!r.commits.empty())
        b.tag("v1");
    return r;
}

// Fixture set ---------------------------------------------------------------------------------

auto build_fixture_set(const fs::path& root) -> FixtureSet
{
    FixtureSet set;
    set.root = root;
    set.recordings = root / "recordings";
    set.scripts = root / "scripts";
    set.dataset = root / "dataset.tsv";
    if (fs::exists(set.recordings))
        fs::remove_all(set.recordings);

    set.fix = build_fix_repo(root / "repos" / "fixture");
    set.polyglot = build_polyglot_repo(root / "repos" / "polyglot");
    set.lifespan = build_lifespan_repo(root / "repos" / "lifespan", set.recordings);
    record_fix_issues(set.recordings);

    auto const& f = set.fix;
    auto const lifespanTruth = set.lifespan.commits[3].second; // closed+3d
    write_text(set.dataset,
               fmt::format("# issue_id\tissue_url\trepo_id\ttrue_links\n"
                           "fix-42\t{}\tfixture\t{};{}\n"
                           "fix-43\t{}\tfixture\t{}\n"
                           "FIX-7\t{}\tfixture\t{}\n"
                           "lifespan-5\t{}\tlifespan\t{};{}\n",
                           kFixIssueUrl, f.c1.str(), f.c3.str(),
                           kFixSecondIssueUrl, f.c3.str(),
                           kFixJiraUrl, f.c2.str(),
                           set.lifespan.issue_url, set.lifespan.commits[2].second.str(), lifespanTruth.str()));

    write_text(set.scripts / "finish_c4.script",
               fmt::format("issue_title\n"
                           "commits_of_author {{\"author_name\": \"alice\"}}\n"
                           "finish {{\"commit_hash\": \"{}\"}}\n",
                           f.c4.str()));
    write_text(set.scripts / "explore.script",
               fmt::format("issue_title\n"
                           "issue_participants\n"
                           "list_authors\n"
                           "list_files {{\"pattern\": \"src/**\"}}\n"
                           "commits_on_file {{\"file_name\": \"src/lib.rs\"}}\n"
                           "commit_diff {{\"commit_hash\": \"{0}\"}}\n"
                           "fetch_definition {{\"commit_hash\": \"{0}\", \"path\": \"src/lib.rs\", \"name\": \"parse_port\"}}\n"
                           "finish {{\"commit_hash\": \"{0}\"}}\n",
                           f.c4.str()));
    write_text(set.scripts / "give_up.script", "give_up\n");
    write_text(set.scripts / "oracle.script", "issue_title\nfinish {\"commit_hash\": \"${RESOLVING_COMMIT}\"}\n");
    return set;
}

} // namespace issuelink::fixtures
