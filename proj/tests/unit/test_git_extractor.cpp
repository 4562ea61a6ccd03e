// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/git_extractor.hpp>

#include <gtest/gtest.h>

using namespace issuelink;
using testing_support::shared;

namespace
{
auto hashes(const std::vector<CommitMeta>& commits) -> std::vector<CommitHash>
{
    std::vector<CommitHash> out;
    for (auto const& c: commits)
        out.push_back(c.hash);
    return out;
}

struct Fix
{
    std::shared_ptr<const GitRepository> repo;
    std::shared_ptr<const UnifiedHistory> history;
    fixtures::FixRepo const& ids;

    auto extractor(TimeWindow w) const -> GitExtractor { return GitExtractor(repo, history, LifespanFilter { w }); }
    auto issue_extractor() const -> GitExtractor
    {
        return GitExtractor(repo,
                            history,
                            LifespanFilter::for_issue(fixtures::kFixIssueCreated, fixtures::kFixIssueClosed, 0));
    }
    auto time_of(const CommitHash& h) const -> UnixTime { return history->find(h)->commit_time; }
};

auto fix() -> const Fix&
{
    static Fix const f = [] {
        auto repo = std::make_shared<const GitRepository>(GitRepository::open(shared().fix.dir));
        auto history = std::make_shared<const UnifiedHistory>(UnifiedHistory::load(*repo));
        return Fix { repo, history, shared().fix };
    }();
    return f;
}

auto page(int p, int size) -> Pagination
{
    return Pagination::make(p, size);
}
} // namespace

TEST(UnifiedHistory, MergesBranchesInCommitTimeOrder)
{
    auto const& f = fix();
    EXPECT_EQ(hashes(f.history->commits()), (std::vector<CommitHash> { f.ids.c1, f.ids.c2, f.ids.c3, f.ids.c4 }));
}

TEST(LifespanFilter, AddsAWeekOnEachSide)
{
    auto l = LifespanFilter::for_issue(1000000, 2000000, 0);
    EXPECT_EQ(l.window.start, 1000000 - 7 * 86400);
    EXPECT_EQ(l.window.end, 2000000 + 7 * 86400);
    auto open = LifespanFilter::for_issue(1000000, std::nullopt, 3000000);
    EXPECT_EQ(open.window.end, 3000000);
}

TEST(GitExtractor, ListCommitsReturnsTheUnifiedHistory)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    EXPECT_EQ(hashes(g.list_commits(page(0, 10))), (std::vector<CommitHash> { f.ids.c1, f.ids.c2, f.ids.c3, f.ids.c4 }));
    EXPECT_TRUE(g.list_commits(page(5, 10)).empty());
}

TEST(GitExtractor, ListCommitsHonoursAnExplicitWindow)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    auto w = TimeWindow::make(f.time_of(f.ids.c3), f.time_of(f.ids.c4));
    EXPECT_EQ(hashes(g.list_commits(page(0, 10), w)), (std::vector<CommitHash> { f.ids.c3, f.ids.c4 }));
}

TEST(GitExtractor, ListAuthors)
{
    auto const& f = fix();
    auto authors = f.issue_extractor().list_authors();
    ASSERT_EQ(authors.size(), 2u);
    EXPECT_EQ(authors[0].name, "alice");
    EXPECT_EQ(authors[0].email, "alice@example.com");
    EXPECT_EQ(authors[1].name, "bob");

    auto t3 = f.time_of(f.ids.c3);
    auto narrow = f.extractor(TimeWindow::make(t3, t3)).list_authors();
    ASSERT_EQ(narrow.size(), 1u);
    EXPECT_EQ(narrow[0].name, "bob");
}

TEST(GitExtractor, CommitsOfAuthor)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    EXPECT_EQ(hashes(g.commits_of_author({ "alice", std::nullopt }, page(0, 20))),
              (std::vector<CommitHash> { f.ids.c1, f.ids.c2, f.ids.c4 }));
    EXPECT_EQ(hashes(g.commits_of_author({ "ALICE", std::nullopt }, page(0, 20))).size(), 3u);
    EXPECT_EQ(hashes(g.commits_of_author({ "alice", std::string("alice@example.com") }, page(0, 20))).size(), 3u);
    EXPECT_TRUE(g.commits_of_author({ "alice", std::string("other@example.com") }, page(0, 20)).empty());
    EXPECT_TRUE(g.commits_of_author({ "carol", std::nullopt }, page(0, 20)).empty());
    EXPECT_EQ(hashes(g.commits_of_author({ "bob", std::nullopt }, page(0, 1))), (std::vector<CommitHash> { f.ids.c3 }));
}

TEST(GitExtractor, ListFilesByGlob)
{
    auto g = fix().issue_extractor();
    EXPECT_EQ(g.list_files("src/*.rs"), (std::vector<std::string> { "src/app.rs", "src/lib.rs" }));
    EXPECT_EQ(g.list_files("**"), (std::vector<std::string> { "README.md", "src/app.rs", "src/lib.rs" }));
    EXPECT_TRUE(g.list_files("docs/*").empty());
    EXPECT_THROW((void) g.list_files("src/[x"), ToolError);
}

TEST(GitExtractor, CommitsOnFile)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    EXPECT_EQ(hashes(g.commits_on_file("src/app.rs", page(0, 20))), (std::vector<CommitHash> { f.ids.c1, f.ids.c3 }));
    EXPECT_TRUE(g.commits_on_file("ghost.txt", page(0, 20)).empty());
    EXPECT_EQ(hashes(g.commits_on_file("README.md", page(0, 20))), (std::vector<CommitHash> { f.ids.c2 }));
}

TEST(GitExtractor, CommitDiff)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    auto d3 = g.commit_diff(f.ids.c3.str());
    ASSERT_EQ(d3.files.size(), 1u);
    EXPECT_EQ(d3.files[0].path, "src/app.rs");
    EXPECT_EQ(d3.files[0].change_kind, ChangeKind::modified);
    EXPECT_TRUE(d3.touches("src/app.rs"));
    ASSERT_FALSE(d3.files[0].hunks.empty());
    EXPECT_NE(d3.files[0].hunks[0].find("name.trim()"), std::string::npos);

    auto d1 = g.commit_diff(f.ids.c1.str());
    ASSERT_EQ(d1.files.size(), 1u);
    EXPECT_EQ(d1.files[0].change_kind, ChangeKind::added);

    try
    {
        (void) g.commit_diff(std::string(40, '0'));
        FAIL();
    }
    catch (ToolError const& e)
    {
        EXPECT_NE(std::string(e.what()).find("commit not found"), std::string::npos);
    }
    EXPECT_THROW((void) g.commit_diff("abc"), ToolError);
}

TEST(GitExtractor, CommitMetadata)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    auto m = g.commit_metadata(f.ids.c2.str());
    EXPECT_EQ(m.author.name, "alice");
    EXPECT_EQ(m.message, "Add README");
    EXPECT_EQ(format_utc(m.commit_time), "2024-03-12T10:00:00Z");
    auto upper = f.ids.c2.str();
    for (auto& c: upper)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    EXPECT_EQ(g.commit_metadata(upper), m);
}

TEST(GitExtractor, RepeatedCallsAreIdentical)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    SchemaRegistry r(g.bindings());
    for (auto const& name: r.names())
    {
        nlohmann::json args = nlohmann::json::object();
        auto const* schema = r.find(name);
        for (auto const& p: schema->parameters)
            if (p.required)
                args[p.name] = p.name == "commit_hash" ? nlohmann::json(f.ids.c3.str())
                               : p.name == "pattern"   ? nlohmann::json("**")
                               : p.name == "file_name" ? nlohmann::json("src/app.rs")
                                                       : nlohmann::json("alice");
        auto a = r.route({ "call_1", name, args });
        auto b = r.route({ "call_1", name, args });
        EXPECT_FALSE(a.is_error) << name << ": " << a.payload;
        EXPECT_EQ(a.payload, b.payload) << name;
    }
}

TEST(GitExtractor, PagesConcatenateToTheFullListing)
{
    auto const& f = fix();
    auto g = f.issue_extractor();
    auto const all = g.all_commits_in(g.lifespan());
    for (int size = 1; size <= 5; ++size)
    {
        std::vector<CommitMeta> joined;
        for (int p = 0;; ++p)
        {
            auto chunk = g.list_commits(page(p, size));
            if (chunk.empty())
                break;
            joined.insert(joined.end(), chunk.begin(), chunk.end());
        }
        EXPECT_EQ(joined, all) << "page size " << size;
    }
}

TEST(GitExtractor, ToolPayloadsCarryPaginationHints)
{
    auto g = fix().issue_extractor();
    SchemaRegistry r(g.bindings());
    auto full = r.route({ "c", "list_commits", { { "page_size", 2 } } });
    EXPECT_NE(full.payload.find("more results may exist on page 1"), std::string::npos);
    auto empty = r.route({ "c", "list_commits", { { "page", 9 } } });
    EXPECT_NE(empty.payload.find("(no results)"), std::string::npos);
    auto bad = r.route({ "c", "list_commits", { { "since", "last week" } } });
    EXPECT_TRUE(bad.is_error);
    auto oversized = r.route({ "c", "list_commits", { { "page_size", 101 } } });
    EXPECT_TRUE(oversized.is_error);
}

TEST(GitExtractor, DefaultPageSizeIsConfigurable)
{
    auto g = fix().issue_extractor();
    g.set_default_page_size(1);
    SchemaRegistry r(g.bindings());
    auto one = r.route({ "c", "list_commits", nlohmann::json::object() });
    EXPECT_NE(one.payload.find("1 result(s)"), std::string::npos);
    EXPECT_THROW(g.set_default_page_size(0), SetupError);
    EXPECT_THROW(g.set_default_page_size(101), SetupError);
}

TEST(GitExtractor, EmptyRepositoryHasEmptyListings)
{
    testing_support::TempDir dir;
    fixtures::RepoBuilder b(dir.path());
    auto repo = std::make_shared<const GitRepository>(GitRepository::open(dir.path()));
    auto history = std::make_shared<const UnifiedHistory>(UnifiedHistory::load(*repo));
    GitExtractor g(repo, history, LifespanFilter { TimeWindow::make(0, 4'000'000'000) });
    EXPECT_TRUE(g.list_commits(page(0, 20)).empty());
    EXPECT_TRUE(g.list_authors().empty());
    EXPECT_TRUE(g.list_files("**").empty());
}

TEST(GitRepository, OpenRejectsNonRepositories)
{
    testing_support::TempDir dir;
    EXPECT_THROW((void) GitRepository::open(dir.path()), SetupError);
    EXPECT_THROW((void) GitRepository::open(dir.path() / "missing"), SetupError);
}

TEST(GitRepository, ReadsBlobsWithoutTouchingTheWorktree)
{
    auto const& f = fix();
    auto blob = f.repo->read_blob(f.ids.c1, "src/app.rs");
    ASSERT_TRUE(blob);
    EXPECT_NE(blob->find("greet(\"world\")"), std::string::npos);
    EXPECT_FALSE(f.repo->read_blob(f.ids.c1, "src/lib.rs"));
    EXPECT_EQ(f.repo->git({ "status", "--porcelain" }), "");
}
