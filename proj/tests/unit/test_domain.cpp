// SPDX-License-Identifier: Apache-2.0
#include <issuelink/domain.hpp>

#include <gtest/gtest.h>

#include <ctime>

using namespace issuelink;

TEST(CommitHash, AcceptsFortyHexDigitsAndLowercases)
{
    auto h = CommitHash::parse("ABCDEF0123456789abcdef0123456789ABCDEF01");
    ASSERT_TRUE(h);
    EXPECT_EQ(h->str(), "abcdef0123456789abcdef0123456789abcdef01");
}

TEST(CommitHash, RejectsWrongLengthsAndNonHex)
{
    EXPECT_FALSE(CommitHash::parse(std::string(39, 'a')));
    EXPECT_FALSE(CommitHash::parse(std::string(41, 'a')));
    EXPECT_FALSE(CommitHash::parse(std::string(39, 'a') + "g"));
    EXPECT_FALSE(CommitHash::parse(""));
    EXPECT_THROW((void) CommitHash::require("abc"), ToolError);
}

TEST(CommitHash, RequireExplainsTheExpectedShape)
{
    try
    {
        (void) CommitHash::require("1234");
        FAIL();
    }
    catch (ToolError const& e)
    {
        EXPECT_NE(std::string(e.what()).find("40"), std::string::npos);
    }
}

TEST(Author, IdentityKeyUsesNameAndEmailForGitAndUsernameForTrackers)
{
    Author git { "alice", "alice@example.com", std::nullopt };
    Author tracker { "Alice A", "", std::string("alice") };
    EXPECT_EQ(git.identity_key(), "alice <alice@example.com>");
    EXPECT_EQ(tracker.identity_key(), "alice");
}

TEST(CommitOrder, SortsByTimeThenHash)
{
    CommitMeta a, b, c;
    a.hash = *CommitHash::parse(std::string(40, 'b'));
    a.commit_time = 10;
    b.hash = *CommitHash::parse(std::string(40, 'a'));
    b.commit_time = 10;
    c.hash = *CommitHash::parse(std::string(40, '0'));
    c.commit_time = 11;
    EXPECT_TRUE(commit_order_less(b, a));
    EXPECT_FALSE(commit_order_less(a, b));
    EXPECT_TRUE(commit_order_less(a, c));
}

TEST(Pagination, DefaultsAndBounds)
{
    Pagination p;
    EXPECT_EQ(p.page, 0);
    EXPECT_EQ(p.page_size, 20);
    EXPECT_NO_THROW((void) Pagination::make(0, 1));
    EXPECT_NO_THROW((void) Pagination::make(3, 100));
    EXPECT_THROW((void) Pagination::make(0, 0), ToolError);
    EXPECT_THROW((void) Pagination::make(0, 101), ToolError);
    EXPECT_THROW((void) Pagination::make(-1, 10), ToolError);
}

TEST(Pagination, SlicesPagesWithoutGapsOrDuplicates)
{
    std::vector<int> items(47);
    for (int i = 0; i < 47; ++i)
        items[static_cast<std::size_t>(i)] = i;
    for (int size: { 1, 5, 20, 46, 47, 100 })
    {
        std::vector<int> joined;
        for (int page = 0;; ++page)
        {
            auto chunk = paginate(items, Pagination::make(page, size));
            if (chunk.empty())
                break;
            joined.insert(joined.end(), chunk.begin(), chunk.end());
        }
        EXPECT_EQ(joined, items) << "page size " << size;
    }
    EXPECT_TRUE(paginate(items, Pagination::make(5, 10)).empty());
}

TEST(TimeWindow, IsClosedAndOrdered)
{
    auto w = TimeWindow::make(10, 20);
    EXPECT_TRUE(w.contains(10));
    EXPECT_TRUE(w.contains(20));
    EXPECT_FALSE(w.contains(9));
    EXPECT_FALSE(w.contains(21));
    EXPECT_THROW((void) TimeWindow::make(21, 20), ToolError);
}

TEST(Budgets, DefaultsMatchTheEvaluationSetup)
{
    Budgets b;
    EXPECT_EQ(b.max_iterations, 20);
    EXPECT_EQ(b.max_total_tokens, 200'000);
    EXPECT_EQ(b.feedback_threshold_bytes, 40'000u);
    EXPECT_NO_THROW(b.validate());
    EXPECT_THROW((Budgets { 0, 1, 1 }.validate()), SetupError);
    EXPECT_THROW((Budgets { 1, 0, 1 }.validate()), SetupError);
    EXPECT_THROW((Budgets { 1, 1, 0 }.validate()), SetupError);
}

TEST(SessionOutcome, FactoriesAndNames)
{
    auto h = *CommitHash::parse(std::string(40, 'c'));
    auto f = SessionOutcome::finished(h);
    EXPECT_EQ(f.kind, SessionOutcome::Kind::finished);
    EXPECT_EQ(f.commit_hash, h);
    EXPECT_FALSE(SessionOutcome::gave_up().commit_hash);
    EXPECT_EQ(SessionOutcome::budget_exhausted("tokens").reason, "tokens");
    for (auto k: { SessionOutcome::Kind::finished, SessionOutcome::Kind::gave_up, SessionOutcome::Kind::budget_exhausted })
        EXPECT_EQ(parse_outcome_kind(to_string(k)), k);
    EXPECT_FALSE(parse_outcome_kind("won"));
}

TEST(Time, FormatsUtc)
{
    EXPECT_EQ(format_utc(0), "1970-01-01T00:00:00Z");
    EXPECT_EQ(format_utc(1710061200), "2024-03-10T09:00:00Z");
}

TEST(Time, ParsesTrackerTimestampForms)
{
    EXPECT_EQ(parse_timestamp("2024-03-10T09:00:00Z"), 1710061200);
    EXPECT_EQ(parse_timestamp("2024-03-10T10:00:00.123+0100"), 1710061200);
    EXPECT_EQ(parse_timestamp("2024-03-10T04:30:00-04:30"), 1710061200);
    EXPECT_FALSE(parse_timestamp("yesterday"));
    EXPECT_FALSE(parse_timestamp("2024-13-01T00:00:00Z"));
}

TEST(Time, CivilDaysAgreeWithTimegm)
{
    for (int year: { 1970, 1999, 2000, 2024, 2100 })
        for (unsigned month: { 1u, 2u, 3u, 12u })
        {
            std::tm tm {};
            tm.tm_year = year - 1900;
            tm.tm_mon = static_cast<int>(month) - 1;
            tm.tm_mday = 28;
            EXPECT_EQ(days_from_civil(year, month, 28) * kSecondsPerDay, static_cast<std::int64_t>(timegm(&tm)));
        }
}

TEST(CommitDiff, TouchesOldAndNewNames)
{
    CommitDiff d;
    d.files.push_back({ "b.txt", std::string("a.txt"), ChangeKind::renamed, {} });
    EXPECT_TRUE(d.touches("a.txt"));
    EXPECT_TRUE(d.touches("b.txt"));
    EXPECT_FALSE(d.touches("c.txt"));
}
