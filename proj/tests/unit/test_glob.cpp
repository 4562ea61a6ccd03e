// SPDX-License-Identifier: Apache-2.0
#include "git_oracle.hpp"

#include <issuelink/domain.hpp>
#include <issuelink/glob.hpp>

#include <gtest/gtest.h>

#include <regex>

using issuelink::Glob;

TEST(Glob, StarStaysWithinOneSegment)
{
    Glob g("src/*.rs");
    EXPECT_TRUE(g.matches("src/app.rs"));
    EXPECT_TRUE(g.matches("src/.rs"));
    EXPECT_FALSE(g.matches("src/sub/app.rs"));
    EXPECT_FALSE(g.matches("lib/app.rs"));
    EXPECT_FALSE(g.matches("src/app.rsx"));
}

TEST(Glob, DoubleStarCrossesSegmentsAndMayBeEmpty)
{
    Glob g("src/**/*.py");
    EXPECT_TRUE(g.matches("src/a.py"));
    EXPECT_TRUE(g.matches("src/x/y/a.py"));
    EXPECT_FALSE(g.matches("lib/a.py"));
    EXPECT_TRUE(Glob("**").matches("a/b/c"));
    EXPECT_TRUE(Glob("**").matches("README.md"));
    EXPECT_TRUE(Glob("**/README.md").matches("README.md"));
    EXPECT_TRUE(Glob("**/README.md").matches("docs/README.md"));
}

TEST(Glob, QuestionMarkAndClasses)
{
    EXPECT_TRUE(Glob("file?.txt").matches("file1.txt"));
    EXPECT_FALSE(Glob("file?.txt").matches("file10.txt"));
    EXPECT_FALSE(Glob("a?b").matches("a/b"));
    EXPECT_TRUE(Glob("[abc].c").matches("b.c"));
    EXPECT_FALSE(Glob("[abc].c").matches("d.c"));
    EXPECT_TRUE(Glob("[a-c].c").matches("c.c"));
    EXPECT_TRUE(Glob("[!a].c").matches("b.c"));
    EXPECT_FALSE(Glob("[!a].c").matches("a.c"));
}

TEST(Glob, LiteralPathsMatchThemselvesOnly)
{
    EXPECT_TRUE(Glob("with space/file (1).txt").matches("with space/file (1).txt"));
    EXPECT_FALSE(Glob("a.b").matches("axb"));
    EXPECT_FALSE(Glob("src").matches("src/app.rs"));
}

TEST(Glob, InvalidPatternsAreToolErrors)
{
    EXPECT_THROW(Glob(""), issuelink::ToolError);
    EXPECT_THROW(Glob("src/[ab"), issuelink::ToolError);
}

TEST(Glob, AgreesWithTheRegexOracle)
{
    std::vector<std::string> const patterns { "*", "**", "*.rs", "src/*", "src/**", "**/*.txt", "a/**/b", "?/?", "[ab]*/**/x?" };
    std::vector<std::string> const paths { "a", "a.rs", "src/a.rs", "src/x/a.rs", "a/b", "a/x/b", "a/x/y/b", "x/y",
                                           "b/q/x1", "a.txt", "d/e/f.txt", "src", "ab/x", "b/xx" };
    for (auto const& p: patterns)
    {
        Glob g(p);
        auto const re = testing_support::glob_to_regex(p);
        for (auto const& path: paths)
            EXPECT_EQ(g.matches(path), std::regex_match(path, re)) << p << " vs " << path;
    }
}
