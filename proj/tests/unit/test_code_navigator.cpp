// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/code_navigator.hpp>

#include <gtest/gtest.h>

using namespace issuelink;
using testing_support::shared;

namespace
{
auto navigator(const std::filesystem::path& dir) -> CodeNavigator
{
    auto repo = std::make_shared<const GitRepository>(GitRepository::open(dir));
    auto langs = std::make_shared<const LanguageRegistry>(LanguageRegistry::load(LanguageRegistry::default_directory()));
    return CodeNavigator(repo, langs);
}

auto fix_nav() -> const CodeNavigator&
{
    static auto const nav = navigator(shared().fix.dir);
    return nav;
}

auto error_of(const std::function<void()>& f) -> std::string
{
    try
    {
        f();
    }
    catch (ToolError const& e)
    {
        return e.what();
    }
    return "(no error)";
}

auto contains(const std::string& hay, std::string_view needle) -> bool
{
    return hay.find(needle) != std::string::npos;
}
} // namespace

TEST(CodeNavigator, FetchDefinitionReturnsTheWholeFunction)
{
    auto const c4 = shared().fix.c4.str();
    auto text = fix_nav().fetch_definition({ c4, "src/lib.rs", "parse_port" });
    EXPECT_TRUE(contains(text, "pub fn parse_port(text: &str) -> Option<u16> {\n    text.trim().parse().ok()\n}"));
    EXPECT_TRUE(contains(text, "lines 4-6"));
    EXPECT_FALSE(contains(text, "undocumented_helper"));
}

TEST(CodeNavigator, FileMissingAtAnEarlierCommit)
{
    auto const c1 = shared().fix.c1.str();
    EXPECT_TRUE(contains(error_of([&] { (void) fix_nav().fetch_definition({ c1, "src/lib.rs", "parse_port" }); }),
                         "file not found at commit"));
}

TEST(CodeNavigator, UnknownNameListsAvailableNames)
{
    auto const c4 = shared().fix.c4.str();
    auto e = error_of([&] { (void) fix_nav().fetch_definition({ c4, "src/lib.rs", "no_such_fn" }); });
    EXPECT_TRUE(contains(e, "definition not found"));
    EXPECT_TRUE(contains(e, "parse_port"));
    EXPECT_TRUE(contains(e, "undocumented_helper"));
    EXPECT_TRUE(contains(e, "Config"));
}

TEST(CodeNavigator, CaseInsensitiveFallback)
{
    auto const c4 = shared().fix.c4.str();
    EXPECT_TRUE(contains(fix_nav().fetch_definition({ c4, "src/lib.rs", "PARSE_PORT" }), "fn parse_port"));
}

TEST(CodeNavigator, FetchDocument)
{
    auto const c4 = shared().fix.c4.str();
    auto doc = fix_nav().fetch_document({ c4, "src/lib.rs", "parse_port" });
    EXPECT_TRUE(contains(doc, "Parses a port number from text."));
    EXPECT_TRUE(contains(doc, "Returns None when the text is not a number."));
    EXPECT_TRUE(contains(fix_nav().fetch_document({ c4, "src/lib.rs", "undocumented_helper" }), "no documentation"));
    // The doc comment sits above an attribute.
    EXPECT_TRUE(contains(fix_nav().fetch_document({ c4, "src/lib.rs", "Config" }), "Connection settings."));
}

TEST(CodeNavigator, UnknownCommit)
{
    auto e = error_of([&] { (void) fix_nav().fetch_document({ std::string(40, 'f'), "src/lib.rs", "parse_port" }); });
    EXPECT_TRUE(contains(e, "commit not found"));
    EXPECT_TRUE(contains(error_of([&] { (void) fix_nav().fetch_document({ "short", "src/lib.rs", "x" }); }),
                         "malformed commit hash"));
}

TEST(CodeNavigator, FetchLines)
{
    auto const& fx = shared().fix;
    EXPECT_EQ(fix_nav().fetch_lines_in_file(fx.c1.str(), "src/app.rs", 1, 3),
              "1: // Application entry point.\n2: fn main() {\n3:     println!(\"{}\", greet(\"world\"));");

    auto const lines = static_cast<int>(
        split_lines(*GitRepository::open(fx.dir).read_blob(fx.c4, "src/lib.rs")).size());
    auto all = fix_nav().fetch_lines_in_file(fx.c4.str(), "src/lib.rs", 1, 10000);
    EXPECT_TRUE(contains(all, std::to_string(lines) + ": }\n(end of file)"));

    EXPECT_TRUE(contains(error_of([&] { (void) fix_nav().fetch_lines_in_file(fx.c4.str(), "src/lib.rs", 5, 3); }),
                         "invalid line range"));
    EXPECT_TRUE(contains(error_of([&] { (void) fix_nav().fetch_lines_in_file(fx.c4.str(), "src/lib.rs", 0, 3); }),
                         "invalid line range"));
    EXPECT_TRUE(contains(error_of([&] { (void) fix_nav().fetch_lines_in_file(fx.c4.str(), "src/lib.rs", 500, 600); }),
                         "beyond end of file"));
    // Any file type can be read by line range.
    EXPECT_TRUE(contains(fix_nav().fetch_lines_in_file(fx.c2.str(), "README.md", 1, 1), "1: # fixture"));
}

TEST(CodeNavigator, UnsupportedLanguage)
{
    auto const& p = shared().polyglot;
    auto nav = navigator(p.dir);
    auto e = error_of([&] { (void) nav.fetch_definition({ p.p1.str(), "notes/readme.txt", "not_code" }); });
    EXPECT_TRUE(contains(e, "unsupported language"));
    EXPECT_TRUE(contains(e, ".py"));
}

TEST(CodeNavigator, WorkingTreeIsNeverTouched)
{
    auto const& fx = shared().fix;
    auto repo = GitRepository::open(fx.dir);
    auto const head = repo.git({ "rev-parse", "HEAD" });
    auto const status = repo.git({ "status", "--porcelain" });
    (void) fix_nav().fetch_definition({ fx.c4.str(), "src/lib.rs", "parse_port" });
    (void) fix_nav().fetch_lines_in_file(fx.c1.str(), "src/app.rs", 1, 2);
    EXPECT_EQ(repo.git({ "rev-parse", "HEAD" }), head);
    EXPECT_EQ(repo.git({ "status", "--porcelain" }), status);
}

TEST(CodeNavigator, PolyglotDefinitions)
{
    auto const& p = shared().polyglot;
    auto nav = navigator(p.dir);
    auto const c = p.p1.str();
    EXPECT_TRUE(contains(nav.fetch_definition({ c, "cmd/main.go", "Scale" }), "func (p Point) Scale(k int) Point {"));
    EXPECT_TRUE(contains(nav.fetch_document({ c, "cmd/main.go", "Distance2" }), "between two points."));
    EXPECT_TRUE(contains(nav.fetch_document({ c, "src/calc.py", "add" }), "Return the sum of a and b."));
    EXPECT_TRUE(contains(nav.fetch_document({ c, "src/calc.py", "sub" }), "no documentation"));
    EXPECT_TRUE(contains(nav.fetch_definition({ c, "src/calc.py", "Accumulator" }), "class Accumulator"));
    EXPECT_TRUE(contains(nav.fetch_document({ c, "src/util.rs", "area" }), "Area of the shape."));
}

TEST(CodeNavigator, LaterAdditionsOnlyExistLater)
{
    auto const& p = shared().polyglot;
    auto nav = navigator(p.dir);
    EXPECT_TRUE(contains(error_of([&] { (void) nav.fetch_definition({ p.p1.str(), "src/calc.py", "late_addition" }); }),
                         "definition not found"));
    EXPECT_TRUE(contains(nav.fetch_definition({ p.p2.str(), "src/calc.py", "late_addition" }), "def late_addition"));
    EXPECT_TRUE(contains(error_of([&] { (void) nav.fetch_definition({ p.p1.str(), "src/late.py", "arrived_late" }); }),
                         "file not found"));
}

TEST(CodeNavigator, BindingsUseTheDeclaredParameters)
{
    auto const& fx = shared().fix;
    SchemaRegistry r(fix_nav().bindings());
    EXPECT_EQ(r.names(), (std::vector<std::string> { "fetch_definition", "fetch_document", "fetch_lines_in_file" }));
    auto lines = r.route({ "c", "fetch_lines_in_file", { { "commit_hash", fx.c1.str() }, { "file", "src/app.rs" }, { "start", 2 }, { "end", 2 } } });
    EXPECT_EQ(lines.payload, "2: fn main() {");
}

TEST(LanguageRegistry, LoadFailuresAreSetupErrors)
{
    testing_support::TempDir dir;
    EXPECT_THROW((void) LanguageRegistry::load(dir.path()), SetupError);
}

TEST(SplitLines, TrailingNewlineDoesNotAddALine)
{
    EXPECT_EQ(split_lines("a\nb\n").size(), 2u);
    EXPECT_EQ(split_lines("a\nb").size(), 2u);
    EXPECT_EQ(split_lines("").size(), 0u);
    EXPECT_EQ(split_lines("\n").size(), 1u);
}
