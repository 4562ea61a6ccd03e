// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/schema_registry.hpp>

#include <gtest/gtest.h>

using namespace issuelink;
using nlohmann::json;

namespace
{
auto tool(std::string name, std::vector<ToolParam> params = {}, ToolHandler h = nullptr) -> ToolBinding
{
    if (!h)
        h = [n = name](const json&) { return "ran " + n; };
    return { { std::move(name), "test tool", ToolCategory::git, std::move(params) }, std::move(h) };
}

auto call(std::string name, json args = json::object()) -> ToolCall
{
    return { "call_1", std::move(name), std::move(args) };
}

auto session_registry() -> const SchemaRegistry&
{
    static auto backend = std::make_shared<ScriptedBackend>(std::vector<ScriptStep> {});
    static Session session(testing_support::inputs_for(std::string(fixtures::kFixIssueUrl), testing_support::shared().fix.dir),
                           *backend,
                           SessionConfig {});
    return session.registry();
}
} // namespace

TEST(SchemaRegistry, SessionRegistryHasTwentyToolsInFourGroups)
{
    auto const& r = session_registry();
    EXPECT_EQ(r.size(), 20u);
    std::map<ToolCategory, std::vector<std::string>> groups;
    for (auto const* s: r.schemas())
        groups[s->category].push_back(s->name);
    EXPECT_EQ(groups[ToolCategory::git],
              (std::vector<std::string> { "list_commits", "list_authors", "commits_of_author", "list_files",
                                          "commits_on_file", "commit_diff", "commit_metadata" }));
    EXPECT_EQ(groups[ToolCategory::issue],
              (std::vector<std::string> { "issue_title", "issue_description", "issue_created_at", "issue_closed_at",
                                          "issue_author", "issue_comments", "issue_participants" }));
    EXPECT_EQ(groups[ToolCategory::codebase],
              (std::vector<std::string> { "fetch_definition", "fetch_document", "fetch_lines_in_file" }));
    EXPECT_EQ(groups[ToolCategory::control], (std::vector<std::string> { "finish", "give_up", "feedback" }));
}

TEST(SchemaRegistry, EmptyRegistryRoutesNothing)
{
    SchemaRegistry r(std::vector<ToolBinding> {});
    EXPECT_TRUE(r.empty());
    auto result = r.route(call("issue_title"));
    EXPECT_TRUE(result.is_error);
    EXPECT_NE(result.payload.find("unknown function"), std::string::npos);
}

TEST(SchemaRegistry, DuplicateNamesAreRejectedWithTheCollision)
{
    EXPECT_THROW(SchemaRegistry({ tool("a"), tool("a") }), RegistrationError);
    SchemaRegistry r({ tool("a"), tool("b") });
    try
    {
        r.extend({ tool("c"), tool("b") });
        FAIL();
    }
    catch (RegistrationError const& e)
    {
        EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
    }
    // A rejected batch leaves the registry untouched.
    EXPECT_EQ(r.size(), 2u);
    EXPECT_FALSE(r.contains("c"));
}

TEST(SchemaRegistry, RoutesIssueTitleToTheRecordedTitle)
{
    auto result = session_registry().route(call("issue_title"));
    EXPECT_FALSE(result.is_error);
    EXPECT_EQ(result.payload, "Port parsing fails on padded input");
}

TEST(SchemaRegistry, UnknownNameListsAllTwentyValidNames)
{
    auto const& r = session_registry();
    auto result = r.route(call("nonexistent_tool"));
    ASSERT_TRUE(result.is_error);
    EXPECT_NE(result.payload.find("(20)"), std::string::npos);
    for (auto const& name: r.names())
        EXPECT_NE(result.payload.find(name), std::string::npos) << name;
}

TEST(SchemaRegistry, ShortHashIsAMalformedArgumentError)
{
    auto result = session_registry().route(call("commit_metadata", { { "commit_hash", std::string(39, 'a') } }));
    ASSERT_TRUE(result.is_error);
    EXPECT_NE(result.payload.find("malformed commit hash"), std::string::npos);
}

TEST(SchemaRegistry, ValidationRejectsWrongShapes)
{
    ToolSchema s { "t", "", ToolCategory::git,
                   { { "n", ParamType::integer, true, "", {} }, { "v", ParamType::string, false, "", { "x", "y" } } } };
    EXPECT_FALSE(validate_arguments(s, { { "n", 3 } }));
    EXPECT_FALSE(validate_arguments(s, { { "n", 3 }, { "v", "y" } }));
    EXPECT_TRUE(validate_arguments(s, json::object()));                 // missing required
    EXPECT_TRUE(validate_arguments(s, { { "n", "3" } }));               // wrong type
    EXPECT_TRUE(validate_arguments(s, { { "n", 3.5 } }));               // not an integer
    EXPECT_TRUE(validate_arguments(s, { { "n", 3 }, { "v", "z" } }));   // outside the enum
    EXPECT_TRUE(validate_arguments(s, { { "n", 3 }, { "extra", 1 } })); // unknown parameter
    EXPECT_TRUE(validate_arguments(s, json("not an object")));
}

TEST(SchemaRegistry, MalformedArgumentsNameTheSignature)
{
    SchemaRegistry r({ tool("t", { { "n", ParamType::integer, true, "", {} } }) });
    auto result = r.route(call("t", json("{broken")));
    ASSERT_TRUE(result.is_error);
    EXPECT_NE(result.payload.find("t(n: integer)"), std::string::npos);
}

TEST(SchemaRegistry, RouteIsTotalEvenWhenHandlersThrow)
{
    SchemaRegistry r({ tool("tool_error", {}, [](const json&) -> std::string { throw ToolError("bad input"); }),
                       tool("crash", {}, [](const json&) -> std::string { throw std::runtime_error("boom"); }) });
    auto a = r.route(call("tool_error"));
    auto b = r.route(call("crash"));
    EXPECT_TRUE(a.is_error);
    EXPECT_EQ(a.payload, "error: bad input");
    EXPECT_TRUE(b.is_error);
    EXPECT_NE(b.payload.find("internal failure"), std::string::npos);
}

TEST(SchemaRegistry, ByteSizeIsThePayloadLength)
{
    SchemaRegistry r({ tool("utf8", {}, [](const json&) { return std::string("h\xc3\xa9llo \xe2\x82\xac"); }) });
    auto result = r.route(call("utf8"));
    EXPECT_EQ(result.byte_size, result.payload.size());
    EXPECT_EQ(result.byte_size, 10u);
    auto err = r.route(call("missing"));
    EXPECT_EQ(err.byte_size, err.payload.size());
}

TEST(SchemaRegistry, JsonSchemaDeclaresEveryParameter)
{
    ToolSchema s { "t", "d", ToolCategory::git,
                   { { "a", ParamType::string, true, "first", {} }, { "b", ParamType::integer, false, "second", {} } } };
    auto j = s.parameters_json_schema();
    EXPECT_EQ(j["type"], "object");
    EXPECT_EQ(j["properties"]["a"]["type"], "string");
    EXPECT_EQ(j["properties"]["b"]["type"], "integer");
    EXPECT_EQ(j["required"], json::array({ "a" }));
    EXPECT_EQ(j["additionalProperties"], false);
    EXPECT_EQ(s.signature(), "t(a: string, b?: integer)");
}
