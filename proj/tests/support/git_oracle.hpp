// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace testing_support
{

/// One commit as read straight from the object store.
struct OracleCommit
{
    std::string hash;
    std::vector<std::string> parents;
    std::string author_name;
    std::string author_email;
    std::string committer_name;
    std::string committer_email;
    std::int64_t author_time = 0;
    std::int64_t commit_time = 0;
    std::string message;
    std::set<std::string> touched; // paths whose blob differs from the first parent's tree
};

/// Brute-force model of a repository: walks every ref's ancestry with
/// `cat-file` and compares full trees with `ls-tree -r`.
class GitOracle
{
  public:
    explicit GitOracle(std::filesystem::path repo);

    /// Sorted by (commit_time, hash).
    [[nodiscard]] auto commits() const -> const std::vector<OracleCommit>& { return _commits; }
    [[nodiscard]] auto find(const std::string& hash) const -> const OracleCommit*;

    [[nodiscard]] auto in_window(std::int64_t start, std::int64_t end) const -> std::vector<std::string>;
    /// Distinct (name, email), sorted.
    [[nodiscard]] auto authors(std::int64_t start, std::int64_t end) const
        -> std::vector<std::pair<std::string, std::string>>;
    [[nodiscard]] auto of_author(std::int64_t start, std::int64_t end, const std::string& name,
                                 const std::optional<std::string>& email) const -> std::vector<std::string>;
    [[nodiscard]] auto files(std::int64_t start, std::int64_t end, const std::string& glob) const -> std::vector<std::string>;
    [[nodiscard]] auto on_file(std::int64_t start, std::int64_t end, const std::string& path) const
        -> std::vector<std::string>;
    [[nodiscard]] auto all_paths() const -> std::set<std::string>;

    /// Blob content at a commit, or nullopt.
    [[nodiscard]] auto blob(const std::string& commit, const std::string& path) const -> std::optional<std::string>;

    [[nodiscard]] auto git(const std::vector<std::string>& args) const -> std::string;

  private:
    [[nodiscard]] auto tree(const std::string& commit) const -> std::map<std::string, std::string>;

    std::filesystem::path _repo;
    std::vector<OracleCommit> _commits;
    std::map<std::string, std::size_t> _index;
};

/// Regular expression equivalent of a path glob: `*` and `?` stay inside one
/// segment, `**` crosses segments, `**/` may match no directory at all.
[[nodiscard]] auto glob_to_regex(const std::string& glob) -> std::regex;

} // namespace testing_support
