// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/domain.hpp>
#include <issuelink/process.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace issuelink
{

/// A commit together with the paths its first-parent diff touches.
struct HistoryEntry
{
    CommitMeta meta;
    std::vector<CommitHash> parents;
    /// Repo-relative paths; a rename contributes both its old and new name.
    std::vector<std::string> touched_paths;
};

/// Read-only access to a local clone through the `git` executable.
class GitRepository
{
  public:
    /// Throws SetupError when `path` is not inside a git repository.
    static auto open(const std::filesystem::path& path) -> GitRepository;

    /// A local path is opened directly. A clone URL is mirrored into
    /// `cache_dir` (keyed by a hash of the URL) on first use and reused after.
    static auto open_or_clone(std::string_view source, const std::filesystem::path& cache_dir)
        -> GitRepository;

    [[nodiscard]] static auto looks_like_url(std::string_view source) -> bool;

    [[nodiscard]] auto path() const -> const std::filesystem::path& { return _path; }

    /// Every commit reachable from a branch (local or remote-tracking) or a
    /// tag, once each, with its first-parent touched paths.
    [[nodiscard]] auto read_history() const -> std::vector<HistoryEntry>;

    [[nodiscard]] auto has_commit(const CommitHash& hash) const -> bool;

    /// Diff against the first parent, or against the empty tree for roots.
    /// Throws ToolError("commit not found") for unknown hashes.
    [[nodiscard]] auto diff(const CommitHash& hash) const -> CommitDiff;

    /// File content at `commit`, or nullopt when the path does not exist there.
    [[nodiscard]] auto read_blob(const CommitHash& commit, std::string_view path) const
        -> std::optional<std::string>;

    /// Runs `git <args>` in the repository. Throws std::runtime_error on a
    /// non-zero exit.
    auto git(std::vector<std::string> args) const -> std::string;

    /// Like git(), but returns the raw result instead of throwing.
    auto try_git(std::vector<std::string> args) const -> ProcessResult;

  private:
    explicit GitRepository(std::filesystem::path path): _path(std::move(path)) {}
    std::filesystem::path _path;
};

/// Environment that isolates git from user and system configuration.
[[nodiscard]] auto hermetic_git_env() -> EnvOverrides;

} // namespace issuelink
