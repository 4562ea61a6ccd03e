// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/backends.hpp>
#include <issuelink/fixtures.hpp>
#include <issuelink/orchestrator.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace testing_support
{

namespace fs = std::filesystem;

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir
{
  public:
    explicit TempDir(const std::string& prefix = "issuelink-test");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    auto operator=(const TempDir&) -> TempDir& = delete;

    [[nodiscard]] auto path() const -> const fs::path& { return _path; }

  private:
    fs::path _path;
};

/// Process-wide fixtures, built on first use into one temp directory.
struct SharedFixtures
{
    fs::path root;
    fs::path recordings;
    issuelink::fixtures::FixRepo fix;
    issuelink::fixtures::PolyglotRepo polyglot;
    issuelink::fixtures::LifespanRepo lifespan;
};

auto shared() -> const SharedFixtures&;

/// A bulk repository whose files are `file_bytes` long, cached per size.
auto bulk(int commit_count, std::size_t file_bytes) -> const issuelink::fixtures::BulkRepo&;

/// Session inputs for `issue_url` over `repo_dir`, using recorded issues.
auto inputs_for(const std::string& issue_url, const fs::path& repo_dir) -> issuelink::SessionInputs;

/// Runs the scripted session `script` against FIX and issue 42 (or the given
/// issue and repo). `backend_out` receives the backend for wire inspection.
auto run_scripted(const std::string& script,
                  const issuelink::Budgets& budgets = {},
                  const std::string& issue_url = std::string(issuelink::fixtures::kFixIssueUrl),
                  const fs::path& repo_dir = {},
                  std::shared_ptr<issuelink::ScriptedBackend>* backend_out = nullptr) -> issuelink::SessionResult;

/// A RetryPolicy that never sleeps.
auto no_sleep_retry(int attempts = 3) -> issuelink::RetryPolicy;

auto read_text(const fs::path& file) -> std::string;

} // namespace testing_support
