// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <issuelink/code_navigator.hpp>
#include <issuelink/http.hpp>
#include <issuelink/issue_extractor.hpp>

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace testing_support
{

using namespace issuelink;

TempDir::TempDir(const std::string& prefix)
{
    auto pattern = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
    if (!::mkdtemp(pattern.data()))
        throw std::runtime_error("mkdtemp failed");
    _path = pattern;
}

TempDir::~TempDir()
{
    std::error_code ec;
    fs::remove_all(_path, ec);
}

namespace
{
    auto fixture_dir() -> const TempDir&
    {
        static TempDir dir("issuelink-fixtures");
        return dir;
    }

    auto languages_impl() -> std::shared_ptr<const LanguageRegistry>
    {
        static auto registry =
            std::make_shared<const LanguageRegistry>(LanguageRegistry::load(LanguageRegistry::default_directory()));
        return registry;
    }

    std::mutex g_mutex;
} // namespace

auto shared() -> const SharedFixtures&
{
    static SharedFixtures const fx = [] {
        SharedFixtures f;
        f.root = fixture_dir().path();
        f.recordings = f.root / "recordings";
        f.fix = fixtures::build_fix_repo(f.root / "fix");
        f.polyglot = fixtures::build_polyglot_repo(f.root / "polyglot");
        f.lifespan = fixtures::build_lifespan_repo(f.root / "lifespan", f.recordings);
        fixtures::record_fix_issues(f.recordings);
        return f;
    }();
    return fx;
}

auto bulk(int commit_count, std::size_t file_bytes) -> const fixtures::BulkRepo&
{
    static std::map<std::pair<int, std::size_t>, fixtures::BulkRepo> cache;
    std::lock_guard lock(g_mutex);
    auto key = std::make_pair(commit_count, file_bytes);
    if (auto it = cache.find(key); it != cache.end())
        return it->second;
    auto const dir = fixture_dir().path() / fmt::format("bulk-{}-{}", commit_count, file_bytes);
    return cache.emplace(key, fixtures::build_bulk_repo(dir, shared().recordings, commit_count, file_bytes)).first->second;
}

auto inputs_for(const std::string& issue_url, const fs::path& repo_dir) -> SessionInputs
{
    RecordedTransport transport(shared().recordings);
    SessionInputs inputs;
    inputs.issue_url = issue_url;
    inputs.repo = std::make_shared<const GitRepository>(GitRepository::open(repo_dir));
    inputs.history = std::make_shared<const UnifiedHistory>(UnifiedHistory::load(*inputs.repo));
    inputs.issue = fetch_issue(issue_url, transport);
    inputs.languages = languages_impl();
    return inputs;
}

auto run_scripted(const std::string& script,
                  const Budgets& budgets,
                  const std::string& issue_url,
                  const fs::path& repo_dir,
                  std::shared_ptr<ScriptedBackend>* backend_out) -> SessionResult
{
    auto backend = std::make_shared<ScriptedBackend>(ScriptedBackend::from_text(script));
    if (backend_out)
        *backend_out = backend;
    SessionConfig config;
    config.budgets = budgets;
    config.clock = std::make_shared<FixedClock>(1'735'689'600.0); // 2025-01-01
    config.retry = no_sleep_retry();
    Session session(inputs_for(issue_url, repo_dir.empty() ? shared().fix.dir : repo_dir), *backend, config);
    return session.run();
}

auto no_sleep_retry(int attempts) -> RetryPolicy
{
    RetryPolicy r;
    r.max_attempts = attempts;
    r.sleep = [](std::chrono::milliseconds) {};
    return r;
}

auto read_text(const fs::path& file) -> std::string
{
    std::ifstream in(file, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace testing_support
