// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace issuelink
{

struct ProcessResult
{
    int exit_code = -1;
    std::string out;
    std::string err;

    [[nodiscard]] auto ok() const noexcept -> bool { return exit_code == 0; }
};

using EnvOverrides = std::vector<std::pair<std::string, std::string>>;

/// Runs argv[0] (searched on PATH) without a shell, capturing stdout and
/// stderr. Throws std::system_error if the process can not be started.
auto run_process(const std::vector<std::string>& argv,
                 const std::filesystem::path& cwd = {},
                 const EnvOverrides& env = {},
                 std::string_view stdin_data = {}) -> ProcessResult;

} // namespace issuelink
