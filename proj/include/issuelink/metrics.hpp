// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <issuelink/orchestrator.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace issuelink
{

/// USD per token: 0.0101 USD over 115,296 tokens, the reference median.
inline constexpr double kDefaultPricePerToken = 0.0000000876;

struct SessionMetrics
{
    std::map<std::string, int> call_counts;
    std::vector<std::string> call_sequence;
    double wall_time_s = 0;
    std::int64_t total_tokens = 0;
    double estimated_cost = 0; // total_tokens * price

    friend auto operator==(const SessionMetrics&, const SessionMetrics&) -> bool = default;
};

/// Pure: counts every logged call, and prices the consumed tokens.
[[nodiscard]] auto record(const std::vector<CallLogEntry>& call_log,
                          const TokenLedger& ledger,
                          double wall_time_s,
                          double price_per_token = kDefaultPricePerToken) -> SessionMetrics;

struct AggregateMetrics
{
    std::size_t sessions = 0;
    /// Mean number of calls per function per session (sessions that never
    /// called a function count as zero).
    std::map<std::string, double> mean_calls;
    double median_wall_time_s = 0;
    double median_tokens = 0;
    double median_cost = 0;
};

/// Throws std::invalid_argument for an empty input.
[[nodiscard]] auto aggregate(const std::vector<SessionMetrics>& metrics) -> AggregateMetrics;

/// 0 for an empty input.
[[nodiscard]] auto median(std::vector<double> values) -> double;

[[nodiscard]] auto to_json(const SessionMetrics& m) -> nlohmann::ordered_json;
[[nodiscard]] auto to_json(const AggregateMetrics& m) -> nlohmann::ordered_json;
[[nodiscard]] auto session_metrics_from_json(const nlohmann::json& j) -> SessionMetrics;

/// One line-delimited record. `extra` fields (issue id, run, outcome) come
/// first, in their insertion order.
void write_metrics_line(std::ostream& out, const SessionMetrics& m, const nlohmann::ordered_json& extra = {});

} // namespace issuelink
