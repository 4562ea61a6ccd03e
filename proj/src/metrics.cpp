// SPDX-License-Identifier: Apache-2.0
#include <issuelink/metrics.hpp>

#include <algorithm>
#include <stdexcept>

namespace issuelink
{

using nlohmann::ordered_json;

auto record(const std::vector<CallLogEntry>& call_log, const TokenLedger& ledger, double wall_time_s, double price_per_token)
    -> SessionMetrics
{
    SessionMetrics m;
    for (auto const& entry: call_log)
    {
        ++m.call_counts[entry.call.name];
        m.call_sequence.push_back(entry.call.name);
    }
    m.wall_time_s = wall_time_s;
    m.total_tokens = ledger.consumed_total();
    m.estimated_cost = static_cast<double>(m.total_tokens) * price_per_token;
    return m;
}

auto median(std::vector<double> values) -> double
{
    if (values.empty())
        return 0;
    std::sort(values.begin(), values.end());
    auto const n = values.size();
    return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

auto aggregate(const std::vector<SessionMetrics>& metrics) -> AggregateMetrics
{
    if (metrics.empty())
        throw std::invalid_argument("aggregate needs at least one session");

    AggregateMetrics a;
    a.sessions = metrics.size();
    std::map<std::string, double> sums;
    std::vector<double> times, tokens, costs;
    for (auto const& m: metrics)
    {
        for (auto const& [name, count]: m.call_counts)
            sums[name] += count;
        times.push_back(m.wall_time_s);
        tokens.push_back(static_cast<double>(m.total_tokens));
        costs.push_back(m.estimated_cost);
    }
    for (auto const& [name, sum]: sums)
        a.mean_calls[name] = sum / static_cast<double>(metrics.size());
    a.median_wall_time_s = median(times);
    a.median_tokens = median(tokens);
    a.median_cost = median(costs);
    return a;
}

auto to_json(const SessionMetrics& m) -> ordered_json
{
    ordered_json j;
    j["call_counts"] = m.call_counts;
    j["call_sequence"] = m.call_sequence;
    j["wall_time_s"] = m.wall_time_s;
    j["total_tokens"] = m.total_tokens;
    j["estimated_cost_usd"] = m.estimated_cost;
    return j;
}

auto to_json(const AggregateMetrics& m) -> ordered_json
{
    ordered_json j;
    j["sessions"] = m.sessions;
    j["mean_calls_per_issue"] = m.mean_calls;
    j["median_wall_time_s"] = m.median_wall_time_s;
    j["median_tokens"] = m.median_tokens;
    j["median_cost_usd"] = m.median_cost;
    return j;
}

auto session_metrics_from_json(const nlohmann::json& j) -> SessionMetrics
{
    SessionMetrics m;
    m.call_counts = j.at("call_counts").get<std::map<std::string, int>>();
    m.call_sequence = j.at("call_sequence").get<std::vector<std::string>>();
    m.wall_time_s = j.at("wall_time_s").get<double>();
    m.total_tokens = j.at("total_tokens").get<std::int64_t>();
    m.estimated_cost = j.at("estimated_cost_usd").get<double>();
    return m;
}

void write_metrics_line(std::ostream& out, const SessionMetrics& m, const ordered_json& extra)
{
    ordered_json line = extra.is_object() ? extra : ordered_json::object();
    auto const fields = to_json(m);
    for (auto const& [key, value]: fields.items())
        line[key] = value;
    out << line.dump() << '\n';
}

} // namespace issuelink
