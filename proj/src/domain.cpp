// SPDX-License-Identifier: Apache-2.0
#include <issuelink/domain.hpp>

#include <fmt/format.h>

#include <cctype>
#include <charconv>

namespace issuelink
{

auto CommitHash::parse(std::string_view text) -> std::optional<CommitHash>
{
    if (text.size() != 40)
        return std::nullopt;
    std::string hex;
    hex.reserve(40);
    for (char c: text)
    {
        if (!std::isxdigit(static_cast<unsigned char>(c)))
            return std::nullopt;
        hex.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return CommitHash(std::move(hex));
}

auto CommitHash::require(std::string_view text) -> CommitHash
{
    if (auto h = parse(text))
        return *h;
    throw ToolError(fmt::format("malformed commit hash '{}' ({} characters): expected the full "
                                "40-character hexadecimal hash",
                                text,
                                text.size()));
}

auto Author::identity_key() const -> std::string
{
    if (tracker_username)
        return *tracker_username;
    return name + " <" + email + ">";
}

auto commit_order_less(const CommitMeta& a, const CommitMeta& b) -> bool
{
    if (a.commit_time != b.commit_time)
        return a.commit_time < b.commit_time;
    return a.hash < b.hash;
}

auto to_string(ChangeKind kind) -> std::string_view
{
    switch (kind)
    {
        case ChangeKind::added: return "added";
        case ChangeKind::modified: return "modified";
        case ChangeKind::deleted: return "deleted";
        case ChangeKind::renamed: return "renamed";
    }
    return "modified";
}

auto CommitDiff::touches(std::string_view path) const -> bool
{
    for (auto const& f: files)
        if (f.path == path || (f.old_path && *f.old_path == path))
            return true;
    return false;
}

auto Pagination::make(int page, int page_size) -> Pagination
{
    if (page < 0)
        throw ToolError(fmt::format("invalid page {}: pages are numbered from 0", page));
    if (page_size < 1 || page_size > kMaxPageSize)
        throw ToolError(
            fmt::format("invalid page_size {}: must be between 1 and {}", page_size, kMaxPageSize));
    return Pagination { page, page_size };
}

auto TimeWindow::make(UnixTime start, UnixTime end) -> TimeWindow
{
    if (start > end)
        throw ToolError(fmt::format(
            "invalid time window: start {} is after end {}", format_utc(start), format_utc(end)));
    return TimeWindow { start, end };
}

void Budgets::validate() const
{
    if (max_iterations <= 0 || max_total_tokens <= 0 || feedback_threshold_bytes == 0)
        throw SetupError("budgets must all be positive");
}

auto SessionOutcome::finished(CommitHash hash) -> SessionOutcome
{
    return SessionOutcome { Kind::finished, std::move(hash), {} };
}

auto SessionOutcome::gave_up(std::string reason) -> SessionOutcome
{
    return SessionOutcome { Kind::gave_up, std::nullopt, std::move(reason) };
}

auto SessionOutcome::budget_exhausted(std::string reason) -> SessionOutcome
{
    return SessionOutcome { Kind::budget_exhausted, std::nullopt, std::move(reason) };
}

auto to_string(SessionOutcome::Kind kind) -> std::string_view
{
    switch (kind)
    {
        case SessionOutcome::Kind::finished: return "finished";
        case SessionOutcome::Kind::gave_up: return "gave_up";
        case SessionOutcome::Kind::budget_exhausted: return "budget_exhausted";
    }
    return "gave_up";
}

auto parse_outcome_kind(std::string_view text) -> std::optional<SessionOutcome::Kind>
{
    if (text == "finished")
        return SessionOutcome::Kind::finished;
    if (text == "gave_up")
        return SessionOutcome::Kind::gave_up;
    if (text == "budget_exhausted")
        return SessionOutcome::Kind::budget_exhausted;
    return std::nullopt;
}

// Howard Hinnant's civil-calendar algorithms.
auto days_from_civil(std::int64_t y, unsigned m, unsigned d) -> std::int64_t
{
    y -= m <= 2;
    auto const era = (y >= 0 ? y : y - 399) / 400;
    auto const yoe = static_cast<unsigned>(y - era * 400);
    auto const doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    auto const doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

namespace
{
    struct Civil
    {
        std::int64_t year;
        unsigned month;
        unsigned day;
    };

    auto civil_from_days(std::int64_t z) -> Civil
    {
        z += 719468;
        auto const era = (z >= 0 ? z : z - 146096) / 146097;
        auto const doe = static_cast<unsigned>(z - era * 146097);
        auto const yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        auto const y = static_cast<std::int64_t>(yoe) + era * 400;
        auto const doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        auto const mp = (5 * doy + 2) / 153;
        auto const d = doy - (153 * mp + 2) / 5 + 1;
        auto const m = mp < 10 ? mp + 3 : mp - 9;
        return Civil { y + (m <= 2), m, d };
    }

    auto read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) -> bool
    {
        if (pos + len > s.size())
            return false;
        auto const* first = s.data() + pos;
        auto const [ptr, ec] = std::from_chars(first, first + len, out);
        return ec == std::errc {} && ptr == first + len;
    }
} // namespace

auto format_utc(UnixTime t) -> std::string
{
    auto days = t / kSecondsPerDay;
    auto secs = t % kSecondsPerDay;
    if (secs < 0)
    {
        secs += kSecondsPerDay;
        --days;
    }
    auto const c = civil_from_days(days);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
                       c.year,
                       c.month,
                       c.day,
                       secs / 3600,
                       (secs / 60) % 60,
                       secs % 60);
}

auto parse_timestamp(std::string_view s) -> std::optional<UnixTime>
{
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!read_int(s, 0, 4, year) || s.size() < 10 || s[4] != '-' || !read_int(s, 5, 2, month)
        || s[7] != '-' || !read_int(s, 8, 2, day))
        return std::nullopt;
    if (month < 1 || month > 12 || day < 1 || day > 31)
        return std::nullopt;

    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' '))
    {
        if (!read_int(s, pos + 1, 2, hour) || s.size() < pos + 6 || s[pos + 3] != ':'
            || !read_int(s, pos + 4, 2, minute))
            return std::nullopt;
        pos += 6;
        if (pos < s.size() && s[pos] == ':')
        {
            if (!read_int(s, pos + 1, 2, second))
                return std::nullopt;
            pos += 3;
        }
        if (pos < s.size() && s[pos] == '.')
        {
            ++pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
                ++pos;
        }
    }
    if (hour > 23 || minute > 59 || second > 60)
        return std::nullopt;

    std::int64_t offset = 0;
    if (pos < s.size())
    {
        if (s[pos] == 'Z' || s[pos] == 'z')
            ++pos;
        else if (s[pos] == '+' || s[pos] == '-')
        {
            int const sign = s[pos] == '-' ? -1 : 1;
            int oh = 0, om = 0;
            if (!read_int(s, pos + 1, 2, oh))
                return std::nullopt;
            auto p = pos + 3;
            if (p < s.size() && s[p] == ':')
                ++p;
            if (!read_int(s, p, 2, om))
                return std::nullopt;
            offset = sign * (oh * 3600 + om * 60);
            pos = p + 2;
        }
        if (pos != s.size())
            return std::nullopt;
    }

    auto const days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
    return days * kSecondsPerDay + hour * 3600 + minute * 60 + second - offset;
}

} // namespace issuelink
