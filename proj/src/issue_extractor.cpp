// SPDX-License-Identifier: Apache-2.0
#include <issuelink/git_extractor.hpp>
#include <issuelink/issue_extractor.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <regex>

namespace issuelink
{

using nlohmann::json;

auto to_string(Platform platform) -> std::string_view
{
    return platform == Platform::jira ? "jira" : "github";
}

// URL handling ----------------------------------------------------------------

auto IssueLocator::parse(std::string_view url) -> IssueLocator
{
    static std::regex const github(R"(^(https?)://([^/]+)/([^/]+)/([^/]+)/issues/(\d+)/?(?:[?#].*)?$)");
    static std::regex const jira(R"(^(https?://.+?)/browse/([A-Za-z][A-Za-z0-9_]*-\d+)/?(?:[?#].*)?$)");

    std::string const text(url);
    std::smatch m;
    if (std::regex_match(text, m, github))
    {
        IssueLocator loc;
        loc.platform = Platform::github;
        auto const host = m[2].str();
        loc.api_base = host == "github.com" || host == "www.github.com" ? "https://api.github.com"
                                                                      : m[1].str() + "://" + host + "/api/v3";
        loc.owner = m[3].str();
        loc.repo = m[4].str();
        loc.key = m[5].str();
        return loc;
    }
    if (std::regex_match(text, m, jira))
    {
        IssueLocator loc;
        loc.platform = Platform::jira;
        loc.api_base = m[1].str();
        loc.key = m[2].str();
        std::transform(loc.key.begin(), loc.key.end(), loc.key.begin(), [](unsigned char c) { return std::toupper(c); });
        return loc;
    }
    throw SetupError(fmt::format("unrecognized issue URL '{}': expected a GitHub issue "
                                 "(https://github.com/OWNER/REPO/issues/N) or a Jira issue "
                                 "(https://HOST/browse/KEY-N)",
                                 url));
}

auto IssueLocator::issue_endpoint() const -> std::string
{
    if (platform == Platform::github)
        return fmt::format("{}/repos/{}/{}/issues/{}", api_base, owner, repo, key);
    return fmt::format("{}/rest/api/2/issue/{}?fields=summary,description,created,resolutiondate,creator,comment,status"
                       "&expand=changelog",
                       api_base,
                       key);
}

auto IssueLocator::comments_endpoint(int page_or_start, int per_page) const -> std::string
{
    if (platform == Platform::github)
        return fmt::format("{}/repos/{}/{}/issues/{}/comments?per_page={}&page={}", api_base, owner, repo, key, per_page, page_or_start);
    return fmt::format("{}/rest/api/2/issue/{}/comment?startAt={}&maxResults={}", api_base, key, page_or_start, per_page);
}

auto TrackerCredentials::from_environment() -> TrackerCredentials
{
    auto env = [](const char* name) -> std::optional<std::string> {
        if (auto const* v = std::getenv(name); v && *v)
            return std::string(v);
        return std::nullopt;
    };
    return TrackerCredentials { env("GITHUB_TOKEN"), env("JIRA_TOKEN"), env("JIRA_USER"), env("JIRA_PASSWORD") };
}

// Decoding ------------------------------------------------------------------------

namespace
{
    auto str_or_empty(const json& j, std::string_view key) -> std::string
    {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string())
            return {};
        return it->get<std::string>();
    }

    auto time_field(const json& j, std::string_view key) -> std::optional<UnixTime>
    {
        auto const text = str_or_empty(j, key);
        if (text.empty())
            return std::nullopt;
        return parse_timestamp(text);
    }

    auto require_time(const json& j, std::string_view key, std::string_view what) -> UnixTime
    {
        if (auto t = time_field(j, key))
            return *t;
        throw SetupError(fmt::format("{}: missing or invalid '{}' timestamp", what, key));
    }

    auto github_user(const json& j) -> Author
    {
        auto login = j.is_object() ? str_or_empty(j, "login") : std::string();
        return Author { login, {}, login };
    }

    auto jira_user(const json& j) -> Author
    {
        if (!j.is_object())
            return Author { {}, {}, std::string() };
        auto username = str_or_empty(j, "name");
        if (username.empty())
            username = str_or_empty(j, "accountId");
        if (username.empty())
            username = str_or_empty(j, "key");
        auto display = str_or_empty(j, "displayName");
        if (username.empty())
            username = display;
        return Author { display.empty() ? username : display, str_or_empty(j, "emailAddress"), username };
    }

    auto parse_json(const std::string& body, std::string_view what) -> json
    {
        auto j = json::parse(body, nullptr, false);
        if (j.is_discarded())
            throw SetupError(fmt::format("{}: response is not valid JSON", what));
        return j;
    }

    auto jira_comments(const json& list) -> std::vector<CommentMeta>
    {
        std::vector<CommentMeta> out;
        if (!list.is_array())
            return out;
        for (auto const& c: list)
            out.push_back({ jira_user(c.value("author", json::object())),
                            str_or_empty(c, "body"),
                            require_time(c, "created", "jira comment") });
        return out;
    }

    void sort_comments(std::vector<CommentMeta>& comments)
    {
        std::stable_sort(comments.begin(), comments.end(), [](auto const& a, auto const& b) {
            return a.created_at < b.created_at;
        });
    }
} // namespace

auto parse_github_issue(const std::string& issue_json) -> IssueSnapshot
{
    auto const j = parse_json(issue_json, "github issue");
    IssueSnapshot s;
    s.platform = Platform::github;
    s.key = j.contains("number") && j["number"].is_number() ? std::to_string(j["number"].get<long long>()) : std::string();
    s.title = str_or_empty(j, "title");
    s.description = str_or_empty(j, "body");
    s.created_at = require_time(j, "created_at", "github issue");
    s.closed_at = time_field(j, "closed_at");
    s.author = github_user(j.value("user", json::object()));
    return s;
}

auto parse_github_comments(const std::string& comments_json) -> std::vector<CommentMeta>
{
    auto const j = parse_json(comments_json, "github comments");
    if (!j.is_array())
        throw SetupError("github comments: expected a JSON array");
    std::vector<CommentMeta> out;
    for (auto const& c: j)
        out.push_back({ github_user(c.value("user", json::object())),
                        str_or_empty(c, "body"),
                        require_time(c, "created_at", "github comment") });
    return out;
}

auto parse_jira_issue(const std::string& issue_json) -> IssueSnapshot
{
    auto const j = parse_json(issue_json, "jira issue");
    auto const fields = j.value("fields", json::object());
    IssueSnapshot s;
    s.platform = Platform::jira;
    s.key = str_or_empty(j, "key");
    s.title = str_or_empty(fields, "summary");
    s.description = str_or_empty(fields, "description");
    s.created_at = require_time(fields, "created", "jira issue");
    s.closed_at = time_field(fields, "resolutiondate");
    s.author = jira_user(fields.value("creator", json::object()));

    if (!s.closed_at)
    {
        // Terminal status without a resolution date: use the last status change.
        auto const status = fields.value("status", json::object());
        auto const category = status.value("statusCategory", json::object());
        if (str_or_empty(category, "key") == "done")
        {
            std::optional<UnixTime> last;
            auto const histories = j.value("changelog", json::object()).value("histories", json::array());
            for (auto const& h: histories)
            {
                auto const items = h.value("items", json::array());
                bool const statusChange = std::any_of(items.begin(), items.end(), [](auto const& item) {
                    return item.value("field", std::string()) == "status";
                });
                if (auto t = time_field(h, "created"); statusChange && t)
                    last = std::max(last.value_or(*t), *t);
            }
            s.closed_at = last;
        }
    }

    auto const comment = fields.value("comment", json::object());
    s.comments = jira_comments(comment.value("comments", json::array()));
    sort_comments(s.comments);
    return s;
}

// Fetching --------------------------------------------------------------------------

namespace
{
    class Fetcher
    {
      public:
        Fetcher(HttpTransport& transport, const IssueLocator& loc, const TrackerCredentials& creds, const RetryPolicy& retry):
            _transport(transport), _loc(loc), _creds(creds), _retry(retry)
        {
        }

        auto get(const std::string& url) -> std::string
        {
            HttpRequest request;
            request.url = url;
            request.headers.emplace_back("Accept", _loc.platform == Platform::github ? "application/vnd.github+json" : "application/json");
            request.headers.emplace_back("User-Agent", "issuelink");
            if (_loc.platform == Platform::github && _creds.github_token)
                request.headers.emplace_back("Authorization", "Bearer " + *_creds.github_token);
            if (_loc.platform == Platform::jira)
            {
                if (_creds.jira_token)
                    request.headers.emplace_back("Authorization", "Bearer " + *_creds.jira_token);
                else if (_creds.jira_user && _creds.jira_password)
                    request.headers.emplace_back("Authorization",
                                                 "Basic " + base64(*_creds.jira_user + ":" + *_creds.jira_password));
            }

            std::string lastProblem;
            for (int attempt = 0; attempt < std::max(1, _retry.max_attempts); ++attempt)
            {
                if (attempt > 0)
                    _retry.wait(attempt - 1);
                HttpResponse response;
                try
                {
                    response = _transport.send(request);
                }
                catch (TransportError const& e)
                {
                    lastProblem = e.what();
                    continue;
                }
                if (is_rate_limited(response) || response.status >= 500)
                {
                    lastProblem = fmt::format("HTTP {}", response.status);
                    continue;
                }
                if (response.status == 404)
                    throw IssueNotFound(fmt::format("issue not found: {}", url));
                if (response.status < 200 || response.status >= 300)
                    throw SetupError(fmt::format("GET {} failed with HTTP {}", url, response.status));
                return std::move(response.body);
            }
            throw SetupError(fmt::format("GET {} failed after {} attempts: {}", url, _retry.max_attempts, lastProblem));
        }

      private:
        static auto base64(const std::string& in) -> std::string
        {
            static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
            std::string out;
            std::size_t i = 0;
            for (; i + 2 < in.size(); i += 3)
            {
                auto const n = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8)
                               | static_cast<unsigned char>(in[i + 2]);
                out += { table[(n >> 18) & 63], table[(n >> 12) & 63], table[(n >> 6) & 63], table[n & 63] };
            }
            if (i + 1 == in.size())
            {
                auto const n = static_cast<unsigned char>(in[i]) << 16;
                out += { table[(n >> 18) & 63], table[(n >> 12) & 63], '=', '=' };
            }
            else if (i + 2 == in.size())
            {
                auto const n = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8);
                out += { table[(n >> 18) & 63], table[(n >> 12) & 63], table[(n >> 6) & 63], '=' };
            }
            return out;
        }

        HttpTransport& _transport;
        const IssueLocator& _loc;
        const TrackerCredentials& _creds;
        const RetryPolicy& _retry;
    };

    constexpr int kCommentsPerPage = 100;
} // namespace

auto fetch_issue(std::string_view url, HttpTransport& transport, const TrackerCredentials& credentials, const RetryPolicy& retry)
    -> IssueSnapshot
{
    auto const loc = IssueLocator::parse(url);
    Fetcher fetcher(transport, loc, credentials, retry);

    if (loc.platform == Platform::github)
    {
        auto const body = fetcher.get(loc.issue_endpoint());
        auto snapshot = parse_github_issue(body);
        auto const expected = json::parse(body).value("comments", -1);
        for (int page = 1;; ++page)
        {
            auto batch = parse_github_comments(fetcher.get(loc.comments_endpoint(page, kCommentsPerPage)));
            auto const n = batch.size();
            snapshot.comments.insert(snapshot.comments.end(), batch.begin(), batch.end());
            if (n < static_cast<std::size_t>(kCommentsPerPage)
                || (expected >= 0 && snapshot.comments.size() >= static_cast<std::size_t>(expected)))
                break;
        }
        sort_comments(snapshot.comments);
        return snapshot;
    }

    auto const body = fetcher.get(loc.issue_endpoint());
    auto snapshot = parse_jira_issue(body);
    auto const comment = json::parse(body).value("fields", json::object()).value("comment", json::object());
    auto const total = comment.value("total", static_cast<int>(snapshot.comments.size()));
    // The embedded comment list may be truncated; page through the rest.
    while (static_cast<int>(snapshot.comments.size()) < total)
    {
        auto const page = parse_json(fetcher.get(loc.comments_endpoint(static_cast<int>(snapshot.comments.size()), kCommentsPerPage)),
                                     "jira comments");
        auto batch = jira_comments(page.value("comments", json::array()));
        if (batch.empty())
            break;
        snapshot.comments.insert(snapshot.comments.end(), batch.begin(), batch.end());
    }
    sort_comments(snapshot.comments);
    return snapshot;
}

// Extractor -----------------------------------------------------------------------------

IssueExtractor::IssueExtractor(IssueSnapshot snapshot): _snapshot(std::move(snapshot))
{
    sort_comments(_snapshot.comments);
}

auto IssueExtractor::issue_created_at() const -> std::string
{
    return format_utc(_snapshot.created_at);
}

auto IssueExtractor::issue_closed_at() const -> std::string
{
    return _snapshot.closed_at ? format_utc(*_snapshot.closed_at) : std::string(kUnresolved);
}

auto IssueExtractor::issue_comments(Pagination p) const -> std::vector<CommentMeta>
{
    return paginate(_snapshot.comments, p);
}

auto IssueExtractor::issue_participants() const -> std::vector<Author>
{
    std::map<std::string, Author> byUser;
    auto add = [&](const Author& a) { byUser.emplace(a.tracker_username.value_or(a.name), a); };
    add(_snapshot.author);
    for (auto const& c: _snapshot.comments)
        add(c.author);
    std::vector<Author> out;
    for (auto& [user, a]: byUser)
        out.push_back(a);
    return out;
}

auto format_comment(const CommentMeta& c) -> std::string
{
    return fmt::format("created: {} | author: {} | body: {}",
                       format_utc(c.created_at),
                       c.author.tracker_username.value_or(c.author.name),
                       escape_line(c.body));
}

void IssueExtractor::set_default_page_size(int page_size)
{
    if (page_size < 1 || page_size > Pagination::kMaxPageSize)
        throw SetupError(fmt::format("page size {} is outside 1..{}", page_size, Pagination::kMaxPageSize));
    _pageSize = page_size;
}

auto IssueExtractor::bindings() const -> std::vector<ToolBinding>
{
    auto simple = [](std::string name, std::string description, ToolHandler handler) {
        return ToolBinding { { std::move(name), std::move(description), ToolCategory::issue, {} }, std::move(handler) };
    };

    std::vector<ToolBinding> tools;
    tools.push_back(simple("issue_title", "Returns the title of the current issue.", [this](const json&) {
        return issue_title();
    }));
    tools.push_back(simple("issue_description", "Returns the description of the issue (may be empty).", [this](const json&) {
        return issue_description().empty() ? std::string("(empty description)") : issue_description();
    }));
    tools.push_back(simple("issue_created_at", "Returns the issue creation timestamp.", [this](const json&) {
        return issue_created_at();
    }));
    tools.push_back(simple("issue_closed_at",
                           "Returns the issue resolution timestamp, or 'unresolved' for open issues.",
                           [this](const json&) { return issue_closed_at(); }));
    tools.push_back(simple("issue_author", "Returns the username of the issue author.", [this](const json&) {
        return format_author_line(issue_author());
    }));
    tools.push_back({ { "issue_comments",
                        "Returns paginated comments on the issue in chronological order.",
                        ToolCategory::issue,
                        pagination_params(_pageSize) },
                      [this](const json& args) {
                          auto const p = arg_pagination(args, _pageSize);
                          return format_page("comments", p, issue_comments(p), format_comment);
                      } });
    tools.push_back(simple("issue_participants",
                           "Returns the users who participated in the issue thread (author and commenters). The "
                           "resolving commit is often authored by one of them.",
                           [this](const json&) {
                               auto const people = issue_participants();
                               std::string out = fmt::format("{} participant(s)", people.size());
                               for (auto const& a: people)
                                   out += "\n" + format_author_line(a);
                               return out;
                           }));
    return tools;
}

} // namespace issuelink
