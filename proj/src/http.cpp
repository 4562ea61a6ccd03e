// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <issuelink/http.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

namespace issuelink
{

namespace
{
    auto lowercase(std::string s) -> std::string
    {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        return s;
    }

    struct SplitUrl
    {
        std::string origin; // scheme://host[:port]
        std::string path;   // including query
    };

    auto split_url(const std::string& url) -> SplitUrl
    {
        auto const scheme = url.find("://");
        if (scheme == std::string::npos)
            throw TransportError(fmt::format("not an absolute URL: {}", url));
        auto const slash = url.find('/', scheme + 3);
        if (slash == std::string::npos)
            return { url, "/" };
        return { url.substr(0, slash), url.substr(slash) };
    }
} // namespace

auto NetworkTransport::send(const HttpRequest& request) -> HttpResponse
{
    auto const [origin, path] = split_url(request.url);
    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(_timeout);
    client.set_write_timeout(_timeout);
    client.set_follow_location(true);

    httplib::Headers headers;
    std::string contentType = "application/json";
    for (auto const& [k, v]: request.headers)
    {
        if (lowercase(k) == "content-type")
            contentType = v;
        else
            headers.emplace(k, v);
    }

    auto result = request.method == "POST" ? client.Post(path, headers, request.body, contentType)
                                           : client.Get(path, headers);
    if (!result)
        throw TransportError(fmt::format("{} {} failed: {}", request.method, request.url, httplib::to_string(result.error())));

    HttpResponse response;
    response.status = result->status;
    response.body = result->body;
    for (auto const& [k, v]: result->headers)
        response.headers[lowercase(k)] = v;
    return response;
}

RecordedTransport::RecordedTransport(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> files;
    for (auto const& entry: std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file())
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (auto const& file: files)
    {
        std::ifstream in(file, std::ios::binary);
        std::stringstream buffer;
        buffer << in.rdbuf();
        auto const text = buffer.str();

        std::string url;
        HttpResponse response { 200, {}, {} };
        std::size_t pos = 0;
        while (pos < text.size())
        {
            auto const eol = text.find('\n', pos);
            auto line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
            pos = eol == std::string::npos ? text.size() : eol + 1;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                break;
            auto const colon = line.find(':');
            if (colon == std::string::npos)
                continue;
            auto key = lowercase(line.substr(0, colon));
            auto value = line.substr(colon + 1);
            value.erase(0, value.find_first_not_of(' '));
            if (key == "url")
                url = value;
            else if (key == "status")
                response.status = std::stoi(value);
            else
                response.headers[key] = value;
        }
        if (url.empty())
            throw std::runtime_error(fmt::format("recording {} has no URL header", file.string()));
        response.body = text.substr(pos);
        _responses[url] = std::move(response);
    }
}

void RecordedTransport::add(std::string url, HttpResponse response)
{
    std::lock_guard lock(_mutex);
    _responses[std::move(url)] = std::move(response);
}

auto RecordedTransport::send(const HttpRequest& request) -> HttpResponse
{
    std::lock_guard lock(_mutex);
    auto it = _responses.find(request.url);
    if (it == _responses.end())
        return HttpResponse { 404, R"({"message":"Not Found"})", {} };
    return it->second;
}

void write_recording(const std::filesystem::path& file, const std::string& url, int status, const std::string& body)
{
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << "URL: " << url << "\nStatus: " << status << "\n\n" << body;
    if (!out)
        throw std::runtime_error(fmt::format("could not write {}", file.string()));
}

void RetryPolicy::wait(int attempt) const
{
    auto delay = initial_delay;
    for (int i = 0; i < attempt && delay < max_delay; ++i)
        delay *= 2;
    delay = std::min(delay, max_delay);
    if (sleep)
        sleep(delay);
    else
        std::this_thread::sleep_for(delay);
}

auto is_rate_limited(const HttpResponse& response) -> bool
{
    if (response.status == 429)
        return true;
    if (response.status == 403)
    {
        auto it = response.headers.find("x-ratelimit-remaining");
        return it != response.headers.end() && it->second == "0";
    }
    return false;
}

} // namespace issuelink
