// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace issuelink
{

struct HttpRequest
{
    std::string method = "GET";
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

struct HttpResponse
{
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers; // lowercase names
};

/// Connection-level failure (DNS, TLS, refused, timeout).
class TransportError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class HttpTransport
{
  public:
    virtual ~HttpTransport() = default;
    virtual auto send(const HttpRequest& request) -> HttpResponse = 0;
};

/// Real network transport (HTTPS via OpenSSL).
class NetworkTransport final: public HttpTransport
{
  public:
    explicit NetworkTransport(std::chrono::seconds timeout = std::chrono::seconds(120)): _timeout(timeout) {}
    auto send(const HttpRequest& request) -> HttpResponse override;

  private:
    std::chrono::seconds _timeout;
};

/// Serves responses recorded on disk. One file per endpoint response:
///
///     URL: https://api.github.com/repos/o/r/issues/1
///     Status: 200
///     <blank line>
///     <verbatim response body>
///
/// Unknown URLs answer 404.
class RecordedTransport final: public HttpTransport
{
  public:
    /// Loads every regular file in `dir`. Throws std::runtime_error on a file
    /// without a URL header.
    explicit RecordedTransport(const std::filesystem::path& dir);
    RecordedTransport() = default;

    void add(std::string url, HttpResponse response);
    auto send(const HttpRequest& request) -> HttpResponse override;

    [[nodiscard]] auto size() const -> std::size_t { return _responses.size(); }

  private:
    std::mutex _mutex;
    std::map<std::string, HttpResponse> _responses;
};

/// Writes one recording file in the format RecordedTransport reads.
void write_recording(const std::filesystem::path& file, const std::string& url, int status, const std::string& body);

/// Decorator that counts requests passed to the wrapped transport.
class CountingTransport final: public HttpTransport
{
  public:
    explicit CountingTransport(std::shared_ptr<HttpTransport> inner): _inner(std::move(inner)) {}
    auto send(const HttpRequest& request) -> HttpResponse override
    {
        ++_count;
        return _inner->send(request);
    }
    [[nodiscard]] auto count() const noexcept -> std::size_t { return _count; }

  private:
    std::shared_ptr<HttpTransport> _inner;
    std::size_t _count = 0;
};

struct RetryPolicy
{
    int max_attempts = 5;
    std::chrono::milliseconds initial_delay { 1000 };
    std::chrono::milliseconds max_delay { 30'000 };
    /// Replaced in tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;

    void wait(int attempt) const;
};

/// True for 429 and for 403 responses that report an exhausted rate limit.
[[nodiscard]] auto is_rate_limited(const HttpResponse& response) -> bool;

} // namespace issuelink
