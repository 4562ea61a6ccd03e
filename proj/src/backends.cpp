// SPDX-License-Identifier: Apache-2.0
#include <issuelink/backends.hpp>
#include <issuelink/domain.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace issuelink
{

using nlohmann::json;

namespace
{
    auto substitute(std::string_view line, const ScriptedBackend::Variables& vars, int lineNo) -> std::string
    {
        std::string out;
        std::size_t pos = 0;
        while (pos < line.size())
        {
            auto const open = line.find("${", pos);
            if (open == std::string_view::npos)
            {
                out.append(line.substr(pos));
                break;
            }
            auto const close = line.find('}', open);
            if (close == std::string_view::npos)
                throw ScriptError(fmt::format("script line {}: unterminated ${{", lineNo));
            out.append(line.substr(pos, open - pos));
            auto const name = std::string(line.substr(open + 2, close - open - 2));
            auto it = vars.find(name);
            if (it == vars.end())
                throw ScriptError(fmt::format("script line {}: undefined variable '{}'", lineNo, name));
            out += it->second;
            pos = close + 1;
        }
        return out;
    }

    auto trim(std::string_view s) -> std::string_view
    {
        auto const b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos)
            return {};
        auto const e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    auto parse_call(std::string_view text, int lineNo) -> ScriptedCall
    {
        auto const space = text.find_first_of(" \t");
        auto const name = std::string(text.substr(0, space));
        auto const rest = space == std::string_view::npos ? std::string_view {} : trim(text.substr(space));

        if (name == "feedback")
        {
            // feedback <discard|preserve> [call_id]  |  feedback {json}
            if (rest.starts_with("{"))
                return { name, std::string(rest), false };
            auto const sp = rest.find_first_of(" \t");
            auto const verdict = std::string(rest.substr(0, sp));
            if (verdict.empty())
                throw ScriptError(fmt::format("script line {}: feedback needs a verdict", lineNo));
            auto const id = sp == std::string_view::npos ? std::string_view {} : trim(rest.substr(sp));
            if (id.empty())
                return { name, json { { "verdict", verdict } }.dump(), true };
            return { name, json { { "call_id", std::string(id) }, { "verdict", verdict } }.dump(), false };
        }
        if (name.empty())
            throw ScriptError(fmt::format("script line {}: empty call", lineNo));
        return { name, rest.empty() ? std::string("{}") : std::string(rest), false };
    }
} // namespace

auto ScriptedBackend::parse(std::string_view script, const Variables& vars) -> std::vector<ScriptStep>
{
    std::vector<ScriptStep> steps;
    std::istringstream in { std::string(script) };
    std::string raw;
    int lineNo = 0;
    while (std::getline(in, raw))
    {
        ++lineNo;
        auto const line = substitute(trim(raw), vars, lineNo);
        auto text = trim(line);
        if (text.empty() || text.starts_with("#"))
            continue;

        if (text.starts_with("+"))
        {
            if (steps.empty() || steps.back().text)
                throw ScriptError(fmt::format("script line {}: '+' continues a call line, but there is none", lineNo));
            steps.back().calls.push_back(parse_call(trim(text.substr(1)), lineNo));
            continue;
        }
        if (text == "say" || text.starts_with("say ") || text.starts_with("say\t"))
        {
            steps.push_back({ {}, std::string(trim(text.substr(3))) });
            continue;
        }
        steps.push_back({ { parse_call(text, lineNo) }, std::nullopt });
    }
    return steps;
}

auto ScriptedBackend::from_text(std::string_view script, const Variables& vars) -> ScriptedBackend
{
    return ScriptedBackend(parse(script, vars));
}

auto ScriptedBackend::from_file(const std::filesystem::path& file, const Variables& vars) -> ScriptedBackend
{
    std::ifstream in(file);
    if (!in)
        throw ScriptError(fmt::format("cannot read script {}", file.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str(), vars);
}

auto ScriptedBackend::complete(const std::string& request_body) -> std::string
{
    _bodies.push_back(request_body);

    json message { { "role", "assistant" } };
    std::string finish = "stop";
    if (_next >= _steps.size())
        message["content"] = "(script exhausted)";
    else
    {
        auto const& step = _steps[_next++];
        if (step.text)
            message["content"] = *step.text;
        else
        {
            message["content"] = nullptr;
            auto calls = json::array();
            for (auto const& c: step.calls)
            {
                auto const id = fmt::format("call_{}", ++_callCounter);
                std::string args = c.raw_arguments;
                if (c.feedback_targets_last)
                {
                    auto j = json::parse(args);
                    j["call_id"] = _lastDataCallId;
                    args = j.dump();
                }
                if (c.name != "feedback" && c.name != "finish" && c.name != "give_up")
                    _lastDataCallId = id;
                calls.push_back({ { "id", id }, { "type", "function" }, { "function", { { "name", c.name }, { "arguments", args } } } });
            }
            message["tool_calls"] = std::move(calls);
            finish = "tool_calls";
        }
    }

    json response {
        { "id", fmt::format("scripted-{}", _bodies.size()) },
        { "object", "chat.completion" },
        { "choices", json::array({ { { "index", 0 }, { "message", std::move(message) }, { "finish_reason", finish } } }) },
    };
    return response.dump();
}

// OpenAI-compatible backend --------------------------------------------------------------

auto OpenAiBackend::from_environment(std::shared_ptr<HttpTransport> transport) -> OpenAiBackend
{
    auto const* key = std::getenv("OPENAI_API_KEY");
    if (!key || !*key)
        throw SetupError("OPENAI_API_KEY is not set");
    auto const* base = std::getenv("OPENAI_BASE_URL");
    return OpenAiBackend(std::move(transport), base && *base ? base : "https://api.openai.com/v1", key);
}

OpenAiBackend::OpenAiBackend(std::shared_ptr<HttpTransport> transport, std::string base_url, std::string api_key):
    _transport(std::move(transport)), _baseUrl(std::move(base_url)), _apiKey(std::move(api_key))
{
    while (!_baseUrl.empty() && _baseUrl.back() == '/')
        _baseUrl.pop_back();
}

auto OpenAiBackend::complete(const std::string& request_body) -> std::string
{
    HttpRequest request;
    request.method = "POST";
    request.url = _baseUrl + "/chat/completions";
    request.headers = { { "Authorization", "Bearer " + _apiKey }, { "Content-Type", "application/json" } };
    request.body = request_body;

    auto response = _transport->send(request);
    if (response.status == 429 || response.status >= 500)
        throw TransportError(fmt::format("chat backend returned HTTP {}", response.status));
    if (response.status < 200 || response.status >= 300)
        throw SessionError(fmt::format("chat backend returned HTTP {}: {}", response.status, response.body.substr(0, 500)));
    return std::move(response.body);
}

} // namespace issuelink
