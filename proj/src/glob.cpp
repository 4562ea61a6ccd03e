// SPDX-License-Identifier: Apache-2.0
#include <issuelink/domain.hpp>
#include <issuelink/glob.hpp>

#include <fmt/format.h>

#include <vector>

namespace issuelink
{

namespace
{
    constexpr auto kSyntax = "supported syntax: '*' matches within one path segment, '**' matches across "
                             "directories, '?' matches one character, '[abc]' or '[a-z]' a character class";

    /// Returns the index just past a class starting at `i` (which points at
    /// '['), or npos when it is unterminated.
    auto class_end(std::string_view p, std::size_t i) -> std::size_t
    {
        auto j = i + 1;
        if (j < p.size() && (p[j] == '!' || p[j] == '^'))
            ++j;
        if (j < p.size() && p[j] == ']')
            ++j;
        while (j < p.size() && p[j] != ']')
            ++j;
        return j < p.size() ? j + 1 : std::string_view::npos;
    }

    auto class_matches(std::string_view cls, char c) -> bool
    {
        // cls includes the surrounding brackets.
        std::size_t i = 1;
        bool negate = false;
        if (cls[i] == '!' || cls[i] == '^')
        {
            negate = true;
            ++i;
        }
        bool hit = false;
        auto const end = cls.size() - 1;
        bool first = true;
        while (i < end)
        {
            auto lo = cls[i];
            if (lo == ']' && !first)
                break;
            first = false;
            if (i + 2 < end && cls[i + 1] == '-')
            {
                if (lo <= c && c <= cls[i + 2])
                    hit = true;
                i += 3;
            }
            else
            {
                if (lo == c)
                    hit = true;
                ++i;
            }
        }
        return hit != negate;
    }

    // Memoised recursive matcher over (pattern index, path index).
    class Matcher
    {
      public:
        Matcher(std::string_view pattern, std::string_view path):
            _p(pattern), _s(path), _memo((pattern.size() + 1) * (path.size() + 1), -1)
        {
        }

        auto run() -> bool { return match(0, 0); }

      private:
        auto match(std::size_t pi, std::size_t si) -> bool
        {
            auto& slot = _memo[pi * (_s.size() + 1) + si];
            if (slot >= 0)
                return slot == 1;
            auto const r = step(pi, si);
            slot = r ? 1 : 0;
            return r;
        }

        auto step(std::size_t pi, std::size_t si) -> bool
        {
            if (pi == _p.size())
                return si == _s.size();

            auto const c = _p[pi];
            if (c == '*')
            {
                if (pi + 1 < _p.size() && _p[pi + 1] == '*')
                {
                    auto next = pi + 2;
                    // "**/" may also match zero directories.
                    if (next < _p.size() && _p[next] == '/' && match(next + 1, si))
                        return true;
                    for (auto k = si; k <= _s.size(); ++k)
                        if (match(next, k))
                            return true;
                    return false;
                }
                for (auto k = si; k <= _s.size(); ++k)
                {
                    if (match(pi + 1, k))
                        return true;
                    if (k < _s.size() && _s[k] == '/')
                        break;
                }
                return false;
            }
            if (si == _s.size())
                return false;
            if (c == '?')
                return _s[si] != '/' && match(pi + 1, si + 1);
            if (c == '[')
            {
                auto const end = class_end(_p, pi);
                return _s[si] != '/' && class_matches(_p.substr(pi, end - pi), _s[si]) && match(end, si + 1);
            }
            if (c == '\\' && pi + 1 < _p.size())
                return _s[si] == _p[pi + 1] && match(pi + 2, si + 1);
            return _s[si] == c && match(pi + 1, si + 1);
        }

        std::string_view _p;
        std::string_view _s;
        std::vector<signed char> _memo;
    };
} // namespace

Glob::Glob(std::string pattern): _pattern(std::move(pattern))
{
    if (_pattern.empty())
        throw ToolError(fmt::format("invalid glob: pattern is empty; {}", kSyntax));
    for (std::size_t i = 0; i < _pattern.size(); ++i)
    {
        if (_pattern[i] == '\\')
        {
            ++i;
            continue;
        }
        if (_pattern[i] == '[')
        {
            auto const end = class_end(_pattern, i);
            if (end == std::string_view::npos)
                throw ToolError(fmt::format("invalid glob '{}': unterminated '[' at offset {}; {}", _pattern, i, kSyntax));
            i = end - 1;
        }
    }
}

auto Glob::matches(std::string_view path) const -> bool
{
    return Matcher(_pattern, path).run();
}

} // namespace issuelink
