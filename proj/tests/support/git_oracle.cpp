// SPDX-License-Identifier: Apache-2.0
#include "git_oracle.hpp"

#include <issuelink/git_repo.hpp>
#include <issuelink/process.hpp>

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace testing_support
{

namespace
{
    auto lower(std::string s) -> std::string
    {
        for (auto& c: s)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    }

    /// "Name <email> 1710151200 +0000"
    void parse_identity(const std::string& text, std::string& name, std::string& email, std::int64_t& time)
    {
        auto const lt = text.rfind(" <");
        auto const gt = text.rfind("> ");
        name = text.substr(0, lt);
        email = text.substr(lt + 2, gt - lt - 2);
        std::istringstream rest(text.substr(gt + 2));
        rest >> time;
    }
} // namespace

auto GitOracle::git(const std::vector<std::string>& args) const -> std::string
{
    std::vector<std::string> argv { "git", "-c", "core.quotePath=false" };
    argv.insert(argv.end(), args.begin(), args.end());
    auto r = issuelink::run_process(argv, _repo, issuelink::hermetic_git_env());
    if (!r.ok())
        throw std::runtime_error("oracle git failed: " + r.err);
    return r.out;
}

auto GitOracle::tree(const std::string& commit) const -> std::map<std::string, std::string>
{
    std::map<std::string, std::string> out;
    auto const listing = git({ "ls-tree", "-r", "-z", "--full-tree", commit });
    std::size_t pos = 0;
    while (pos < listing.size())
    {
        auto const end = listing.find('\0', pos);
        auto const entry = listing.substr(pos, end - pos);
        pos = end + 1;
        auto const tab = entry.find('\t');
        out[entry.substr(tab + 1)] = entry.substr(0, tab); // mode type id
    }
    return out;
}

GitOracle::GitOracle(std::filesystem::path repo): _repo(std::move(repo))
{
    std::deque<std::string> queue;
    std::istringstream refs(git({ "for-each-ref", "--format=%(objectname) %(objecttype)" }));
    for (std::string line; std::getline(refs, line);)
    {
        auto const sp = line.find(' ');
        auto id = line.substr(0, sp);
        if (line.substr(sp + 1) != "commit")
            id = git({ "rev-parse", id + "^{commit}" }).substr(0, 40);
        queue.push_back(id);
    }

    std::set<std::string> seen;
    while (!queue.empty())
    {
        auto const hash = queue.front();
        queue.pop_front();
        if (!seen.insert(hash).second)
            continue;

        OracleCommit c;
        c.hash = hash;
        auto const raw = git({ "cat-file", "commit", hash });
        auto const split = raw.find("\n\n");
        std::istringstream header(raw.substr(0, split));
        for (std::string line; std::getline(header, line);)
        {
            if (line.starts_with("parent "))
                c.parents.push_back(line.substr(7));
            else if (line.starts_with("author "))
                parse_identity(line.substr(7), c.author_name, c.author_email, c.author_time);
            else if (line.starts_with("committer "))
                parse_identity(line.substr(10), c.committer_name, c.committer_email, c.commit_time);
        }
        c.message = split == std::string::npos ? std::string() : raw.substr(split + 2);
        while (!c.message.empty() && c.message.back() == '\n')
            c.message.pop_back();

        auto const mine = tree(hash);
        std::map<std::string, std::string> base;
        if (!c.parents.empty())
            base = tree(c.parents.front());
        for (auto const& [path, id]: mine)
            if (auto it = base.find(path); it == base.end() || it->second != id)
                c.touched.insert(path);
        for (auto const& [path, id]: base)
            if (!mine.contains(path))
                c.touched.insert(path);

        for (auto const& p: c.parents)
            queue.push_back(p);
        _commits.push_back(std::move(c));
    }

    std::sort(_commits.begin(), _commits.end(), [](auto const& a, auto const& b) {
        return std::tie(a.commit_time, a.hash) < std::tie(b.commit_time, b.hash);
    });
    for (std::size_t i = 0; i < _commits.size(); ++i)
        _index[_commits[i].hash] = i;
}

auto GitOracle::find(const std::string& hash) const -> const OracleCommit*
{
    auto it = _index.find(hash);
    return it == _index.end() ? nullptr : &_commits[it->second];
}

auto GitOracle::in_window(std::int64_t start, std::int64_t end) const -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (auto const& c: _commits)
        if (start <= c.commit_time && c.commit_time <= end)
            out.push_back(c.hash);
    return out;
}

auto GitOracle::authors(std::int64_t start, std::int64_t end) const -> std::vector<std::pair<std::string, std::string>>
{
    std::set<std::pair<std::string, std::string>> s;
    for (auto const& c: _commits)
        if (start <= c.commit_time && c.commit_time <= end)
            s.emplace(c.author_name, c.author_email);
    return { s.begin(), s.end() };
}

auto GitOracle::of_author(std::int64_t start, std::int64_t end, const std::string& name,
                          const std::optional<std::string>& email) const -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (auto const& c: _commits)
    {
        if (c.commit_time < start || c.commit_time > end)
            continue;
        bool const match = email ? c.author_name == name && lower(c.author_email) == lower(*email)
                                 : lower(c.author_name) == lower(name);
        if (match)
            out.push_back(c.hash);
    }
    return out;
}

auto GitOracle::files(std::int64_t start, std::int64_t end, const std::string& glob) const -> std::vector<std::string>
{
    auto const re = glob_to_regex(glob);
    std::set<std::string> s;
    for (auto const& c: _commits)
        if (start <= c.commit_time && c.commit_time <= end)
            for (auto const& p: c.touched)
                if (std::regex_match(p, re))
                    s.insert(p);
    return { s.begin(), s.end() };
}

auto GitOracle::on_file(std::int64_t start, std::int64_t end, const std::string& path) const -> std::vector<std::string>
{
    std::vector<std::string> out;
    for (auto const& c: _commits)
        if (start <= c.commit_time && c.commit_time <= end && c.touched.contains(path))
            out.push_back(c.hash);
    return out;
}

auto GitOracle::all_paths() const -> std::set<std::string>
{
    std::set<std::string> s;
    for (auto const& c: _commits)
        s.insert(c.touched.begin(), c.touched.end());
    return s;
}

auto GitOracle::blob(const std::string& commit, const std::string& path) const -> std::optional<std::string>
{
    auto r = issuelink::run_process({ "git", "cat-file", "blob", commit + ":" + path }, _repo, issuelink::hermetic_git_env());
    if (!r.ok())
        return std::nullopt;
    return r.out;
}

auto glob_to_regex(const std::string& glob) -> std::regex
{
    std::string re;
    for (std::size_t i = 0; i < glob.size(); ++i)
    {
        char const c = glob[i];
        if (c == '*' && i + 1 < glob.size() && glob[i + 1] == '*')
        {
            if (i + 2 < glob.size() && glob[i + 2] == '/')
            {
                re += "(.*/)?";
                i += 2;
            }
            else
            {
                re += ".*";
                ++i;
            }
        }
        else if (c == '*')
            re += "[^/]*";
        else if (c == '?')
            re += "[^/]";
        else if (c == '[' && glob.find(']', i + 1) != std::string::npos)
        {
            auto const close = glob.find(']', i + 1);
            auto body = glob.substr(i + 1, close - i - 1);
            if (!body.empty() && body[0] == '!')
                body[0] = '^';
            re += "[" + body + "]";
            i = close;
        }
        else if (std::string_view("\\^$.|+()[]{}").find(c) != std::string_view::npos)
            re += std::string("\\") + c;
        else
            re += c;
    }
    return std::regex(re);
}

} // namespace testing_support
