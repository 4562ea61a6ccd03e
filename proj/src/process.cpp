// SPDX-License-Identifier: Apache-2.0
#include <issuelink/process.hpp>

#include <cerrno>
#include <cstring>
#include <csignal>
#include <map>
#include <mutex>
#include <system_error>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace issuelink
{

namespace
{
    class Pipe
    {
      public:
        Pipe()
        {
            if (::pipe2(_fds, O_CLOEXEC) != 0)
                throw std::system_error(errno, std::generic_category(), "pipe2");
        }
        Pipe(const Pipe&) = delete;
        auto operator=(const Pipe&) -> Pipe& = delete;
        ~Pipe()
        {
            close_read();
            close_write();
        }

        [[nodiscard]] auto read_end() const noexcept -> int { return _fds[0]; }
        [[nodiscard]] auto write_end() const noexcept -> int { return _fds[1]; }
        void close_read() noexcept { close_fd(_fds[0]); }
        void close_write() noexcept { close_fd(_fds[1]); }

      private:
        static void close_fd(int& fd) noexcept
        {
            if (fd >= 0)
                ::close(fd);
            fd = -1;
        }
        int _fds[2] { -1, -1 };
    };

    auto merged_environment(const EnvOverrides& overrides) -> std::vector<std::string>
    {
        std::map<std::string, std::string> env;
        for (char** e = environ; e && *e; ++e)
        {
            std::string_view kv(*e);
            auto const eq = kv.find('=');
            if (eq == std::string_view::npos)
                continue;
            env[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
        }
        for (auto const& [k, v]: overrides)
            env[k] = v;
        std::vector<std::string> out;
        out.reserve(env.size());
        for (auto const& [k, v]: env)
            out.push_back(k + "=" + v);
        return out;
    }
} // namespace

auto run_process(const std::vector<std::string>& argv,
                 const std::filesystem::path& cwd,
                 const EnvOverrides& env,
                 std::string_view stdin_data) -> ProcessResult
{
    if (argv.empty())
        throw std::invalid_argument("run_process: empty argv");

    // A child that exits before reading its stdin must not kill us.
    static std::once_flag ignoreSigpipe;
    std::call_once(ignoreSigpipe, [] { std::signal(SIGPIPE, SIG_IGN); });

    Pipe in, out, err;

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in.read_end(), STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out.write_end(), STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err.write_end(), STDERR_FILENO);
    if (!cwd.empty())
        posix_spawn_file_actions_addchdir_np(&actions, cwd.c_str());

    std::vector<char*> args;
    for (auto const& a: argv)
        args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    auto envStrings = merged_environment(env);
    std::vector<char*> envp;
    for (auto& e: envStrings)
        envp.push_back(e.data());
    envp.push_back(nullptr);

    pid_t pid = -1;
    auto const rc = ::posix_spawnp(&pid, argv[0].c_str(), &actions, nullptr, args.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0)
        throw std::system_error(rc, std::generic_category(), "posix_spawnp " + argv[0]);

    in.close_read();
    out.close_write();
    err.close_write();

    ProcessResult result;
    std::size_t written = 0;
    if (stdin_data.empty())
        in.close_write();
    else
        ::fcntl(in.write_end(), F_SETFL, O_NONBLOCK);

    bool outOpen = true, errOpen = true;
    char buffer[65536];
    while (outOpen || errOpen)
    {
        pollfd fds[3];
        nfds_t n = 0;
        int outIdx = -1, errIdx = -1, inIdx = -1;
        if (outOpen)
        {
            outIdx = static_cast<int>(n);
            fds[n++] = { out.read_end(), POLLIN, 0 };
        }
        if (errOpen)
        {
            errIdx = static_cast<int>(n);
            fds[n++] = { err.read_end(), POLLIN, 0 };
        }
        if (in.write_end() >= 0)
        {
            inIdx = static_cast<int>(n);
            fds[n++] = { in.write_end(), POLLOUT, 0 };
        }
        if (::poll(fds, n, -1) < 0)
        {
            if (errno == EINTR)
                continue;
            break;
        }
        auto drain = [&](int idx, int fd, std::string& sink, bool& open) {
            if (idx < 0 || !(fds[idx].revents & (POLLIN | POLLHUP | POLLERR)))
                return;
            auto const r = ::read(fd, buffer, sizeof buffer);
            if (r > 0)
                sink.append(buffer, static_cast<std::size_t>(r));
            else if (r == 0 || errno != EINTR)
                open = false;
        };
        drain(outIdx, out.read_end(), result.out, outOpen);
        drain(errIdx, err.read_end(), result.err, errOpen);
        if (inIdx >= 0 && (fds[inIdx].revents & (POLLOUT | POLLERR | POLLHUP)))
        {
            auto const w = ::write(in.write_end(), stdin_data.data() + written, stdin_data.size() - written);
            if (w > 0)
                written += static_cast<std::size_t>(w);
            if (w < 0 && errno != EAGAIN && errno != EINTR)
                written = stdin_data.size();
            if (written >= stdin_data.size())
                in.close_write();
        }
    }
    in.close_write();

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR)
    {
    }
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return result;
}

} // namespace issuelink
