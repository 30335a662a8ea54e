#include "drvsynth/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <algorithm>
#include <cstring>
#include <system_error>

extern char** environ;

namespace drvsynth {

namespace {

struct Pipe {
    int read_end = -1;
    int write_end = -1;

    Pipe()
    {
        int fds[2];
        if (::pipe2(fds, O_CLOEXEC) != 0) {
            throw std::system_error(errno, std::generic_category(), "pipe2");
        }
        read_end = fds[0];
        write_end = fds[1];
    }
    ~Pipe()
    {
        close_read();
        close_write();
    }
    Pipe(const Pipe&) = delete;
    Pipe& operator=(const Pipe&) = delete;

    void close_read()
    {
        if (read_end >= 0) {
            ::close(read_end);
            read_end = -1;
        }
    }
    void close_write()
    {
        if (write_end >= 0) {
            ::close(write_end);
            write_end = -1;
        }
    }
    int release_read()
    {
        int fd = read_end;
        read_end = -1;
        return fd;
    }
    int release_write()
    {
        int fd = write_end;
        write_end = -1;
        return fd;
    }
};

std::vector<std::string> build_environment(const std::map<std::string, std::optional<std::string>>& overrides)
{
    std::map<std::string, std::string> merged;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        std::string entry(*e);
        auto eq = entry.find('=');
        if (eq != std::string::npos) {
            merged[entry.substr(0, eq)] = entry.substr(eq + 1);
        }
    }
    for (const auto& [key, value] : overrides) {
        if (value) {
            merged[key] = *value;
        }
        else {
            merged.erase(key);
        }
    }
    std::vector<std::string> out;
    out.reserve(merged.size());
    for (const auto& [key, value] : merged) {
        out.push_back(key + "=" + value);
    }
    return out;
}

std::vector<char*> c_array(std::vector<std::string>& strings)
{
    std::vector<char*> out;
    out.reserve(strings.size() + 1);
    for (auto& s : strings) {
        out.push_back(s.data());
    }
    out.push_back(nullptr);
    return out;
}

void append_capped(std::string& sink, std::size_t& dropped, const char* data, std::size_t n, std::size_t cap)
{
    std::size_t room = sink.size() < cap ? cap - sink.size() : 0;
    std::size_t keep = std::min(room, n);
    sink.append(data, keep);
    dropped += n - keep;
}

// Child side of fork(): only async-signal-safe calls from here on.
[[noreturn]] void exec_child(char** argv, char** envp, const char* cwd, int stdin_fd, int stdout_fd, int stderr_fd,
                             int error_fd)
{
    ::setpgid(0, 0);
    if (stdin_fd >= 0) {
        ::dup2(stdin_fd, STDIN_FILENO);
    }
    ::dup2(stdout_fd, STDOUT_FILENO);
    ::dup2(stderr_fd, STDERR_FILENO);
    if (cwd != nullptr && ::chdir(cwd) != 0) {
        int e = errno;
        [[maybe_unused]] auto n = ::write(error_fd, &e, sizeof(e));
        ::_exit(127);
    }
    ::execvpe(argv[0], argv, envp);
    int e = errno;
    [[maybe_unused]] auto n = ::write(error_fd, &e, sizeof(e));
    ::_exit(127);
}

int read_exec_error(int fd)
{
    int e = 0;
    ssize_t n;
    do {
        n = ::read(fd, &e, sizeof(e));
    } while (n < 0 && errno == EINTR);
    return n == static_cast<ssize_t>(sizeof(e)) ? e : 0;
}

} // namespace

ProcessResult run_process(const ProcessOptions& options)
{
    ProcessResult result;
    if (options.argv.empty()) {
        result.exec_failed = true;
        result.exec_errno = EINVAL;
        return result;
    }

    auto args = options.argv;
    auto argv = c_array(args);
    auto env_strings = build_environment(options.env);
    auto envp = c_array(env_strings);
    std::string cwd = options.cwd.string();

    Pipe out_pipe;
    Pipe err_pipe;
    Pipe error_pipe;
    int devnull = ::open("/dev/null", O_RDONLY | O_CLOEXEC);

    auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(devnull);
        throw std::system_error(errno, std::generic_category(), "fork");
    }
    if (pid == 0) {
        exec_child(argv.data(), envp.data(), cwd.empty() ? nullptr : cwd.c_str(), devnull, out_pipe.write_end,
                   options.merge_stderr ? out_pipe.write_end : err_pipe.write_end, error_pipe.write_end);
    }
    ::setpgid(pid, pid);
    ::close(devnull);
    out_pipe.close_write();
    err_pipe.close_write();
    error_pipe.close_write();

    if (int e = read_exec_error(error_pipe.read_end); e != 0) {
        ::waitpid(pid, nullptr, 0);
        result.exec_failed = true;
        result.exec_errno = e;
        return result;
    }

    std::optional<std::chrono::steady_clock::time_point> deadline;
    if (options.timeout) {
        deadline = start + *options.timeout;
    }

    bool killed = false;
    std::vector<pollfd> fds = {{out_pipe.read_end, POLLIN, 0}};
    if (!options.merge_stderr) {
        fds.push_back({err_pipe.read_end, POLLIN, 0});
    }
    char buf[8192];
    auto open_streams = [&] {
        return std::count_if(fds.begin(), fds.end(), [](const pollfd& p) { return p.fd >= 0; });
    };
    while (open_streams() > 0) {
        int wait_ms = -1;
        if (deadline && !killed) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - std::chrono::steady_clock::now());
            wait_ms = static_cast<int>(std::max<int64_t>(0, left.count()));
        }
        int rc = ::poll(fds.data(), fds.size(), wait_ms);
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        if (rc == 0) {
            ::kill(-pid, SIGKILL);
            killed = true;
            result.timed_out = true;
            continue;
        }
        for (std::size_t i = 0; i < fds.size(); ++i) {
            if (fds[i].fd < 0 || fds[i].revents == 0) {
                continue;
            }
            ssize_t n = ::read(fds[i].fd, buf, sizeof(buf));
            if (n > 0) {
                if (i == 0) {
                    append_capped(result.out, result.out_dropped, buf, static_cast<std::size_t>(n), options.output_cap);
                }
                else {
                    append_capped(result.err, result.err_dropped, buf, static_cast<std::size_t>(n), options.output_cap);
                }
            }
            else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
                fds[i].fd = -1;
            }
        }
    }

    // A child may close its streams and keep running; the deadline still applies.
    int status = 0;
    for (;;) {
        pid_t rc = ::waitpid(pid, &status, killed ? 0 : WNOHANG);
        if (rc == pid || (rc < 0 && errno != EINTR)) {
            break;
        }
        if (rc == 0) {
            if (deadline && std::chrono::steady_clock::now() >= *deadline) {
                ::kill(-pid, SIGKILL);
                killed = true;
                result.timed_out = true;
            }
            else {
                ::usleep(5000);
            }
        }
    }
    ::kill(-pid, SIGKILL);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    }
    else if (WIFSIGNALED(status)) {
        result.signal = WTERMSIG(status);
    }
    return result;
}

LineChannel::LineChannel(std::vector<std::string> argv)
{
    if (argv.empty()) {
        throw std::system_error(EINVAL, std::generic_category(), "empty command");
    }
    auto args_c = c_array(argv);
    auto env_strings = build_environment({});
    auto envp = c_array(env_strings);

    int sockets[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sockets) != 0) {
        throw std::system_error(errno, std::generic_category(), "socketpair");
    }
    Pipe out_pipe;
    Pipe error_pipe;
    pid_t pid = ::fork();
    if (pid < 0) {
        throw std::system_error(errno, std::generic_category(), "fork");
    }
    if (pid == 0) {
        exec_child(args_c.data(), envp.data(), nullptr, sockets[1], out_pipe.write_end, STDERR_FILENO,
                   error_pipe.write_end);
    }
    ::close(sockets[1]);
    out_pipe.close_write();
    error_pipe.close_write();
    if (int e = read_exec_error(error_pipe.read_end); e != 0) {
        ::waitpid(pid, nullptr, 0);
        ::close(sockets[0]);
        throw std::system_error(e, std::generic_category(), "exec " + argv.front());
    }
    pid_ = pid;
    to_child_ = sockets[0];
    from_child_ = out_pipe.release_read();
}

LineChannel::~LineChannel()
{
    if (to_child_ >= 0) {
        ::close(to_child_);
    }
    if (from_child_ >= 0) {
        ::close(from_child_);
    }
    if (pid_ > 0) {
        ::kill(pid_, SIGTERM);
        ::waitpid(pid_, nullptr, 0);
    }
}

std::optional<std::string> LineChannel::request(const std::string& line)
{
    std::string payload = line + "\n";
    const char* p = payload.data();
    std::size_t left = payload.size();
    while (left > 0) {
        ssize_t n = ::send(to_child_, p, left, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            return std::nullopt;
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }

    char buf[8192];
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string out = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return out;
        }
        ssize_t n = ::read(from_child_, buf, sizeof(buf));
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            return std::nullopt;
        }
        buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

} // namespace drvsynth
