#include "auditcalib/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

#include "auditcalib/error.hpp"

extern char** environ;

namespace auditcalib::process {

namespace {

using Clock = std::chrono::steady_clock;

// A child that exits early must not take us down with SIGPIPE.
void ignore_sigpipe() {
    static const bool done = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

struct Pipe {
    int read = -1;
    int write = -1;
};

Pipe make_pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(ErrorCode::adapter_failure, "pipe", std::strerror(errno));
    return {fds[0], fds[1]};
}

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

std::vector<std::string> merged_environment(const Environment& extra) {
    std::map<std::string, std::string> vars;
    for (char** e = environ; e && *e; ++e) {
        std::string_view kv(*e);
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) continue;
        vars[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    }
    for (const auto& [k, v] : extra) vars[k] = v;
    std::vector<std::string> out;
    for (const auto& [k, v] : vars) out.push_back(k + "=" + v);
    return out;
}

// Spawns /bin/sh -c command with the given pipe ends as stdio (err may be -1).
int spawn(const std::string& command, int in, int out, int err, const Environment& extra_env) {
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in, STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out, STDOUT_FILENO);
    if (err >= 0) posix_spawn_file_actions_adddup2(&actions, err, STDERR_FILENO);

    auto env_strings = merged_environment(extra_env);
    std::vector<char*> envp;
    for (auto& s : env_strings) envp.push_back(s.data());
    envp.push_back(nullptr);
    std::string sh = "/bin/sh", flag = "-c", cmd = command;
    char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};

    // Own process group, so a timeout can take down grandchildren too.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);

    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr, argv, envp.data());
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    if (rc != 0) throw Error(ErrorCode::adapter_failure, command, std::strerror(rc));
    return pid;
}

int wait_exit(int pid) {
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

}  // namespace

Result run(const std::string& command, std::string_view input, std::chrono::milliseconds timeout,
           const Environment& extra_env) {
    ignore_sigpipe();
    Pipe in = make_pipe(), out = make_pipe(), err = make_pipe();
    int pid = -1;
    try {
        pid = spawn(command, in.read, out.write, err.write, extra_env);
    } catch (...) {
        for (int* fd : {&in.read, &in.write, &out.read, &out.write, &err.read, &err.write}) close_fd(*fd);
        throw;
    }
    close_fd(in.read);
    close_fd(out.write);
    close_fd(err.write);
    ::fcntl(in.write, F_SETFL, O_NONBLOCK);
    if (input.empty()) close_fd(in.write);

    Result result;
    std::size_t written = 0;
    const auto deadline = Clock::now() + timeout;
    char buf[65536];
    while (out.read >= 0 || err.read >= 0) {
        std::vector<pollfd> fds;
        if (in.write >= 0) fds.push_back({in.write, POLLOUT, 0});
        if (out.read >= 0) fds.push_back({out.read, POLLIN, 0});
        if (err.read >= 0) fds.push_back({err.read, POLLIN, 0});
        const int left = remaining_ms(deadline);
        const int n = left == 0 ? 0 : ::poll(fds.data(), fds.size(), left);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            ::kill(-pid, SIGKILL);
            wait_exit(pid);
            for (int* fd : {&in.write, &out.read, &err.read}) close_fd(*fd);
            throw Error(ErrorCode::adapter_timeout, command,
                        "no completion within " + std::to_string(timeout.count()) + " ms");
        }
        for (const auto& p : fds) {
            if (p.revents == 0) continue;
            if (p.fd == in.write) {
                const ssize_t w = ::write(in.write, input.data() + written, input.size() - written);
                if (w > 0) written += static_cast<std::size_t>(w);
                if (w < 0 && errno != EAGAIN && errno != EINTR) close_fd(in.write);  // child closed stdin
                if (written == input.size()) close_fd(in.write);
            } else {
                int& fd = p.fd == out.read ? out.read : err.read;
                std::string& sink = p.fd == out.read ? result.out : result.err;
                const ssize_t r = ::read(fd, buf, sizeof buf);
                if (r > 0) sink.append(buf, static_cast<std::size_t>(r));
                else if (r == 0 || (errno != EAGAIN && errno != EINTR)) close_fd(fd);
            }
        }
    }
    close_fd(in.write);
    result.exit_code = wait_exit(pid);
    return result;
}

LineProcess::LineProcess(const std::string& command, std::chrono::milliseconds timeout) : timeout_(timeout) {
    ignore_sigpipe();
    Pipe in = make_pipe(), out = make_pipe();
    try {
        pid_ = spawn(command, in.read, out.write, -1, {});
    } catch (...) {
        for (int* fd : {&in.read, &in.write, &out.read, &out.write}) close_fd(*fd);
        throw;
    }
    close_fd(in.read);
    close_fd(out.write);
    to_child_ = in.write;
    from_child_ = out.read;
}

LineProcess::~LineProcess() {
    close_fd(to_child_);
    close_fd(from_child_);
    if (pid_ > 0) {
        // Give a well-behaved child the chance to exit on EOF first.
        for (int i = 0; i < 50; ++i) {
            int status = 0;
            if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
            ::usleep(2000);
        }
        ::kill(-pid_, SIGKILL);
        wait_exit(pid_);
    }
}

std::string LineProcess::exchange(std::string_view line) {
    std::lock_guard lock(mutex_);
    if (to_child_ < 0) throw Error(ErrorCode::adapter_failure, "line process", "process already failed");
    std::string request(line);
    request.push_back('\n');
    std::size_t written = 0;
    while (written < request.size()) {
        const ssize_t w = ::write(to_child_, request.data() + written, request.size() - written);
        if (w < 0) {
            if (errno == EINTR) continue;
            close_fd(to_child_);
            throw Error(ErrorCode::adapter_failure, "line process", std::strerror(errno));
        }
        written += static_cast<std::size_t>(w);
    }
    const auto deadline = Clock::now() + timeout_;
    char buf[4096];
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string reply = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!reply.empty() && reply.back() == '\r') reply.pop_back();
            return reply;
        }
        pollfd p{from_child_, POLLIN, 0};
        const int left = remaining_ms(deadline);
        const int n = left == 0 ? 0 : ::poll(&p, 1, left);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            close_fd(to_child_);
            throw Error(ErrorCode::adapter_timeout, "line process", "no reply within deadline");
        }
        const ssize_t r = ::read(from_child_, buf, sizeof buf);
        if (r <= 0) {
            close_fd(to_child_);
            throw Error(ErrorCode::adapter_failure, "line process", "child closed its output");
        }
        buffer_.append(buf, static_cast<std::size_t>(r));
    }
}

}  // namespace auditcalib::process
