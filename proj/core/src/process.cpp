#include "veristage/process.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "veristage/errors.hpp"

namespace veristage::proc {

namespace {

void keep_tail(std::string& buffer, std::size_t cap) {
    if (buffer.size() > cap)
        buffer.erase(0, buffer.size() - cap);
}

} // namespace

ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& cwd, double timeout_s,
                          std::size_t output_tail_bytes) {
    if (argv.empty())
        throw Error("run_process: empty argv");

    int fds[2];
    if (pipe(fds) != 0)
        throw Error(std::string("pipe failed: ") + std::strerror(errno));

    pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        throw Error(std::string("fork failed: ") + std::strerror(errno));
    }

    if (pid == 0) {
        // Child: own process group so a timeout can kill descendants too.
        setpgid(0, 0);
        close(fds[0]);
        dup2(fds[1], STDOUT_FILENO);
        dup2(fds[1], STDERR_FILENO);
        close(fds[1]);
        if (!cwd.empty() && chdir(cwd.c_str()) != 0)
            _exit(126);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv)
            cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        dprintf(STDERR_FILENO, "exec failed: %s: %s\n", cargv[0], std::strerror(errno));
        _exit(127);
    }

    close(fds[1]);
    ProcessResult result;
    const auto deadline =
        std::chrono::steady_clock::now() +
        std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));

    char buf[4096];
    bool open = true;
    while (open) {
        auto remaining = deadline - std::chrono::steady_clock::now();
        long ms = std::chrono::duration_cast<std::chrono::milliseconds>(remaining).count();
        if (ms <= 0) {
            result.timed_out = true;
            killpg(pid, SIGKILL);
            // Drain whatever the group produced before dying.
            ms = 50;
        }
        struct pollfd pfd{fds[0], POLLIN, 0};
        int rc = poll(&pfd, 1, static_cast<int>(ms > 1000 ? 1000 : ms));
        if (rc > 0) {
            ssize_t n = read(fds[0], buf, sizeof buf);
            if (n > 0) {
                result.output.append(buf, static_cast<std::size_t>(n));
                keep_tail(result.output, output_tail_bytes);
            } else {
                open = false;
            }
        } else if (result.timed_out) {
            open = false;
        }
    }
    close(fds[0]);

    // The pipe may close before the child exits; keep honoring the deadline.
    int status = 0;
    if (!result.timed_out) {
        while (waitpid(pid, &status, WNOHANG) == 0) {
            if (std::chrono::steady_clock::now() >= deadline) {
                result.timed_out = true;
                killpg(pid, SIGKILL);
                waitpid(pid, &status, 0);
                break;
            }
            usleep(2000);
        }
    } else {
        waitpid(pid, &status, 0);
    }
    if (result.timed_out)
        result.exit_code = 128 + SIGKILL;
    else if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    return result;
}

} // namespace veristage::proc
