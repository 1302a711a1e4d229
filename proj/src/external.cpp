#include "chainnas/external.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <poll.h>
#include <stdexcept>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace chainnas {

namespace {

void ignore_sigpipe()
{
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void close_fd(int& fd)
{
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

}  // namespace

TrainerProcess::TrainerProcess(std::string command) : command_(std::move(command))
{
    ignore_sigpipe();
}

TrainerProcess::~TrainerProcess()
{
    stop();
}

void TrainerProcess::start()
{
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0)
        throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw std::runtime_error(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0)
        throw std::runtime_error(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        // own process group so stop() also reaches whatever the shell spawns
        ::setpgid(0, 0);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
    greeted_ = false;
}

void TrainerProcess::stop()
{
    close_fd(to_child_);
    close_fd(from_child_);
    if (pid_ <= 0)
        return;
    // closed stdin asks a well-behaved trainer to exit; give it a moment
    bool exited = false;
    for (int i = 0; i < 20 && !exited; ++i) {
        exited = ::waitpid(pid_, nullptr, WNOHANG) == pid_;
        if (!exited)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ::kill(-pid_, SIGKILL);
    if (!exited)
        ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
}

TrainerProcess::ReadStatus TrainerProcess::read_line(std::string& line,
                                                     std::chrono::steady_clock::time_point deadline)
{
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return ReadStatus::Line;
        }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0)
            return ReadStatus::Timeout;
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1 << 30)));
        if (ready < 0) {
            if (errno == EINTR)
                continue;
            return ReadStatus::Eof;
        }
        if (ready == 0)
            return ReadStatus::Timeout;
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            return ReadStatus::Eof;
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

bool TrainerProcess::write_all(const std::string& data)
{
    std::size_t written = 0;
    while (written < data.size()) {
        const ssize_t n = ::write(to_child_, data.data() + written, data.size() - written);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            return false;
        written += static_cast<std::size_t>(n);
    }
    return true;
}

EvaluationResult TrainerProcess::exchange(const EvaluationRequest& request,
                                          std::chrono::milliseconds timeout)
{
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto fail = [&](EvalErrorKind kind, std::string message) {
        stop();
        return EvaluationResult::failure(request.id, kind, std::move(message));
    };

    if (!running()) {
        try {
            start();
        } catch (const std::exception& e) {
            return EvaluationResult::failure(request.id, EvalErrorKind::TrainerCrash, e.what());
        }
    }

    std::string line;
    if (!greeted_) {
        switch (read_line(line, deadline)) {
        case ReadStatus::Timeout:
            return fail(EvalErrorKind::Timeout, "no hello line before timeout");
        case ReadStatus::Eof:
            return fail(EvalErrorKind::TrainerCrash, "trainer exited before announcing its protocol");
        case ReadStatus::Line:
            break;
        }
        try {
            const int version = decode_hello(line);
            if (version != kProtocolVersion)
                return fail(EvalErrorKind::ProtocolViolation,
                            "trainer speaks protocol " + std::to_string(version) + ", expected " +
                                std::to_string(kProtocolVersion));
        } catch (const ProtocolError& e) {
            return fail(EvalErrorKind::ProtocolViolation, e.what());
        }
        greeted_ = true;
    }

    if (!write_all(encode_request(request) + "\n"))
        return fail(EvalErrorKind::TrainerCrash, "trainer closed its input");

    for (;;) {
        switch (read_line(line, deadline)) {
        case ReadStatus::Timeout:
            return fail(EvalErrorKind::Timeout, "no result within " + std::to_string(timeout.count()) + " ms");
        case ReadStatus::Eof:
            return fail(EvalErrorKind::TrainerCrash, "trainer exited before replying");
        case ReadStatus::Line:
            break;
        }
        if (line.empty())
            continue;
        EvaluationResult result;
        try {
            result = decode_result(line);
        } catch (const ProtocolError& e) {
            return fail(EvalErrorKind::ProtocolViolation, e.what());
        }
        if (result.id == request.id)
            return result;
        // stale reply for an abandoned request; keep waiting
    }
}

EvaluationResult external_evaluate(const EvaluationRequest& request, TrainerProcess& trainer,
                                   std::chrono::milliseconds timeout)
{
    return trainer.exchange(request, timeout);
}

ExternalBackend::ExternalBackend(TrainerOptions options) : options_(std::move(options))
{
    if (options_.command.empty())
        throw std::invalid_argument("external evaluator needs a trainer command");
    if (options_.processes == 0)
        options_.processes = 1;
    for (unsigned i = 0; i < options_.processes; ++i)
        idle_.push_back(std::make_unique<TrainerProcess>(options_.command));
}

EvaluationResult ExternalBackend::evaluate(const EvaluationRequest& request)
{
    std::unique_ptr<TrainerProcess> trainer;
    {
        std::lock_guard lock(mutex_);
        if (!idle_.empty()) {
            trainer = std::move(idle_.back());
            idle_.pop_back();
        }
    }
    if (!trainer)
        trainer = std::make_unique<TrainerProcess>(options_.command);
    const auto timeout =
        request.budget.mode == EvalMode::FinalTrain ? options_.final_train_timeout : options_.timeout;
    EvaluationResult result = trainer->exchange(request, timeout);
    std::lock_guard lock(mutex_);
    idle_.push_back(std::move(trainer));
    return result;
}

}  // namespace chainnas
