#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <sys/types.h>
#include <vector>

#include "chainnas/evaluator.hpp"

namespace chainnas {

struct TrainerOptions {
    std::string command;  // run through /bin/sh -c
    std::chrono::milliseconds timeout{std::chrono::hours(1)};
    std::chrono::milliseconds final_train_timeout{std::chrono::hours(48)};
    unsigned processes = 1;
};

/// One external trainer speaking the line protocol over its stdin/stdout.
/// Serialized channel: one request in flight at a time.
class TrainerProcess {
public:
    explicit TrainerProcess(std::string command);
    ~TrainerProcess();

    TrainerProcess(const TrainerProcess&) = delete;
    TrainerProcess& operator=(const TrainerProcess&) = delete;

    bool running() const { return pid_ > 0; }
    pid_t pid() const { return pid_; }

    /// Sends one request and waits for the result carrying the same id.
    /// Every failure is folded into an ERROR result; after a failure the
    /// process is stopped and the next call starts a fresh one.
    EvaluationResult exchange(const EvaluationRequest& request, std::chrono::milliseconds timeout);

private:
    enum class ReadStatus { Line, Eof, Timeout };

    void start();
    void stop();
    ReadStatus read_line(std::string& line, std::chrono::steady_clock::time_point deadline);
    bool write_all(const std::string& data);

    std::string command_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    bool greeted_ = false;
};

EvaluationResult external_evaluate(const EvaluationRequest& request, TrainerProcess& trainer,
                                   std::chrono::milliseconds timeout = std::chrono::hours(1));

/// Pool of trainer processes; evaluate() borrows an idle one, so up to
/// `processes` requests run concurrently.
class ExternalBackend final : public EvaluationBackend {
public:
    explicit ExternalBackend(TrainerOptions options);

    EvaluationResult evaluate(const EvaluationRequest& request) override;

private:
    TrainerOptions options_;
    std::mutex mutex_;
    std::vector<std::unique_ptr<TrainerProcess>> idle_;
};

}  // namespace chainnas
