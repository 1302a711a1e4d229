#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chainnas/arch.hpp"

namespace chainnas {

enum class DatasetVariant { Partial, Entire };
enum class EvalMode { Fitness, FinalTrain };
enum class EvalStatus { Ok, Error };

/// Why an evaluation produced no fitness.
enum class EvalErrorKind { None, ProtocolViolation, Timeout, TrainerCrash, BackendFailure };

std::string_view to_string(DatasetVariant v);
std::string_view to_string(EvalMode m);
std::string_view to_string(EvalErrorKind k);
DatasetVariant dataset_from_string(std::string_view text);
EvalMode mode_from_string(std::string_view text);

struct Budget {
    int epochs = 1;
    DatasetVariant dataset = DatasetVariant::Partial;
    EvalMode mode = EvalMode::Fitness;
};

struct EvaluationRequest {
    std::string id;
    Architecture architecture;
    Budget budget;
    std::uint64_t seed = 0;
};

struct EvaluationResult {
    std::string id;
    EvalStatus status = EvalStatus::Error;
    double fitness = 0.0;
    std::map<std::string, double> metrics;
    std::string error_message;
    EvalErrorKind error_kind = EvalErrorKind::None;

    bool ok() const { return status == EvalStatus::Ok; }
    static EvaluationResult success(std::string id, double fitness);
    static EvaluationResult failure(std::string id, EvalErrorKind kind, std::string message);
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kProtocolVersion = 1;

/// Wire encoding: one JSON document per line, no embedded newlines.
std::string encode_request(const EvaluationRequest& request);
EvaluationRequest decode_request(std::string_view line);
std::string encode_result(const EvaluationResult& result);
/// Throws ProtocolError for anything that is not a well-formed result.
EvaluationResult decode_result(std::string_view line);
std::string encode_hello();
/// Returns the announced protocol version; throws ProtocolError otherwise.
int decode_hello(std::string_view line);

/// Unique request token for this process.
std::string next_request_id(const std::string& hash);

/// Deterministic stand-in for trained accuracy, driven by depth, operation
/// diversity and parameter count. Not an accuracy estimate.
double surrogate_score(std::size_t depth, std::size_t distinct_ops, std::uint64_t params);
double surrogate_evaluate(const Architecture& arch);

/// Fitness source. Implementations must be safe to call from several threads.
class EvaluationBackend {
public:
    virtual ~EvaluationBackend() = default;
    virtual EvaluationResult evaluate(const EvaluationRequest& request) = 0;
};

class SurrogateBackend final : public EvaluationBackend {
public:
    EvaluationResult evaluate(const EvaluationRequest& request) override;
};

struct CacheKey {
    std::string hash;
    int epochs = 1;
    DatasetVariant dataset = DatasetVariant::Partial;
    std::uint64_t seed = 0;

    auto operator<=>(const CacheKey&) const = default;
};

struct CacheRecord {
    CacheKey key;
    double fitness = 0.0;
    double wall_time_s = 0.0;
};

/// Tab-separated line: hash, epochs, dataset, seed, fitness, wall_time_s.
std::string format_cache_record(const CacheRecord& record);
std::optional<CacheRecord> parse_cache_record(std::string_view line);

/// Fitness cache, optionally backed by an append-only record file. Loading
/// drops unparsable records and truncates a corrupt tail so appends stay
/// aligned. Writes are serialized.
class FitnessCache {
public:
    FitnessCache() = default;
    explicit FitnessCache(std::filesystem::path file);

    std::optional<CacheRecord> lookup(const CacheKey& key) const;
    void store(const CacheRecord& record);

    std::size_t size() const;
    std::size_t dropped_records() const { return dropped_; }
    const std::optional<std::filesystem::path>& file() const { return path_; }

private:
    mutable std::mutex mutex_;
    std::map<CacheKey, CacheRecord> records_;
    std::optional<std::filesystem::path> path_;
    std::ofstream out_;
    std::size_t dropped_ = 0;
};

struct FitnessOutcome {
    double fitness = 0.0;
    bool ok = false;
    bool cache_hit = false;
    double wall_time_s = 0.0;
    std::string error;
};

/// Cache front-end: a hit returns the stored fitness; a miss calls the
/// backend and stores OK results. Failed evaluations are never cached.
FitnessOutcome cached_evaluate(const Architecture& arch, const Budget& budget, std::uint64_t seed,
                               EvaluationBackend& backend, FitnessCache& cache);

struct EvaluationContext {
    EvaluationBackend& backend;
    FitnessCache& cache;
    Budget budget;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// Evaluates a batch, calling the backend once per distinct uncached key.
/// Duplicates inside the batch count as cache hits.
std::vector<FitnessOutcome> evaluate_batch(std::span<const Architecture* const> archs,
                                           EvaluationContext& ctx);

}  // namespace chainnas
