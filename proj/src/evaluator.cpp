#include "chainnas/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "chainnas/parallel.hpp"
#include "json.hpp"

namespace chainnas {

using json = nlohmann::json;

std::string_view to_string(DatasetVariant v)
{
    return v == DatasetVariant::Partial ? "PARTIAL" : "ENTIRE";
}

std::string_view to_string(EvalMode m)
{
    return m == EvalMode::Fitness ? "FITNESS" : "FINAL_TRAIN";
}

std::string_view to_string(EvalErrorKind k)
{
    switch (k) {
    case EvalErrorKind::None: return "None";
    case EvalErrorKind::ProtocolViolation: return "ProtocolViolation";
    case EvalErrorKind::Timeout: return "Timeout";
    case EvalErrorKind::TrainerCrash: return "TrainerCrash";
    case EvalErrorKind::BackendFailure: return "BackendFailure";
    }
    return "Unknown";
}

DatasetVariant dataset_from_string(std::string_view text)
{
    if (text == "PARTIAL" || text == "partial")
        return DatasetVariant::Partial;
    if (text == "ENTIRE" || text == "entire")
        return DatasetVariant::Entire;
    throw std::invalid_argument("unknown dataset variant '" + std::string(text) + "'");
}

EvalMode mode_from_string(std::string_view text)
{
    if (text == "FITNESS")
        return EvalMode::Fitness;
    if (text == "FINAL_TRAIN")
        return EvalMode::FinalTrain;
    throw std::invalid_argument("unknown evaluation mode '" + std::string(text) + "'");
}

EvaluationResult EvaluationResult::success(std::string id, double fitness)
{
    EvaluationResult r;
    r.id = std::move(id);
    r.status = EvalStatus::Ok;
    r.fitness = fitness;
    return r;
}

EvaluationResult EvaluationResult::failure(std::string id, EvalErrorKind kind, std::string message)
{
    EvaluationResult r;
    r.id = std::move(id);
    r.status = EvalStatus::Error;
    r.error_kind = kind;
    r.error_message = std::move(message);
    return r;
}

std::string encode_request(const EvaluationRequest& request)
{
    json doc = {
        {"id", request.id},
        {"architecture", json::parse(serialize_architecture(request.architecture))},
        {"budget",
         {{"epochs", request.budget.epochs},
          {"dataset_variant", std::string(to_string(request.budget.dataset))},
          {"mode", std::string(to_string(request.budget.mode))}}},
        {"seed", request.seed},
    };
    return doc.dump();
}

EvaluationRequest decode_request(std::string_view line)
{
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("malformed request: ") + e.what());
    }
    try {
        EvaluationRequest r;
        r.id = doc.at("id").get<std::string>();
        r.architecture = parse_architecture(doc.at("architecture").dump());
        const auto& b = doc.at("budget");
        r.budget.epochs = b.at("epochs").get<int>();
        r.budget.dataset = dataset_from_string(b.at("dataset_variant").get<std::string>());
        r.budget.mode = mode_from_string(b.at("mode").get<std::string>());
        r.seed = doc.value("seed", std::uint64_t{0});
        return r;
    } catch (const ProtocolError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("invalid request: ") + e.what());
    }
}

std::string encode_result(const EvaluationResult& result)
{
    json doc = {{"id", result.id}, {"status", result.ok() ? "OK" : "ERROR"}};
    if (result.ok())
        doc["fitness"] = result.fitness;
    json metrics = json::object();
    for (const auto& [k, v] : result.metrics)
        metrics[k] = v;
    doc["metrics"] = metrics;
    if (!result.ok())
        doc["error_message"] = result.error_message;
    return doc.dump();
}

EvaluationResult decode_result(std::string_view line)
{
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error&) {
        throw ProtocolError("malformed result line: " + std::string(line.substr(0, 200)));
    }
    if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string())
        throw ProtocolError("result without a string id");
    if (!doc.contains("status") || !doc["status"].is_string())
        throw ProtocolError("result without a status");

    EvaluationResult r;
    r.id = doc["id"].get<std::string>();
    const auto status = doc["status"].get<std::string>();
    if (status == "OK") {
        if (!doc.contains("fitness") || !doc["fitness"].is_number())
            throw ProtocolError("OK result without a numeric fitness");
        r.fitness = doc["fitness"].get<double>();
        if (!(r.fitness >= 0.0 && r.fitness <= 1.0))
            throw ProtocolError("fitness outside [0, 1]");
        r.status = EvalStatus::Ok;
    } else if (status == "ERROR") {
        r.status = EvalStatus::Error;
        r.error_kind = EvalErrorKind::BackendFailure;
        if (doc.contains("error_message") && doc["error_message"].is_string())
            r.error_message = doc["error_message"].get<std::string>();
    } else {
        throw ProtocolError("unknown status '" + status + "'");
    }
    if (doc.contains("metrics") && doc["metrics"].is_object()) {
        for (const auto& [k, v] : doc["metrics"].items())
            if (v.is_number())
                r.metrics[k] = v.get<double>();
    }
    return r;
}

std::string encode_hello()
{
    return json{{"hello", "chainnas-trainer"}, {"protocol", kProtocolVersion}}.dump();
}

int decode_hello(std::string_view line)
{
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error&) {
        throw ProtocolError("malformed hello line: " + std::string(line.substr(0, 200)));
    }
    if (!doc.is_object() || !doc.contains("protocol") || !doc["protocol"].is_number_integer())
        throw ProtocolError("hello line does not announce a protocol version");
    return doc["protocol"].get<int>();
}

std::string next_request_id(const std::string& hash)
{
    static std::atomic<std::uint64_t> counter{0};
    return "req-" + std::to_string(++counter) + "-" + hash.substr(0, 12);
}

double surrogate_score(std::size_t depth, std::size_t distinct_ops, std::uint64_t params)
{
    const double d = static_cast<double>(depth);
    const double depth_term = 1.0 - std::abs(d - 32.0) / std::max(d, 32.0);
    const double diversity_term = std::min<double>(static_cast<double>(distinct_ops), 10.0) / 10.0;
    const double size_term = std::min(std::log10(static_cast<double>(params) + 1.0), 8.0) / 8.0;
    return 0.5 * depth_term + 0.3 * diversity_term + 0.2 * size_term;
}

double surrogate_evaluate(const Architecture& arch)
{
    std::set<OpType> ops;
    for (const auto& layer : arch.layers)
        ops.insert(layer.op);
    return surrogate_score(arch.layers.size(), ops.size(), param_count(arch));
}

EvaluationResult SurrogateBackend::evaluate(const EvaluationRequest& request)
{
    return EvaluationResult::success(request.id, surrogate_evaluate(request.architecture));
}

std::string format_cache_record(const CacheRecord& record)
{
    char numbers[96];
    std::snprintf(numbers, sizeof numbers, "%.17g\t%.6f", record.fitness, record.wall_time_s);
    return record.key.hash + "\t" + std::to_string(record.key.epochs) + "\t" +
           std::string(to_string(record.key.dataset)) + "\t" + std::to_string(record.key.seed) + "\t" +
           numbers;
}

std::optional<CacheRecord> parse_cache_record(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string_view::npos)
            break;
        start = tab + 1;
    }
    if (fields.size() != 6 || fields[0].size() != 64)
        return std::nullopt;
    if (!std::all_of(fields[0].begin(), fields[0].end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }))
        return std::nullopt;

    CacheRecord r;
    r.key.hash = std::string(fields[0]);
    auto parse_int = [](std::string_view s, auto& out) {
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc() && ptr == s.data() + s.size();
    };
    if (!parse_int(fields[1], r.key.epochs) || !parse_int(fields[3], r.key.seed))
        return std::nullopt;
    if (fields[2] == "PARTIAL")
        r.key.dataset = DatasetVariant::Partial;
    else if (fields[2] == "ENTIRE")
        r.key.dataset = DatasetVariant::Entire;
    else
        return std::nullopt;
    // strtod: from_chars for doubles is missing from older libstdc++
    for (int i : {4, 5}) {
        const std::string text(fields[i]);
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v))
            return std::nullopt;
        (i == 4 ? r.fitness : r.wall_time_s) = v;
    }
    if (r.fitness < 0.0 || r.fitness > 1.0)
        return std::nullopt;
    return r;
}

FitnessCache::FitnessCache(std::filesystem::path file) : path_(std::move(file))
{
    std::uintmax_t valid_bytes = 0;
    bool corrupt_tail = false;
    if (std::filesystem::exists(*path_)) {
        std::ifstream in(*path_, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::size_t pos = 0;
        while (pos < content.size()) {
            const auto nl = content.find('\n', pos);
            if (nl == std::string::npos) {
                // unterminated final record: writer died mid-line
                ++dropped_;
                corrupt_tail = true;
                break;
            }
            const std::string_view line(content.data() + pos, nl - pos);
            pos = nl + 1;
            if (line.empty() || line.front() == '#') {
                valid_bytes = pos;
                continue;
            }
            if (auto record = parse_cache_record(line)) {
                records_[record->key] = *record;
                valid_bytes = pos;
            } else {
                ++dropped_;
                corrupt_tail = pos >= content.size();
                if (!corrupt_tail)
                    valid_bytes = pos;
            }
        }
        if (corrupt_tail)
            std::filesystem::resize_file(*path_, valid_bytes);
    } else if (path_->has_parent_path()) {
        std::filesystem::create_directories(path_->parent_path());
    }
    const bool fresh = !std::filesystem::exists(*path_) || std::filesystem::file_size(*path_) == 0;
    out_.open(*path_, std::ios::binary | std::ios::app);
    if (!out_)
        throw std::runtime_error("cannot open fitness cache " + path_->string());
    if (fresh)
        out_ << "# hash\tepochs\tdataset\tseed\tfitness\twall_time_s\n" << std::flush;
}

std::optional<CacheRecord> FitnessCache::lookup(const CacheKey& key) const
{
    std::lock_guard lock(mutex_);
    auto it = records_.find(key);
    if (it == records_.end())
        return std::nullopt;
    return it->second;
}

void FitnessCache::store(const CacheRecord& record)
{
    std::lock_guard lock(mutex_);
    records_[record.key] = record;
    if (out_.is_open())
        out_ << format_cache_record(record) << '\n' << std::flush;
}

std::size_t FitnessCache::size() const
{
    std::lock_guard lock(mutex_);
    return records_.size();
}

namespace {

CacheKey make_key(const std::string& hash, const Budget& budget, std::uint64_t seed)
{
    return {hash, budget.epochs, budget.dataset, seed};
}

FitnessOutcome call_backend(const Architecture& arch, const CacheKey& key, const Budget& budget,
                            EvaluationBackend& backend, FitnessCache& cache)
{
    EvaluationRequest request{next_request_id(key.hash), arch, budget, key.seed};
    const auto started = std::chrono::steady_clock::now();
    EvaluationResult result;
    try {
        result = backend.evaluate(request);
    } catch (const std::exception& e) {
        result = EvaluationResult::failure(request.id, EvalErrorKind::BackendFailure, e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    FitnessOutcome outcome;
    outcome.wall_time_s = elapsed;
    if (result.ok()) {
        outcome.ok = true;
        outcome.fitness = result.fitness;
        cache.store({key, result.fitness, elapsed});
    } else {
        outcome.error = std::string(to_string(result.error_kind)) + ": " + result.error_message;
    }
    return outcome;
}

}  // namespace

FitnessOutcome cached_evaluate(const Architecture& arch, const Budget& budget, std::uint64_t seed,
                               EvaluationBackend& backend, FitnessCache& cache)
{
    const CacheKey key = make_key(canonical_hash(arch), budget, seed);
    if (auto hit = cache.lookup(key))
        return {hit->fitness, true, true, hit->wall_time_s, {}};
    return call_backend(arch, key, budget, backend, cache);
}

std::vector<FitnessOutcome> evaluate_batch(std::span<const Architecture* const> archs,
                                           EvaluationContext& ctx)
{
    std::vector<FitnessOutcome> outcomes(archs.size());
    std::vector<CacheKey> keys;
    keys.reserve(archs.size());
    for (const Architecture* arch : archs)
        keys.push_back(make_key(canonical_hash(*arch), ctx.budget, ctx.seed));

    // first slot holding each distinct missing key
    std::map<CacheKey, std::size_t> owner;
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < archs.size(); ++i) {
        if (auto hit = ctx.cache.lookup(keys[i])) {
            outcomes[i] = {hit->fitness, true, true, hit->wall_time_s, {}};
        } else if (owner.emplace(keys[i], i).second) {
            pending.push_back(i);
        }
    }

    parallel_for(pending.size(), ctx.workers, [&](std::size_t p) {
        const std::size_t slot = pending[p];
        outcomes[slot] = call_backend(*archs[slot], keys[slot], ctx.budget, ctx.backend, ctx.cache);
    });

    for (std::size_t i = 0; i < archs.size(); ++i) {
        auto it = owner.find(keys[i]);
        if (it != owner.end() && it->second != i) {
            outcomes[i] = outcomes[it->second];
            outcomes[i].cache_hit = outcomes[i].ok;
        }
    }
    return outcomes;
}

}  // namespace chainnas
