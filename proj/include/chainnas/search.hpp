#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainnas/arch.hpp"
#include "chainnas/evaluator.hpp"
#include "chainnas/random.hpp"
#include "chainnas/seed_space.hpp"

namespace chainnas {

struct SearchConfig {
    std::size_t generations = 50;
    std::size_t individuals = 25;
    double elitism_rate = 0.15;
    double residual_prob = 0.10;
    std::size_t max_layers = 256;
    int partial_epochs = 1;
    int final_epochs = 100;
    std::uint64_t master_seed = 0;
    DatasetVariant dataset = DatasetVariant::Partial;
    TensorShape input_shape = TensorShape::spatial(3, 32, 32);
    std::int64_t num_classes = 10;
    unsigned workers = 1;

    /// Throws std::invalid_argument naming the first broken invariant.
    void validate() const;
};

std::string config_to_json(const SearchConfig& config);
/// Fields present in `text` override `base`; unknown fields are rejected.
SearchConfig config_from_json(std::string_view text, SearchConfig base = {});

struct GenerationRecord {
    std::size_t generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::vector<std::string> elite_ids;
    std::size_t n_cache_hits = 0;  // generated individuals whose key was already evaluated this run
    std::size_t n_failed = 0;
    double wall_time_s = 0.0;
};

struct SearchResult {
    Individual best;
    std::vector<GenerationRecord> history;
    SearchConfig config;
    Population final_population;
};

class EmptyCandidatePool : public std::runtime_error {
public:
    explicit EmptyCandidatePool(const OpType& state)
        : std::runtime_error("no individual can leave state " + state.name()) {}
};

/// Roulette-wheel draw over the individuals whose chain can leave `state`,
/// weighted by fitness; uniform when every eligible fitness is zero. The
/// pool is ordered by id so draws do not depend on population order.
const Individual& select_parent(const Population& population, const OpType& state, Rng& rng);

/// E = max(1, ceil(rate * population_size)), capped at `individuals`.
std::size_t elite_count(double elitism_rate, std::size_t population_size, std::size_t individuals);

/// With probability residual_prob a CONV2D becomes a bottleneck block
/// (3x3/pad-1 body, groups 1, no bias). Other layers pass through without
/// consuming randomness.
Layer apply_residual_substitution(Layer layer, const SearchConfig& config, Rng& rng);

/// What happened during one architecture walk.
struct GenerationTrace {
    std::vector<OpType> states;   // sampled states after START, including OUTPUT when reached
    std::size_t skipped = 0;      // spatial layers sampled after flattening
    std::size_t convolutions = 0;
    std::size_t residual_blocks = 0;
    bool forced_head = false;
};

/// Walks parent chains from START: pick a parent for the current state,
/// sample its next state and that state's component tuple, rewire input
/// dimensions to the running shape, repair collapsing kernels, and append.
/// The result always validates.
Architecture generate_architecture(const Population& population, const SearchConfig& config,
                                   SamplingStreams& streams, GenerationTrace* trace = nullptr);

/// Elites plus freshly generated, evaluated individuals. Randomness comes
/// from substreams of config.master_seed keyed by the new generation index.
Population next_generation(const Population& population, EvaluationContext& ctx,
                           const SearchConfig& config, GenerationRecord* record = nullptr);

/// Called with generation 0 (record == nullptr) and after every generation.
using GenerationObserver = std::function<void(const Population&, const GenerationRecord*)>;

SearchResult run_search(const SearchConfig& config, const std::vector<Architecture>& descriptions,
                        EvaluationContext& ctx, const GenerationObserver& observer = {});

/// Highest fitness, ties broken by smallest id.
const Individual& best_individual(const Population& population);

}  // namespace chainnas
