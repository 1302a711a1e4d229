#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chainnas/arch.hpp"
#include "chainnas/chain.hpp"
#include "chainnas/evaluator.hpp"

namespace chainnas {

enum class Origin { Seed, Elite, Generated };

std::string_view to_string(Origin origin);

struct Individual {
    Architecture architecture;
    std::shared_ptr<const TransitionChain> chain;
    double fitness = 0.0;
    Origin origin = Origin::Seed;
    std::string id;  // canonical_hash(architecture)
    bool evaluation_failed = false;
    std::string error;

    /// Builds the chain and id; fitness is assigned by the caller.
    static Individual make(Architecture architecture, Origin origin);
};

struct Population {
    std::size_t generation_index = 0;
    std::vector<Individual> individuals;
};

class NoDescriptionsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads every *.json description in `dir` (sorted by file name) and checks
/// that each one validates. Throws NoDescriptionsError when none exist.
std::vector<Architecture> load_descriptions(const std::filesystem::path& dir,
                                            const OpRegistry& registry = OpRegistry::builtin());

/// Generation 0: one SEED individual per description, fitness from the
/// evaluator at ctx.budget. Failed evaluations get fitness 0 and a flag.
Population build_search_space(const std::vector<Architecture>& descriptions, EvaluationContext& ctx,
                              std::vector<FitnessOutcome>* outcomes = nullptr);

}  // namespace chainnas
