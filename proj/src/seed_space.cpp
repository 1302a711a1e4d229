#include "chainnas/seed_space.hpp"

#include <algorithm>

#include "chainnas/parallel.hpp"

namespace chainnas {

std::string_view to_string(Origin origin)
{
    switch (origin) {
    case Origin::Seed: return "SEED";
    case Origin::Elite: return "ELITE";
    case Origin::Generated: return "GENERATED";
    }
    return "UNKNOWN";
}

Individual Individual::make(Architecture architecture, Origin origin)
{
    Individual ind;
    ind.chain = std::make_shared<const TransitionChain>(TransitionChain::build(architecture));
    ind.id = canonical_hash(architecture);
    ind.architecture = std::move(architecture);
    ind.origin = origin;
    return ind;
}

std::vector<Architecture> load_descriptions(const std::filesystem::path& dir, const OpRegistry& registry)
{
    if (!std::filesystem::is_directory(dir))
        throw NoDescriptionsError("description directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    if (files.empty())
        throw NoDescriptionsError("no descriptions found in " + dir.string());
    std::sort(files.begin(), files.end());

    std::vector<Architecture> out;
    out.reserve(files.size());
    for (const auto& file : files) {
        Architecture arch;
        try {
            arch = load_architecture(file.string(), registry);
        } catch (const std::exception& e) {
            throw ParseError(file.filename().string() + ": " + e.what());
        }
        if (arch.name.empty())
            arch.name = file.stem().string();
        const auto report = validate_architecture(arch, registry);
        if (!report.ok())
            throw ParseError(file.filename().string() + " does not validate:\n" + report.str());
        out.push_back(std::move(arch));
    }
    return out;
}

Population build_search_space(const std::vector<Architecture>& descriptions, EvaluationContext& ctx,
                              std::vector<FitnessOutcome>* outcomes)
{
    Population pop;
    pop.generation_index = 0;
    pop.individuals.resize(descriptions.size());
    parallel_for(descriptions.size(), ctx.workers, [&](std::size_t i) {
        pop.individuals[i] = Individual::make(descriptions[i], Origin::Seed);
    });

    std::vector<const Architecture*> archs;
    archs.reserve(descriptions.size());
    for (const auto& ind : pop.individuals)
        archs.push_back(&ind.architecture);
    auto results = evaluate_batch(archs, ctx);
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& ind = pop.individuals[i];
        ind.fitness = results[i].ok ? results[i].fitness : 0.0;
        ind.evaluation_failed = !results[i].ok;
        ind.error = results[i].error;
    }
    if (outcomes != nullptr)
        *outcomes = std::move(results);
    return pop;
}

}  // namespace chainnas
