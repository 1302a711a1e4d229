#include "chainnas/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "chainnas/parallel.hpp"
#include "json.hpp"

namespace chainnas {

using json = nlohmann::json;

void SearchConfig::validate() const
{
    if (!(elitism_rate >= 0.0 && elitism_rate < 1.0))
        throw std::invalid_argument("elitism rate must lie in [0, 1)");
    if (individuals < 1)
        throw std::invalid_argument("individuals per generation must be at least 1");
    if (max_layers < 2)
        throw std::invalid_argument("max_layers must be at least 2");
    if (!(residual_prob >= 0.0 && residual_prob <= 1.0))
        throw std::invalid_argument("residual probability must lie in [0, 1]");
    if (partial_epochs < 1 || final_epochs < 1)
        throw std::invalid_argument("epoch budgets must be positive");
    if (num_classes < 1)
        throw std::invalid_argument("num_classes must be positive");
    if (input_shape.is_flat() || input_shape.channels < 1 || input_shape.height < 1 || input_shape.width < 1)
        throw std::invalid_argument("input shape must be (channels, height, width) with positive sides");
}

std::string config_to_json(const SearchConfig& c)
{
    json doc = {
        {"generations", c.generations},
        {"individuals", c.individuals},
        {"elitism_rate", c.elitism_rate},
        {"residual_prob", c.residual_prob},
        {"max_layers", c.max_layers},
        {"partial_epochs", c.partial_epochs},
        {"final_epochs", c.final_epochs},
        {"master_seed", c.master_seed},
        {"dataset_variant", std::string(to_string(c.dataset))},
        {"input_shape", {c.input_shape.channels, c.input_shape.height, c.input_shape.width}},
        {"num_classes", c.num_classes},
    };
    return doc.dump(2) + "\n";
}

SearchConfig config_from_json(std::string_view text, SearchConfig base)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("malformed config: ") + e.what());
    }
    if (!doc.is_object())
        throw std::invalid_argument("config must be a JSON object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "generations")
                base.generations = value.get<std::size_t>();
            else if (key == "individuals")
                base.individuals = value.get<std::size_t>();
            else if (key == "elitism_rate")
                base.elitism_rate = value.get<double>();
            else if (key == "residual_prob")
                base.residual_prob = value.get<double>();
            else if (key == "max_layers")
                base.max_layers = value.get<std::size_t>();
            else if (key == "partial_epochs")
                base.partial_epochs = value.get<int>();
            else if (key == "final_epochs")
                base.final_epochs = value.get<int>();
            else if (key == "master_seed")
                base.master_seed = value.get<std::uint64_t>();
            else if (key == "dataset_variant")
                base.dataset = dataset_from_string(value.get<std::string>());
            else if (key == "input_shape") {
                const auto s = value.get<std::vector<std::int64_t>>();
                if (s.size() != 3)
                    throw std::invalid_argument("input_shape needs three entries");
                base.input_shape = TensorShape::spatial(s[0], s[1], s[2]);
            } else if (key == "num_classes")
                base.num_classes = value.get<std::int64_t>();
            else if (key == "workers")
                base.workers = value.get<unsigned>();
            else
                throw std::invalid_argument("unknown config field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
    return base;
}

namespace {

std::vector<const Individual*> by_id(const Population& population)
{
    std::vector<const Individual*> pool;
    pool.reserve(population.individuals.size());
    for (const auto& ind : population.individuals)
        pool.push_back(&ind);
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Individual* a, const Individual* b) { return a->id < b->id; });
    return pool;
}

const Individual* roulette(const std::vector<const Individual*>& pool, const OpType& state, Rng& rng)
{
    double total = 0.0;
    std::size_t eligible = 0;
    for (const Individual* ind : pool) {
        if (ind->chain->can_leave(state)) {
            total += ind->fitness;
            ++eligible;
        }
    }
    if (eligible == 0)
        return nullptr;

    if (total <= 0.0) {
        std::uint64_t pick = rng.below(eligible);
        for (const Individual* ind : pool)
            if (ind->chain->can_leave(state) && pick-- == 0)
                return ind;
    }
    double u = rng.uniform() * total;
    const Individual* last = nullptr;
    for (const Individual* ind : pool) {
        if (!ind->chain->can_leave(state))
            continue;
        if (ind->fitness > 0.0)
            last = ind;
        if (u < ind->fitness)
            return ind;
        u -= ind->fitness;
    }
    return last;  // rounding left u just past the final positive weight
}

bool needs_spatial_input(OpKind kind)
{
    switch (kind) {
    case OpKind::Conv:
    case OpKind::BatchNorm:
    case OpKind::Pool:
    case OpKind::AdaptivePool:
    case OpKind::ChannelShuffle:
        return true;
    default:
        return false;
    }
}

std::int64_t gcd3(std::int64_t a, std::int64_t b, std::int64_t c)
{
    return std::gcd(a, std::gcd(b, c));
}

// Overwrites input dimensions with the running shape and shrinks kernels
// that would collapse the spatial extent.
void fit_to_shape(Layer& layer, OpKind kind, const TensorShape& shape)
{
    auto& c = layer.components;
    const std::int64_t side = std::min(shape.height, shape.width);
    switch (kind) {
    case OpKind::Conv: {
        c["in_channels"] = static_cast<double>(shape.channels);
        const auto out = layer.get("out_channels");
        c["groups"] = static_cast<double>(gcd3(layer.get("groups"), shape.channels, out));
        if (!layer.is_residual_block) {
            const auto reach = side + 2 * layer.get("padding");
            if (layer.get("kernel_size") > reach)
                c["kernel_size"] = static_cast<double>(reach);
        }
        break;
    }
    case OpKind::BatchNorm:
        c["num_features"] = static_cast<double>(shape.channels);
        break;
    case OpKind::Pool: {
        auto k = layer.get("kernel_size");
        auto p = layer.get("padding");
        for (;;) {
            if (2 * p > k)
                p = k / 2;
            else if (side + 2 * p < k)
                k = side + 2 * p;
            else
                break;
        }
        c["kernel_size"] = static_cast<double>(k);
        c["padding"] = static_cast<double>(p);
        break;
    }
    case OpKind::Linear:
        c["in_features"] = static_cast<double>(shape.features());
        break;
    case OpKind::ChannelShuffle:
        c["groups"] = static_cast<double>(std::gcd(layer.get("groups"), shape.channels));
        break;
    case OpKind::AdaptivePool:
    case OpKind::Elementwise:
    case OpKind::Flatten:
        break;
    }
}

void append_head(Architecture& arch, TensorShape shape)
{
    if (!shape.is_flat()) {
        arch.layers.push_back({OpType("ADAPTIVEAVGPOOL2D"), {{"output_size", 1}}, false});
        arch.layers.push_back({OpType("FLATTEN"), {}, false});
        shape = TensorShape::flat(shape.channels);
    }
    arch.layers.push_back({OpType("LINEAR"),
                           {{"in_features", static_cast<double>(shape.features())},
                            {"out_features", static_cast<double>(arch.num_classes)}},
                           false});
}

struct RankedLess {
    bool operator()(const Individual* a, const Individual* b) const
    {
        if (a->fitness != b->fitness)
            return a->fitness > b->fitness;
        return a->id < b->id;
    }
};

GenerationRecord summarize(const Population& pop)
{
    GenerationRecord rec;
    rec.generation = pop.generation_index;
    if (pop.individuals.empty())
        return rec;
    double sum = 0.0;
    rec.best_fitness = pop.individuals.front().fitness;
    for (const auto& ind : pop.individuals) {
        sum += ind.fitness;
        rec.best_fitness = std::max(rec.best_fitness, ind.fitness);
    }
    rec.mean_fitness = sum / static_cast<double>(pop.individuals.size());
    return rec;
}

Population advance(const Population& population, EvaluationContext& ctx, const SearchConfig& config,
                   std::set<std::string>& evaluated, GenerationRecord* record)
{
    if (population.individuals.empty())
        throw std::invalid_argument("cannot advance an empty population");
    const auto started = std::chrono::steady_clock::now();
    const std::size_t generation = population.generation_index + 1;

    std::vector<const Individual*> ranked;
    for (const auto& ind : population.individuals)
        ranked.push_back(&ind);
    std::sort(ranked.begin(), ranked.end(), RankedLess{});
    const std::size_t elites = elite_count(config.elitism_rate, ranked.size(), config.individuals);

    Population next;
    next.generation_index = generation;
    next.individuals.reserve(config.individuals);
    std::vector<std::string> elite_ids;
    for (std::size_t i = 0; i < elites && i < ranked.size(); ++i) {
        Individual copy = *ranked[i];
        copy.origin = Origin::Elite;
        elite_ids.push_back(copy.id);
        next.individuals.push_back(std::move(copy));
    }

    const std::size_t fresh = config.individuals - next.individuals.size();
    std::vector<Individual> generated(fresh);
    parallel_for(fresh, config.workers, [&](std::size_t slot) {
        auto streams = SamplingStreams::derive(config.master_seed, generation, slot);
        Architecture arch = generate_architecture(population, config, streams);
        arch.name = "g" + std::to_string(generation) + "_i" + std::to_string(slot);
        generated[slot] = Individual::make(std::move(arch), Origin::Generated);
    });

    std::vector<const Architecture*> archs;
    for (const auto& ind : generated)
        archs.push_back(&ind.architecture);
    EvaluationContext batch_ctx = ctx;
    batch_ctx.workers = config.workers;
    const auto outcomes = evaluate_batch(archs, batch_ctx);

    GenerationRecord rec;
    for (std::size_t i = 0; i < fresh; ++i) {
        auto& ind = generated[i];
        ind.fitness = outcomes[i].ok ? outcomes[i].fitness : 0.0;
        ind.evaluation_failed = !outcomes[i].ok;
        ind.error = outcomes[i].error;
        if (!evaluated.insert(ind.id).second)
            ++rec.n_cache_hits;
        if (ind.evaluation_failed)
            ++rec.n_failed;
        next.individuals.push_back(std::move(ind));
    }

    if (record != nullptr) {
        const auto summary = summarize(next);
        rec.generation = generation;
        rec.best_fitness = summary.best_fitness;
        rec.mean_fitness = summary.mean_fitness;
        rec.elite_ids = std::move(elite_ids);
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        *record = std::move(rec);
    }
    return next;
}

}  // namespace

const Individual& select_parent(const Population& population, const OpType& state, Rng& rng)
{
    const Individual* pick = roulette(by_id(population), state, rng);
    if (pick == nullptr)
        throw EmptyCandidatePool(state);
    return *pick;
}

std::size_t elite_count(double elitism_rate, std::size_t population_size, std::size_t individuals)
{
    // 0.15 * 20 must give 3, not 4: drop the representation error before ceil
    const double raw = elitism_rate * static_cast<double>(population_size);
    const double rounded = std::round(raw);
    const double exact = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(exact));
    return std::min(count, individuals);
}

Layer apply_residual_substitution(Layer layer, const SearchConfig& config, Rng& rng)
{
    if (layer.op.name() != "CONV2D" || layer.is_residual_block)
        return layer;
    if (!rng.bernoulli(config.residual_prob))
        return layer;
    layer.is_residual_block = true;
    layer.components["kernel_size"] = 3;
    layer.components["padding"] = 1;
    layer.components["groups"] = 1;
    layer.components["bias"] = 0;
    return layer;
}

Architecture generate_architecture(const Population& population, const SearchConfig& config,
                                   SamplingStreams& streams, GenerationTrace* trace)
{
    const OpRegistry& registry = OpRegistry::builtin();
    GenerationTrace local;
    GenerationTrace& t = trace != nullptr ? *trace : local;
    t = {};

    Architecture arch;
    arch.input_shape = config.input_shape;
    arch.num_classes = config.num_classes;
    TensorShape shape = arch.input_shape;

    const auto pool = by_id(population);
    const std::size_t max_steps = 4 * config.max_layers;
    OpType state = OpType::start();
    bool reached_output = false;

    for (std::size_t step = 0; step < max_steps && arch.layers.size() < config.max_layers; ++step) {
        const Individual* parent = roulette(pool, state, streams.selection);
        if (parent == nullptr)
            break;
        OpType next = parent->chain->sample_transition(state, streams.transition);
        t.states.push_back(next);
        if (next == OpType::output()) {
            reached_output = true;
            break;
        }
        Layer layer{next, parent->chain->sample_components(next, streams.components), false};
        state = next;

        const OpKind kind = registry.at(layer.op).kind;
        if (needs_spatial_input(kind) && shape.is_flat()) {
            ++t.skipped;
            continue;
        }
        if (kind == OpKind::Linear && !shape.is_flat()) {
            arch.layers.push_back({OpType("FLATTEN"), {}, false});
            shape = TensorShape::flat(shape.elements());
        }
        if (kind == OpKind::Conv) {
            ++t.convolutions;
            layer = apply_residual_substitution(std::move(layer), config, streams.residual);
            if (layer.is_residual_block)
                ++t.residual_blocks;
        }
        fit_to_shape(layer, kind, shape);
        shape = apply_layer(layer, shape, registry);
        arch.layers.push_back(std::move(layer));
    }

    const bool ends_in_linear =
        !arch.layers.empty() && registry.at(arch.layers.back().op).kind == OpKind::Linear;
    if (reached_output && ends_in_linear) {
        arch.layers.back().components["out_features"] = static_cast<double>(arch.num_classes);
    } else {
        t.forced_head = true;
        append_head(arch, shape);
    }
    return arch;
}

Population next_generation(const Population& population, EvaluationContext& ctx,
                           const SearchConfig& config, GenerationRecord* record)
{
    std::set<std::string> evaluated;
    for (const auto& ind : population.individuals)
        evaluated.insert(ind.id);
    return advance(population, ctx, config, evaluated, record);
}

const Individual& best_individual(const Population& population)
{
    if (population.individuals.empty())
        throw std::invalid_argument("empty population has no best individual");
    const Individual* best = &population.individuals.front();
    for (const auto& ind : population.individuals)
        if (RankedLess{}(&ind, best))
            best = &ind;
    return *best;
}

SearchResult run_search(const SearchConfig& config, const std::vector<Architecture>& descriptions,
                        EvaluationContext& ctx, const GenerationObserver& observer)
{
    config.validate();
    if (descriptions.empty())
        throw NoDescriptionsError("search needs at least one description");

    EvaluationContext run_ctx = ctx;
    run_ctx.budget = {config.partial_epochs, config.dataset, EvalMode::Fitness};
    run_ctx.workers = config.workers;

    Population population = build_search_space(descriptions, run_ctx);
    std::set<std::string> evaluated;
    for (const auto& ind : population.individuals)
        evaluated.insert(ind.id);
    if (observer)
        observer(population, nullptr);

    SearchResult result;
    result.config = config;
    result.history.reserve(config.generations);
    for (std::size_t g = 0; g < config.generations; ++g) {
        GenerationRecord record;
        population = advance(population, run_ctx, config, evaluated, &record);
        result.history.push_back(record);
        if (observer)
            observer(population, &result.history.back());
    }
    result.best = best_individual(population);
    result.final_population = std::move(population);
    return result;
}

}  // namespace chainnas
