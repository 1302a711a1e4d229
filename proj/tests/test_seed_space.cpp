#include <atomic>
#include <filesystem>

#include "chainnas/seed_space.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace chainnas;
using namespace testutil;

namespace {

class CountingBackend final : public EvaluationBackend {
public:
    EvaluationResult evaluate(const EvaluationRequest& request) override
    {
        ++calls;
        if (request.architecture.name == "broken" || request.architecture.layers.size() == 3)
            return EvaluationResult::failure(request.id, EvalErrorKind::TrainerCrash, "died");
        return EvaluationResult::success(request.id, surrogate_evaluate(request.architecture));
    }
    std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("seed descriptions load")
{
    const auto descs = load_descriptions(CHAINNAS_SEEDS_DIR);
    REQUIRE(descs.size() == 34);
    CHECK(descs.front().name == "alexnet");
    CHECK(descs.back().name == "wide_resnet50_2");
    for (const auto& d : descs)
        CHECK(validate_architecture(d).ok());
}

TEST_CASE("load_descriptions errors")
{
    const auto dir = temp_dir("descs");
    CHECK_THROWS_AS(load_descriptions(dir), NoDescriptionsError);
    try {
        load_descriptions(dir);
    } catch (const NoDescriptionsError& e) {
        CHECK(std::string(e.what()).find("no descriptions found") != std::string::npos);
    }
    CHECK_THROWS_AS(load_descriptions(dir / "missing"), NoDescriptionsError);

    write_file(dir / "bad.json", serialize_architecture(make_arch({conv(3, 8), relu()})));
    CHECK_THROWS_AS(load_descriptions(dir), ParseError);

    std::filesystem::remove(dir / "bad.json");
    auto unnamed = small_convnet();
    unnamed.name.clear();
    write_file(dir / "mine.json", serialize_architecture(unnamed));
    const auto descs = load_descriptions(dir);
    REQUIRE(descs.size() == 1);
    CHECK(descs[0].name == "mine");
    std::filesystem::remove_all(dir);
}

TEST_CASE("generation 0")
{
    SUBCASE("single description with the surrogate")
    {
        SurrogateBackend backend;
        FitnessCache cache;
        EvaluationContext ctx{backend, cache, {}, 0, 1};
        const auto a = small_convnet();
        const auto pop = build_search_space({a}, ctx);
        REQUIRE(pop.individuals.size() == 1);
        CHECK(pop.generation_index == 0);
        const auto& ind = pop.individuals[0];
        CHECK(ind.fitness == surrogate_evaluate(a));
        CHECK(ind.origin == Origin::Seed);
        CHECK(ind.id == canonical_hash(a));
        CHECK(export_dot(*ind.chain) == export_dot(build_chain(a)));
    }
    SUBCASE("repeated call is served from the cache")
    {
        CountingBackend backend;
        FitnessCache cache;
        EvaluationContext ctx{backend, cache, {}, 0, 2};
        const auto descs = load_descriptions(CHAINNAS_SEEDS_DIR);
        const auto first = build_search_space(descs, ctx);
        CHECK(backend.calls == 34);
        std::vector<FitnessOutcome> outcomes;
        const auto second = build_search_space(descs, ctx, &outcomes);
        CHECK(backend.calls == 34);
        for (const auto& o : outcomes)
            CHECK(o.cache_hit);
        for (std::size_t i = 0; i < descs.size(); ++i) {
            CHECK(first.individuals[i].fitness == second.individuals[i].fitness);
            CHECK(first.individuals[i].fitness >= 0.0);
            CHECK(first.individuals[i].fitness <= 1.0);
            CHECK(first.individuals[i].origin == Origin::Seed);
        }
    }
    SUBCASE("failed evaluations get fitness 0")
    {
        CountingBackend backend;
        FitnessCache cache;
        EvaluationContext ctx{backend, cache, {}, 0, 1};
        auto broken = small_convnet();
        broken.name = "broken";
        broken.layers[7].components["kernel_size"] = 1;
        broken.layers[7].components["padding"] = 0;
        const auto pop = build_search_space({small_convnet(), broken}, ctx);
        CHECK_FALSE(pop.individuals[0].evaluation_failed);
        CHECK(pop.individuals[1].evaluation_failed);
        CHECK(pop.individuals[1].fitness == 0.0);
        CHECK(pop.individuals[1].error.find("died") != std::string::npos);
        // failures are retried, not cached
        build_search_space({broken}, ctx);
        CHECK(backend.calls == 3);
    }
}
