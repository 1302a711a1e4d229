#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chainnas/arch.hpp"
#include "chainnas/chain.hpp"
#include "chainnas/evaluator.hpp"
#include "chainnas/search.hpp"
#include "chainnas/seed_space.hpp"

namespace py = pybind11;
using namespace chainnas;

namespace {

py::tuple shape_tuple(const TensorShape& s)
{
    if (s.is_flat())
        return py::make_tuple(s.channels);
    return py::make_tuple(s.channels, s.height, s.width);
}

py::dict record_dict(const GenerationRecord& r)
{
    py::dict d;
    d["generation"] = r.generation;
    d["best_fitness"] = r.best_fitness;
    d["mean_fitness"] = r.mean_fitness;
    d["elite_ids"] = r.elite_ids;
    d["n_cache_hits"] = r.n_cache_hits;
    d["n_failed"] = r.n_failed;
    d["wall_time_s"] = r.wall_time_s;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Transition-chain architecture search engine";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ArchError>(m, "ArchError", PyExc_ValueError);
    py::register_exception<ChainError>(m, "ChainError", PyExc_ValueError);

    py::class_<Layer>(m, "Layer")
        .def_property_readonly("op", [](const Layer& l) { return l.op.name(); })
        .def_readonly("components", &Layer::components)
        .def_readonly("is_residual_block", &Layer::is_residual_block)
        .def("__repr__", [](const Layer& l) { return "<Layer " + l.op.name() + ">"; });

    py::class_<Architecture>(m, "Architecture")
        .def_readonly("name", &Architecture::name)
        .def_readonly("layers", &Architecture::layers)
        .def_property_readonly("input_shape", [](const Architecture& a) { return shape_tuple(a.input_shape); })
        .def_readonly("num_classes", &Architecture::num_classes)
        .def("__len__", [](const Architecture& a) { return a.layers.size(); })
        .def("__eq__", [](const Architecture& a, const Architecture& b) { return a == b; });

    m.def("parse_architecture", [](const std::string& text) { return parse_architecture(text); });
    m.def("load_architecture", [](const std::string& path) { return load_architecture(path); });
    m.def("serialize_architecture", &serialize_architecture);
    m.def("infer_shapes", [](const Architecture& a) {
        std::vector<py::tuple> out;
        for (const auto& s : infer_shapes(a))
            out.push_back(shape_tuple(s));
        return out;
    });
    m.def("validate_architecture", [](const Architecture& a) {
        std::vector<py::tuple> out;
        for (const auto& v : validate_architecture(a).violations)
            out.push_back(py::make_tuple(std::string(to_string(v.kind)), v.layer, v.message));
        return out;
    });
    m.def("param_count", [](const Architecture& a) { return param_count(a); });
    m.def("canonical_hash", &canonical_hash);
    m.def("surrogate_evaluate", &surrogate_evaluate);
    m.def("registry_json", [] { return OpRegistry::builtin().to_json(); });
    m.def("load_descriptions", [](const std::string& dir) { return load_descriptions(dir); });

    py::class_<TransitionChain>(m, "TransitionChain")
        .def_property_readonly("states",
                               [](const TransitionChain& c) {
                                   std::vector<std::string> out;
                                   for (const auto& [op, s] : c.states())
                                       out.push_back(op.name());
                                   return out;
                               })
        .def("probability",
             [](const TransitionChain& c, const std::string& from, const std::string& to) {
                 const auto p = c.probability(OpType(from), OpType(to));
                 return py::make_tuple(p.numerator, p.denominator);
             })
        .def("sample_transition",
             [](const TransitionChain& c, const std::string& state, std::uint64_t seed, std::size_t draws) {
                 Rng rng(seed);
                 std::vector<std::string> out;
                 for (std::size_t i = 0; i < draws; ++i)
                     out.push_back(c.sample_transition(OpType(state), rng).name());
                 return out;
             },
             py::arg("state"), py::arg("seed") = 0, py::arg("draws") = 1);

    m.def("build_chain", &build_chain);
    m.def("export_dot", &export_dot, py::arg("chain"), py::arg("graph_name") = "chain");

    py::class_<SearchConfig>(m, "SearchConfig")
        .def(py::init<>())
        .def_readwrite("generations", &SearchConfig::generations)
        .def_readwrite("individuals", &SearchConfig::individuals)
        .def_readwrite("elitism_rate", &SearchConfig::elitism_rate)
        .def_readwrite("residual_prob", &SearchConfig::residual_prob)
        .def_readwrite("max_layers", &SearchConfig::max_layers)
        .def_readwrite("master_seed", &SearchConfig::master_seed)
        .def_readwrite("workers", &SearchConfig::workers)
        .def("to_json", &config_to_json);

    m.def(
        "run_search",
        [](const SearchConfig& config, const std::vector<Architecture>& descriptions) {
            SurrogateBackend backend;
            FitnessCache cache;
            EvaluationContext ctx{backend, cache, {config.partial_epochs, config.dataset, EvalMode::Fitness},
                                  config.master_seed, config.workers};
            SearchResult result;
            {
                py::gil_scoped_release release;
                result = run_search(config, descriptions, ctx);
            }
            py::dict out;
            out["best_id"] = result.best.id;
            out["best_fitness"] = result.best.fitness;
            out["best_architecture"] = result.best.architecture;
            py::list history;
            for (const auto& r : result.history)
                history.append(record_dict(r));
            out["history"] = history;
            return out;
        },
        py::arg("config"), py::arg("descriptions"),
        "Run the search with the built-in surrogate evaluator.");

    m.attr("__version__") = "0.1.0";
}
