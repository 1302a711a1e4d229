#include "chainnas/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "chainnas/chain.hpp"
#include "chainnas/external.hpp"
#include "chainnas/search.hpp"
#include "json.hpp"

#ifndef CHAINNAS_DEFAULT_DESCRIPTIONS
#define CHAINNAS_DEFAULT_DESCRIPTIONS "data/seeds"
#endif

namespace chainnas {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CommandError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string descriptions = CHAINNAS_DEFAULT_DESCRIPTIONS;
    std::string config_file;
    std::string evaluator = "surrogate";
    std::string trainer_cmd;
    std::string dataset = "partial";
    std::string out = "runs";
    std::string cache_file;
    double timeout_s = 3600.0;
    bool reproducible = false;

    // search
    std::size_t generations = 0;
    std::size_t individuals = 0;
    double elitism = 0;
    double residual_prob = 0;
    std::size_t max_layers = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;

    // train-best
    std::string run_dir;
    int epochs = 100;

    // export-chain
    std::string target;
};

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CommandError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw CommandError("cannot write " + path.string());
    out << text;
    if (!out.flush())
        throw CommandError("failed writing " + path.string());
}

std::string utc_timestamp(const char* format)
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, format, &tm);
    return buf;
}

std::string short_hash(const std::string& text)
{
    // FNV-1a is plenty for an 8-hex-digit directory suffix
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 8);
}

/// Fresh directory `<out>/<timestamp>-<hash>`, suffixed when it already exists.
std::pair<std::string, fs::path> make_run_dir(const fs::path& out, const std::string& config_text)
{
    const std::string base = utc_timestamp("%Y%m%dT%H%M%SZ") + "-" + short_hash(config_text);
    std::string run_id = base;
    fs::create_directories(out);
    for (int i = 1; fs::exists(out / run_id); ++i)
        run_id = base + "-" + std::to_string(i);
    fs::create_directories(out / run_id);
    return {run_id, out / run_id};
}

std::string fmt(const char* format, double value)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, format, value);
    return buf;
}

/// Backend, cache and context kept alive together for one command.
struct EvaluatorSetup {
    std::unique_ptr<EvaluationBackend> backend;
    std::unique_ptr<FitnessCache> cache;
    std::unique_ptr<EvaluationContext> ctx;
};

EvaluatorSetup make_evaluator(const Options& opt, const fs::path& default_cache, unsigned workers,
                              std::uint64_t seed, Budget budget)
{
    EvaluatorSetup s;
    if (opt.evaluator == "surrogate") {
        s.backend = std::make_unique<SurrogateBackend>();
    } else if (opt.evaluator == "external") {
        if (opt.trainer_cmd.empty())
            throw CommandError("--evaluator external needs --trainer-cmd");
        TrainerOptions topt;
        topt.command = opt.trainer_cmd;
        topt.timeout = std::chrono::milliseconds(static_cast<long long>(opt.timeout_s * 1000.0));
        topt.processes = std::max(1U, workers);
        s.backend = std::make_unique<ExternalBackend>(topt);
    } else {
        throw CommandError("unknown evaluator '" + opt.evaluator + "'");
    }
    const fs::path cache_path = opt.cache_file.empty() ? default_cache : fs::path(opt.cache_file);
    s.cache = std::make_unique<FitnessCache>(cache_path);
    s.ctx = std::make_unique<EvaluationContext>(EvaluationContext{*s.backend, *s.cache, budget, seed, workers});
    return s;
}

json seeds_json(const std::vector<Architecture>& descriptions)
{
    json seeds = json::array();
    for (const auto& d : descriptions)
        seeds.push_back({{"name", d.name}, {"hash", canonical_hash(d)}});
    return seeds;
}

SearchConfig resolve_config(const Options& opt, const CLI::App& cmd)
{
    SearchConfig config;
    if (!opt.config_file.empty())
        config = config_from_json(read_file(opt.config_file), config);
    auto given = [&](const char* name) { return cmd.get_option(name)->count() > 0; };
    if (given("--generations"))
        config.generations = opt.generations;
    if (given("--individuals"))
        config.individuals = opt.individuals;
    if (given("--elitism"))
        config.elitism_rate = opt.elitism;
    if (given("--residual-prob"))
        config.residual_prob = opt.residual_prob;
    if (given("--max-layers"))
        config.max_layers = opt.max_layers;
    if (given("--seed"))
        config.master_seed = opt.seed;
    if (given("--dataset"))
        config.dataset = dataset_from_string(opt.dataset);
    if (given("--workers"))
        config.workers = opt.workers;
    config.validate();
    return config;
}

std::string history_csv(const std::vector<GenerationRecord>& history, bool reproducible)
{
    std::string out = "generation,best_fitness,mean_fitness,n_cache_hits,wall_time_s\n";
    for (const auto& r : history) {
        out += std::to_string(r.generation) + "," + fmt("%.6f", r.best_fitness) + "," +
               fmt("%.6f", r.mean_fitness) + "," + std::to_string(r.n_cache_hits) + "," +
               fmt("%.3f", reproducible ? 0.0 : r.wall_time_s) + "\n";
    }
    return out;
}

json population_json(const Population& pop)
{
    json inds = json::array();
    for (const auto& ind : pop.individuals) {
        json j = {{"hash", ind.id},
                  {"name", ind.architecture.name},
                  {"fitness", ind.fitness},
                  {"origin", std::string(to_string(ind.origin))}};
        if (ind.evaluation_failed)
            j["error"] = ind.error;
        inds.push_back(std::move(j));
    }
    return {{"generation", pop.generation_index}, {"individuals", inds}};
}

void check_outputs(const std::vector<fs::path>& files)
{
    for (const auto& f : files) {
        if (!fs::exists(f))
            throw CommandError("missing output " + f.string());
        const auto ext = f.extension();
        const std::string text = read_file(f);
        if (ext == ".json") {
            if (!json::accept(text))
                throw CommandError("output " + f.string() + " does not parse");
        } else if (ext == ".csv") {
            if (text.rfind("generation,", 0) != 0 && text.rfind("model,", 0) != 0)
                throw CommandError("output " + f.string() + " lacks its header");
        } else if (ext == ".dot") {
            if (text.rfind("digraph ", 0) != 0)
                throw CommandError("output " + f.string() + " is not a graph");
        }
    }
}

int cmd_build_space(const Options& opt, std::ostream& out)
{
    const auto started = std::chrono::steady_clock::now();
    const auto descriptions = load_descriptions(opt.descriptions);
    const DatasetVariant dataset = dataset_from_string(opt.dataset);
    const json settings = {{"evaluator", opt.evaluator},
                           {"dataset_variant", std::string(to_string(dataset))},
                           {"seed", opt.seed}};
    auto [run_id, dir] = make_run_dir(opt.out, settings.dump());
    auto eval = make_evaluator(opt, fs::path(opt.out) / "fitness_cache.tsv", opt.workers, opt.seed,
                               {1, dataset, EvalMode::Fitness});

    const json manifest = {{"run_id", run_id},
                           {"command", "build-space"},
                           {"tool_version", kVersion},
                           {"started_at", utc_timestamp("%Y-%m-%dT%H:%M:%SZ")},
                           {"settings", settings},
                           {"seeds", seeds_json(descriptions)}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::vector<FitnessOutcome> outcomes;
    const auto population = build_search_space(descriptions, *eval.ctx, &outcomes);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    std::string table = "model,hash,fitness,status,wall_time_s\n";
    out << "model                       fitness   status  wall_time_s\n";
    for (std::size_t i = 0; i < population.individuals.size(); ++i) {
        const auto& ind = population.individuals[i];
        const char* status = ind.evaluation_failed ? "ERROR" : (outcomes[i].cache_hit ? "CACHED" : "OK");
        const double wall = opt.reproducible ? 0.0 : outcomes[i].wall_time_s;
        table += ind.architecture.name + "," + ind.id + "," + fmt("%.6f", ind.fitness) + "," + status + "," +
                 fmt("%.3f", wall) + "\n";
        char line[160];
        std::snprintf(line, sizeof line, "%-26s %8.4f  %-6s  %10.3f\n", ind.architecture.name.c_str(),
                      ind.fitness, status, wall);
        out << line;
    }
    write_file(dir / "space.csv", table);
    out << "elapsed: " << fmt("%.3f", elapsed) << " s (" << fmt("%.6f", elapsed / 86400.0) << " days)\n";
    out << "run directory: " << dir.string() << "\n";
    check_outputs({dir / "manifest.json", dir / "space.csv"});
    return 0;
}

int cmd_search(const Options& opt, const CLI::App& cmd, std::ostream& out)
{
    const SearchConfig config = resolve_config(opt, cmd);
    const auto descriptions = load_descriptions(opt.descriptions);
    const std::string config_text = config_to_json(config);
    auto [run_id, dir] = make_run_dir(opt.out, config_text + opt.evaluator);
    auto eval = make_evaluator(opt, fs::path(opt.out) / "fitness_cache.tsv", config.workers,
                               config.master_seed,
                               {config.partial_epochs, config.dataset, EvalMode::Fitness});

    const json manifest = {{"run_id", run_id},
                           {"command", "search"},
                           {"tool_version", kVersion},
                           {"started_at", utc_timestamp("%Y-%m-%dT%H:%M:%SZ")},
                           {"evaluator", opt.evaluator},
                           {"config", json::parse(config_text)},
                           {"seeds", seeds_json(descriptions)}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    fs::create_directories(dir / "generations");

    const auto started = std::chrono::steady_clock::now();
    std::vector<fs::path> outputs{dir / "manifest.json"};
    auto observer = [&](const Population& pop, const GenerationRecord* rec) {
        char name[32];
        std::snprintf(name, sizeof name, "gen_%03zu.json", pop.generation_index);
        const auto path = dir / "generations" / name;
        write_file(path, population_json(pop).dump(2) + "\n");
        outputs.push_back(path);
        if (rec != nullptr)
            out << "generation " << rec->generation << ": best " << fmt("%.6f", rec->best_fitness)
                << " mean " << fmt("%.6f", rec->mean_fitness) << "\n";
    };
    const SearchResult result = run_search(config, descriptions, *eval.ctx, observer);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    write_file(dir / "history.csv", history_csv(result.history, opt.reproducible));
    write_file(dir / "best_architecture.json", serialize_architecture(result.best.architecture));
    write_file(dir / "best_chain.dot", export_dot(*result.best.chain, result.best.architecture.name));

    json history = json::array();
    for (const auto& r : result.history)
        history.push_back({{"generation", r.generation},
                           {"best_fitness", r.best_fitness},
                           {"mean_fitness", r.mean_fitness},
                           {"elite_ids", r.elite_ids},
                           {"n_cache_hits", r.n_cache_hits},
                           {"n_failed", r.n_failed},
                           {"wall_time_s", opt.reproducible ? 0.0 : r.wall_time_s}});
    const json summary = {
        {"run_id", run_id},
        {"finished_at", utc_timestamp("%Y-%m-%dT%H:%M:%SZ")},
        {"elapsed_s", opt.reproducible ? 0.0 : elapsed},
        {"best",
         {{"id", result.best.id},
          {"name", result.best.architecture.name},
          {"fitness", result.best.fitness},
          {"origin", std::string(to_string(result.best.origin))},
          {"layers", result.best.architecture.layers.size()},
          {"params", param_count(result.best.architecture)}}},
        {"config", json::parse(config_text)},
        {"history", history}};
    write_file(dir / "result.json", summary.dump(2) + "\n");

    outputs.insert(outputs.end(), {dir / "history.csv", dir / "best_architecture.json",
                                   dir / "best_chain.dot", dir / "result.json"});
    check_outputs(outputs);
    load_architecture((dir / "best_architecture.json").string());

    out << "best: " << result.best.architecture.name << " fitness " << fmt("%.6f", result.best.fitness)
        << " (" << result.best.architecture.layers.size() << " layers, "
        << fmt("%.2f", static_cast<double>(param_count(result.best.architecture)) / 1e6) << " M params)\n";
    out << "run directory: " << dir.string() << "\n";
    return 0;
}

int cmd_train_best(const Options& opt, const CLI::App& cmd, std::ostream& out)
{
    const fs::path run(opt.run_dir);
    const fs::path best_file = run / "best_architecture.json";
    if (!fs::is_directory(run) || !fs::exists(best_file))
        throw CommandError("no completed run directory at " + opt.run_dir);
    if (opt.trainer_cmd.empty())
        throw CommandError("train-best needs --trainer-cmd");

    const Architecture arch = load_architecture(best_file.string());
    const DatasetVariant dataset =
        cmd.get_option("--dataset")->count() > 0 ? dataset_from_string(opt.dataset) : DatasetVariant::Entire;

    TrainerOptions topt;
    topt.command = opt.trainer_cmd;
    if (cmd.get_option("--timeout")->count() > 0)
        topt.final_train_timeout = std::chrono::milliseconds(static_cast<long long>(opt.timeout_s * 1000.0));
    ExternalBackend backend(topt);

    const std::string id = canonical_hash(arch);
    EvaluationRequest request{next_request_id(id), arch, {opt.epochs, dataset, EvalMode::FinalTrain}, opt.seed};
    const EvaluationResult result = backend.evaluate(request);
    if (!result.ok())
        throw CommandError("final training failed: " + std::string(to_string(result.error_kind)) + ": " +
                           result.error_message);
    auto test = result.metrics.find("test_accuracy");
    if (test == result.metrics.end())
        throw CommandError("trainer reported no test_accuracy");

    const fs::path out_root = cmd.get_option("--out")->count() > 0 ? fs::path(opt.out) : run.parent_path();
    const json settings = {{"run", run.filename().string()}, {"epochs", opt.epochs}};
    auto [run_id, dir] = make_run_dir(out_root, settings.dump());
    json metrics = json::object();
    for (const auto& [k, v] : result.metrics)
        metrics[k] = v;
    const double error_pct = (1.0 - test->second) * 100.0;
    const json report = {{"run_id", run_id},
                         {"source_run", run.string()},
                         {"architecture", id},
                         {"epochs", opt.epochs},
                         {"dataset_variant", std::string(to_string(dataset))},
                         {"validation_accuracy", result.fitness},
                         {"test_accuracy", test->second},
                         {"test_error_percent", error_pct},
                         {"metrics", metrics}};
    write_file(dir / "final_train.json", report.dump(2) + "\n");
    check_outputs({dir / "final_train.json"});

    out << "test accuracy: " << fmt("%.2f", test->second * 100.0) << "%\n";
    out << "test error: " << fmt("%.2f", error_pct) << "%\n";
    out << "report: " << (dir / "final_train.json").string() << "\n";
    return 0;
}

int cmd_export_chain(const Options& opt, std::ostream& out)
{
    fs::path source(opt.target);
    if (source.extension() != ".json" || !fs::exists(source))
        source = fs::path(opt.descriptions) / (opt.target + ".json");
    if (!fs::exists(source))
        throw CommandError("unknown model '" + opt.target + "'");
    Architecture arch = load_architecture(source.string());
    if (arch.name.empty())
        arch.name = source.stem().string();
    const std::string dot = export_dot(build_chain(arch), arch.name);
    fs::create_directories(opt.out);
    const fs::path target = fs::path(opt.out) / (source.stem().string() + ".dot");
    write_file(target, dot);
    check_outputs({target});
    out << target.string() << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Options opt;
    CLI::App app{"Architecture search over transition chains of reference CNNs", "chainnas"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--descriptions", opt.descriptions, "Directory of architecture descriptions")
            ->capture_default_str();
        cmd->add_option("--evaluator", opt.evaluator, "Fitness evaluator")
            ->check(CLI::IsMember({"surrogate", "external"}))
            ->capture_default_str();
        cmd->add_option("--trainer-cmd", opt.trainer_cmd, "Command starting an external trainer");
        cmd->add_option("--dataset", opt.dataset, "Dataset variant for fitness evaluation")
            ->check(CLI::IsMember({"partial", "entire"}));
        cmd->add_option("--workers", opt.workers, "Concurrent evaluations")->check(CLI::PositiveNumber);
        cmd->add_option("--out", opt.out, "Output root directory")->capture_default_str();
        cmd->add_option("--cache", opt.cache_file, "Fitness cache file (default: <out>/fitness_cache.tsv)");
        cmd->add_option("--timeout", opt.timeout_s, "Per-request trainer timeout in seconds");
        cmd->add_option("--seed", opt.seed, "Master seed");
        cmd->add_flag("--reproducible", opt.reproducible, "Write zero for every wall-clock field");
    };

    auto* build = app.add_subcommand("build-space", "Evaluate the seed models (generation 0)");
    add_common(build);

    auto* search = app.add_subcommand("search", "Run the evolutionary search");
    add_common(search);
    search->add_option("--config", opt.config_file, "JSON config; flags override it");
    search->add_option("--generations", opt.generations, "Number of generations")->check(CLI::NonNegativeNumber);
    search->add_option("--individuals", opt.individuals, "Individuals per generation")->check(CLI::PositiveNumber);
    search->add_option("--elitism", opt.elitism, "Elitism rate in [0, 1)");
    search->add_option("--residual-prob", opt.residual_prob, "Residual substitution probability");
    search->add_option("--max-layers", opt.max_layers, "Cap on sampled layers per architecture");

    auto* train = app.add_subcommand("train-best", "Train the best architecture of a run from scratch");
    add_common(train);
    train->add_option("--run", opt.run_dir, "Completed search run directory")->required();
    train->add_option("--epochs", opt.epochs, "Training epochs")->capture_default_str();

    auto* export_chain = app.add_subcommand("export-chain", "Write the transition chain of a model as DOT");
    add_common(export_chain);
    export_chain->add_option("target", opt.target, "Seed model name or architecture document path")->required();

    std::vector<std::string> argv_storage{"chainnas"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage)
        argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*build)
            return cmd_build_space(opt, out);
        if (*search)
            return cmd_search(opt, *search, out);
        if (*train)
            return cmd_train_best(opt, *train, out);
        if (*export_chain) {
            if (export_chain->get_option("--out")->count() == 0)
                opt.out = ".";
            return cmd_export_chain(opt, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace chainnas
