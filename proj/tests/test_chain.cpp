#include <cmath>
#include <map>
#include <set>

#include "chainnas/chain.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace chainnas;
using namespace testutil;

namespace {

Architecture by_ops(const std::vector<std::string>& ops)
{
    Architecture a;
    for (const auto& op : ops) {
        if (op == "CONV2D")
            a.layers.push_back(conv(8, 8));
        else if (op == "LINEAR")
            a.layers.push_back(linear(8, 10));
        else
            a.layers.push_back({OpType(op), {}, false});
    }
    return a;
}

// Adjacent-pair counts over START, ops..., OUTPUT.
std::map<std::string, std::map<std::string, int>> pair_counts(const Architecture& a)
{
    std::map<std::string, std::map<std::string, int>> counts;
    std::string prev = "START";
    for (const auto& l : a.layers) {
        counts[prev][l.op.name()] += 1;
        prev = l.op.name();
    }
    counts[prev]["OUTPUT"] += 1;
    return counts;
}

}  // namespace

TEST_CASE("exact frequencies of a five-layer net")
{
    const auto chain = build_chain(by_ops({"CONV2D", "RELU", "CONV2D", "RELU", "LINEAR"}));
    const OpType c("CONV2D"), r("RELU"), l("LINEAR");
    CHECK(chain.probability(c, r) == Probability{1, 1});
    CHECK(chain.probability(r, c) == Probability{1, 2});
    CHECK(chain.probability(r, l) == Probability{1, 2});
    CHECK(chain.probability(l, OpType::output()) == Probability{1, 1});
    CHECK(chain.probability(OpType::start(), c) == Probability{1, 1});
    CHECK(chain.probability(c, l) == Probability{0, 1});
    CHECK(chain.states().size() == 5);
}

TEST_CASE("single-layer net")
{
    const auto chain = build_chain(by_ops({"LINEAR"}));
    CHECK(chain.probability(OpType::start(), OpType("LINEAR")) == Probability{1, 1});
    CHECK(chain.probability(OpType("LINEAR"), OpType::output()) == Probability{1, 1});
    CHECK_FALSE(chain.can_leave(OpType::output()));
    CHECK(chain.can_leave(OpType::start()));
}

TEST_CASE("Probability is reduced")
{
    CHECK(Probability::ratio(6, 8) == Probability{3, 4});
    CHECK(Probability::ratio(0, 8) == Probability{0, 1});
    CHECK(Probability::ratio(5, 5) == Probability{1, 1});
}

TEST_CASE("VGG16 chain matches pair counting")
{
    const auto vgg = load_architecture(std::string(CHAINNAS_SEEDS_DIR) + "/vgg16.json");
    const auto chain = build_chain(vgg);
    const auto counts = pair_counts(vgg);

    std::set<std::string> states = {"START", "OUTPUT"};
    for (const auto& [from, row] : counts) {
        int total = 0;
        for (const auto& [to, n] : row)
            total += n;
        for (const auto& [to, n] : row) {
            states.insert(to);
            const auto p = chain.probability(OpType(from), OpType(to));
            CHECK(p.numerator * static_cast<std::uint64_t>(total) == p.denominator * static_cast<std::uint64_t>(n));
        }
        const auto* s = chain.find(OpType(from));
        REQUIRE(s != nullptr);
        CHECK(s->transitions.size() == row.size());
    }
    CHECK(chain.states().size() == states.size());

    const auto dot = export_dot(chain, "vgg16");
    std::size_t nodes = 0, edges = 0;
    std::size_t pos = 0;
    while ((pos = dot.find('\n', pos)) != std::string::npos) {
        ++pos;
        const auto end = dot.find('\n', pos);
        const auto line = dot.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        if (line.find("->") != std::string::npos)
            ++edges;
        else if (line.size() > 2 && line.back() == ';')
            ++nodes;
    }
    std::set<std::string> distinct;
    for (const auto& l : vgg.layers)
        distinct.insert(l.op.name());
    CHECK(nodes == distinct.size() + 2);
    std::size_t edge_count = 0;
    for (const auto& [from, row] : counts)
        edge_count += row.size();
    CHECK(edges == edge_count);
}

TEST_CASE("row stochasticity over every seed")
{
    for (const auto& f : seed_files()) {
        const auto chain = build_chain(load_architecture(f.string()));
        for (const auto& [op, state] : chain.states()) {
            if (state.transitions.empty()) {
                CHECK(op == OpType::output());
                continue;
            }
            double sum = 0.0;
            for (const auto& t : state.transitions) {
                const auto p = chain.probability(op, t.next);
                CHECK(p.value() > 0.0);
                CHECK(p.value() <= 1.0);
                sum += p.value();
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
        const auto* out = chain.find(OpType::output());
        REQUIRE(out != nullptr);
        CHECK(out->transitions.empty());
    }
}

TEST_CASE("sample_transition")
{
    SUBCASE("single edge")
    {
        const auto chain = build_chain(by_ops({"CONV2D", "RELU", "LINEAR"}));
        Rng rng(1);
        for (int i = 0; i < 100; ++i)
            CHECK(chain.sample_transition(OpType("CONV2D"), rng) == OpType("RELU"));
    }
    SUBCASE("even split within 0.02")
    {
        const auto chain = build_chain(by_ops({"CONV2D", "RELU", "CONV2D", "RELU", "LINEAR"}));
        Rng rng(42);
        int conv = 0, lin = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            const auto next = sample_transition(chain, OpType("RELU"), rng);
            conv += next == OpType("CONV2D");
            lin += next == OpType("LINEAR");
        }
        CHECK(conv + lin == n);
        CHECK(std::abs(conv / double(n) - 0.5) <= 0.02);
        CHECK(std::abs(lin / double(n) - 0.5) <= 0.02);
    }
    SUBCASE("errors")
    {
        const auto chain = build_chain(by_ops({"LINEAR"}));
        Rng rng(0);
        try {
            chain.sample_transition(OpType::output(), rng);
            FAIL("expected error");
        } catch (const ChainError& e) {
            CHECK(e.kind() == ChainErrorKind::NoOutgoingTransitions);
        }
        try {
            chain.sample_transition(OpType("RELU"), rng);
            FAIL("expected error");
        } catch (const ChainError& e) {
            CHECK(e.kind() == ChainErrorKind::UnknownState);
        }
    }
    SUBCASE("convergence within three sigma for every VGG16 state")
    {
        const auto chain = build_chain(load_architecture(std::string(CHAINNAS_SEEDS_DIR) + "/vgg16.json"));
        Rng rng(7);
        const int n = 20000;
        for (const auto& [op, state] : chain.states()) {
            if (state.transitions.empty())
                continue;
            std::map<OpType, int> hits;
            for (int i = 0; i < n; ++i)
                ++hits[chain.sample_transition(op, rng)];
            for (const auto& t : state.transitions) {
                const double p = chain.probability(op, t.next).value();
                const double tol = 3.0 * std::sqrt(p * (1.0 - p) / n);
                CHECK(std::abs(hits[t.next] / double(n) - p) <= tol + 1e-12);
            }
        }
    }
}

TEST_CASE("sample_components")
{
    SUBCASE("all kernels equal")
    {
        const auto chain = build_chain(make_arch({conv(3, 8), relu(), conv(8, 8), gap(), flatten(), linear(8, 10)}));
        Rng rng(3);
        for (int i = 0; i < 50; ++i)
            CHECK(chain.sample_components(OpType("CONV2D"), rng).at("kernel_size") == 3);
    }
    SUBCASE("whole tuples with empirical weights")
    {
        const auto t1 = conv(8, 8, 3, 1, 1);
        const auto t2 = conv(8, 8, 5, 1, 2);
        const auto chain = build_chain(make_arch({t1, t1, t1, t2}));
        Rng rng(11);
        const int n = 10000;
        int first = 0;
        for (int i = 0; i < n; ++i) {
            const auto c = sample_components(chain, OpType("CONV2D"), rng);
            CHECK((c == t1.components || c == t2.components));
            first += c == t1.components;
        }
        CHECK(std::abs(first / double(n) - 0.75) <= 0.02);
    }
    SUBCASE("virtual states have no emissions")
    {
        const auto chain = build_chain(by_ops({"LINEAR"}));
        Rng rng(0);
        try {
            chain.sample_components(OpType::start(), rng);
            FAIL("expected error");
        } catch (const ChainError& e) {
            CHECK(e.kind() == ChainErrorKind::EmptyComponentDistribution);
        }
        CHECK_THROWS_AS(chain.sample_components(OpType::output(), rng), ChainError);
    }
}

TEST_CASE("export_dot")
{
    const auto chain = build_chain(by_ops({"LINEAR"}));
    const auto dot = export_dot(chain);
    CHECK(dot.find("label=\"1.000\"") != std::string::npos);
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(export_dot(build_chain(by_ops({"LINEAR"}))) == dot);

    const auto five = export_dot(build_chain(by_ops({"CONV2D", "RELU", "CONV2D", "RELU", "LINEAR"})));
    CHECK(five.find("\"RELU\" -> \"CONV2D\" [label=\"0.500\"]") != std::string::npos);
    CHECK(five.find("\"CONV2D\" -> \"RELU\"") < five.find("\"RELU\" -> \"CONV2D\""));
}

TEST_CASE("deterministic path regenerates its source sequence")
{
    const std::vector<std::string> ops = {"CONV2D", "BATCHNORM2D", "RELU", "MAXPOOL2D", "FLATTEN", "LINEAR"};
    const auto chain = build_chain(by_ops(ops));
    Rng rng(5);
    std::vector<std::string> walk;
    OpType state = OpType::start();
    for (;;) {
        state = chain.sample_transition(state, rng);
        if (state == OpType::output())
            break;
        walk.push_back(state.name());
    }
    CHECK(walk == ops);
}
