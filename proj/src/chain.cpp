#include "chainnas/chain.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace chainnas {

Probability Probability::ratio(std::uint64_t count, std::uint64_t total)
{
    if (total == 0)
        return {0, 1};
    const std::uint64_t g = std::gcd(count, total);
    return {count / g, total / g};
}

TransitionChain TransitionChain::build(const Architecture& arch)
{
    std::map<OpType, std::map<OpType, std::uint64_t>> edges;
    std::map<OpType, std::map<Components, std::uint64_t>> emissions;

    OpType previous = OpType::start();
    for (const auto& layer : arch.layers) {
        ++edges[previous][layer.op];
        ++emissions[layer.op][layer.components];
        previous = layer.op;
    }
    ++edges[previous][OpType::output()];

    TransitionChain chain;
    chain.states_[OpType::start()];
    chain.states_[OpType::output()];
    for (auto& [from, row] : edges) {
        ChainState& state = chain.states_[from];
        for (auto& [to, count] : row) {
            state.transitions.push_back({to, count});
            state.departures += count;
            chain.states_[to];
        }
    }
    for (auto& [op, tuples] : emissions) {
        ChainState& state = chain.states_[op];
        for (auto& [tuple, count] : tuples) {
            state.components.push_back({tuple, count});
            state.observations += count;
        }
    }
    return chain;
}

const ChainState* TransitionChain::find(const OpType& state) const
{
    auto it = states_.find(state);
    return it == states_.end() ? nullptr : &it->second;
}

bool TransitionChain::can_leave(const OpType& state) const
{
    const ChainState* s = find(state);
    return s != nullptr && s->departures > 0;
}

Probability TransitionChain::probability(const OpType& from, const OpType& to) const
{
    const ChainState* s = find(from);
    if (s == nullptr)
        return {0, 1};
    for (const auto& t : s->transitions)
        if (t.next == to)
            return Probability::ratio(t.count, s->departures);
    return {0, 1};
}

OpType TransitionChain::sample_transition(const OpType& state, Rng& rng) const
{
    const ChainState* s = find(state);
    if (s == nullptr)
        throw ChainError(ChainErrorKind::UnknownState, "state " + state.name() + " is not in the chain");
    if (s->departures == 0)
        throw ChainError(ChainErrorKind::NoOutgoingTransitions,
                         "state " + state.name() + " has no outgoing transitions");
    std::uint64_t draw = rng.below(s->departures);
    for (const auto& t : s->transitions) {
        if (draw < t.count)
            return t.next;
        draw -= t.count;
    }
    return s->transitions.back().next;
}

const Components& TransitionChain::sample_components(const OpType& state, Rng& rng) const
{
    const ChainState* s = find(state);
    if (s == nullptr)
        throw ChainError(ChainErrorKind::UnknownState, "state " + state.name() + " is not in the chain");
    if (s->observations == 0)
        throw ChainError(ChainErrorKind::EmptyComponentDistribution,
                         "state " + state.name() + " has no component distribution");
    std::uint64_t draw = rng.below(s->observations);
    for (const auto& entry : s->components) {
        if (draw < entry.count)
            return entry.components;
        draw -= entry.count;
    }
    return s->components.back().components;
}

std::string export_dot(const TransitionChain& chain, const std::string& graph_name)
{
    std::string out = "digraph \"" + graph_name + "\" {\n";
    for (const auto& [op, state] : chain.states())
        out += "  \"" + op.name() + "\";\n";
    char label[32];
    for (const auto& [op, state] : chain.states()) {
        for (const auto& t : state.transitions) {
            std::snprintf(label, sizeof label, "%.3f",
                          Probability::ratio(t.count, state.departures).value());
            out += "  \"" + op.name() + "\" -> \"" + t.next.name() + "\" [label=\"" + label + "\"];\n";
        }
    }
    out += "}\n";
    return out;
}

}  // namespace chainnas
