#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "chainnas/arch.hpp"
#include "chainnas/random.hpp"

namespace chainnas {

/// Exact transition probability count/total, kept in lowest terms.
struct Probability {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;

    static Probability ratio(std::uint64_t count, std::uint64_t total);
    double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
    bool operator==(const Probability&) const = default;
};

struct Transition {
    OpType next;
    std::uint64_t count = 0;
};

struct ComponentEntry {
    Components components;
    std::uint64_t count = 0;
};

/// One vertex of a transition chain: outgoing edge counts plus the emission
/// distribution over complete component tuples.
struct ChainState {
    std::vector<Transition> transitions;  // sorted by next
    std::uint64_t departures = 0;
    std::vector<ComponentEntry> components;  // sorted by tuple
    std::uint64_t observations = 0;
};

enum class ChainErrorKind { UnknownState, NoOutgoingTransitions, EmptyComponentDistribution };

class ChainError : public std::runtime_error {
public:
    ChainError(ChainErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ChainErrorKind kind() const { return kind_; }

private:
    ChainErrorKind kind_;
};

/// First-order chain over the layer-type sequence START, op_1, ..., op_n,
/// OUTPUT of one architecture. Immutable once built.
class TransitionChain {
public:
    static TransitionChain build(const Architecture& arch);

    const std::map<OpType, ChainState>& states() const { return states_; }
    const ChainState* find(const OpType& state) const;
    bool can_leave(const OpType& state) const;

    Probability probability(const OpType& from, const OpType& to) const;

    OpType sample_transition(const OpType& state, Rng& rng) const;
    const Components& sample_components(const OpType& state, Rng& rng) const;

private:
    std::map<OpType, ChainState> states_;
};

inline TransitionChain build_chain(const Architecture& arch) { return TransitionChain::build(arch); }

inline OpType sample_transition(const TransitionChain& chain, const OpType& state, Rng& rng)
{
    return chain.sample_transition(state, rng);
}

inline Components sample_components(const TransitionChain& chain, const OpType& state, Rng& rng)
{
    return chain.sample_components(state, rng);
}

/// Graphviz text: one node per state, one edge per transition labelled with
/// its probability to three decimals, everything in lexicographic order.
std::string export_dot(const TransitionChain& chain, const std::string& graph_name = "chain");

}  // namespace chainnas
