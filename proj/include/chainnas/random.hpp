#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace chainnas {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Random stream with portable bounded draws; std distributions are avoided
/// so results do not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound)
    {
        const std::uint64_t limit = -bound % bound;  // 2^64 mod bound
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= limit)
                return r % bound;
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

enum class StreamPurpose : std::uint64_t {
    ParentSelection = 1,
    Transition = 2,
    Components = 3,
    Residual = 4,
};

/// Seed of the substream for one (generation, slot, purpose) triple.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t generation, std::uint64_t slot,
                                 StreamPurpose purpose)
{
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ generation);
    h = splitmix64(h ^ (slot * 0x100000001b3ULL));
    return splitmix64(h ^ static_cast<std::uint64_t>(purpose));
}

/// The four independent streams one architecture generation consumes.
struct SamplingStreams {
    Rng selection;
    Rng transition;
    Rng components;
    Rng residual;

    static SamplingStreams derive(std::uint64_t master, std::uint64_t generation, std::uint64_t slot)
    {
        return {Rng(derive_seed(master, generation, slot, StreamPurpose::ParentSelection)),
                Rng(derive_seed(master, generation, slot, StreamPurpose::Transition)),
                Rng(derive_seed(master, generation, slot, StreamPurpose::Components)),
                Rng(derive_seed(master, generation, slot, StreamPurpose::Residual))};
    }

    static SamplingStreams from_seed(std::uint64_t seed) { return derive(seed, 0, 0); }
};

}  // namespace chainnas
