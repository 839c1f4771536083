#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

namespace mcvae {

/// Counter-based generator: every draw is a pure function of (key, counter),
/// so a stream can be saved as two integers and replayed on any platform.
class CounterRng {
public:
    struct State {
        std::uint64_t key = 0;
        std::uint64_t counter = 0;
        bool operator==(const State &) const = default;
    };

    CounterRng() = default;
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_{mix(mix(seed) ^ (stream + 0x632be59bd9b4e019ULL)), 0}
    {
    }
    explicit CounterRng(State s) : state_(s) {}

    static std::uint64_t mix(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t next_u64()
    {
        return mix(state_.key ^ mix(state_.counter++));
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; always consumes exactly two draws.
    double normal()
    {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::size_t below(std::size_t n) { return n == 0 ? 0 : std::size_t(next_u64() % n); }

    /// Independent child stream; does not advance this generator.
    CounterRng derive(std::uint64_t stream) const
    {
        return CounterRng(State{mix(state_.key ^ mix(stream ^ 0xd1b54a32d192ed03ULL)), 0});
    }

    State state() const { return state_; }

private:
    State state_{};
};

} // namespace mcvae
