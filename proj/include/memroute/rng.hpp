#pragma once

#include <cmath>
#include <cstdint>

namespace memroute {

// Deterministic splitmix64 stream. Substreams are derived with fork(), which
// hashes (state, tag) so that streams for different tags never overlap in
// practice. All stochastic code in the library takes an explicit Rng.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1), 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1); never returns 0, safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two draws per call (no caching, keeps the stream
    // position a pure function of call count).
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform_open();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586477 * u2);
    }

    // Standard Gumbel(0,1) via inverse CDF: -log(-log(u)).
    double gumbel() { return -std::log(-std::log(uniform_open())); }

    std::uint64_t randint(std::uint64_t n) { return next_u64() % n; }

    // Derived substream; does not advance this stream.
    Rng fork(std::uint64_t tag) const {
        Rng child(state_ ^ (0x632be59bd9b4e019ull * (tag + 1)));
        child.next_u64();
        return child;
    }

private:
    std::uint64_t state_;
};

}  // namespace memroute
