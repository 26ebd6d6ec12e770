#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "attndiff/types.hpp"

namespace attndiff {

// One splitmix64 step. Used both as a seed scrambler and for deriving
// per-component seeds from a single root seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from (root, tag, counter). All
// randomness in the project flows from one root seed through this function,
// so adding a new consumer cannot reshuffle existing streams.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t counter = 0);

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// all distributions below are hand-rolled on top of it because the standard
// library distribution objects are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Unbiased integer in [0, bound) via rejection.
    std::uint64_t bounded(std::uint64_t bound);

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (pairs cached).
    double normal();

    // k distinct values from [0, population), sorted ascending.
    std::vector<Index> sample_without_replacement(Index population, Index k);

    // Fisher-Yates permutation of [0, count).
    std::vector<Index> permutation(Index count);

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace attndiff
