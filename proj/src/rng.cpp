#include "attndiff/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace attndiff {

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t counter) {
    // FNV-1a over the tag bytes, then two scrambling rounds.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(root ^ h) ^ counter);
}

std::uint64_t Rng::bounded(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::bounded: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % bound;
    }
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<Index> Rng::sample_without_replacement(Index population, Index k) {
    if (k < 0 || k > population)
        throw std::invalid_argument("sample_without_replacement: k out of range");
    // Floyd's algorithm: O(k) draws regardless of population size.
    std::unordered_set<Index> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    for (Index j = population - k; j < population; ++j) {
        const Index t = static_cast<Index>(bounded(static_cast<std::uint64_t>(j) + 1));
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<Index> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Index> Rng::permutation(Index count) {
    std::vector<Index> p(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) p[static_cast<std::size_t>(i)] = i;
    for (Index i = count - 1; i > 0; --i) {
        const Index j = static_cast<Index>(bounded(static_cast<std::uint64_t>(i) + 1));
        std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    return p;
}

} // namespace attndiff
