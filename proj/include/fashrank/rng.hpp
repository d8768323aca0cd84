#pragma once

#include <cstdint>
#include <random>

namespace fashrank {

using Rng = std::mt19937_64;

// Independent streams derived from one user-facing seed, so that e.g. the
// parameter initializer and the triple sampler never share state.
enum class Stream : std::uint64_t {
    Split = 1,
    Init = 2,
    Sampling = 3,
    Validation = 4,
    BoundaryProbe = 5,
    Baseline = 6,
    Affinity = 7,
    Synthetic = 8,
    Evaluation = 9,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform index in [0, n) without the modulo bias of `rng() % n`.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace fashrank
