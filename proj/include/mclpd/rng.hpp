#pragma once
// Deterministic RNG streams. Every stochastic component takes an explicit
// stream derived from (seed, purpose, indices) so reruns and parallel
// schedules reproduce bit-identical results.

#include <cstdint>
#include <random>

namespace mclpd {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche for combining stream coordinates.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_id(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                               std::uint64_t c = 0) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(stream_id(seed, a, b, c));
}

// Stream tags keep purpose-separated RNGs from colliding.
namespace stream {
constexpr std::uint64_t kAugParams = 0x41;
constexpr std::uint64_t kAugNoise = 0x42;
constexpr std::uint64_t kSampler = 0x43;
constexpr std::uint64_t kInit = 0x44;
constexpr std::uint64_t kShuffle = 0x45;
constexpr std::uint64_t kSplit = 0x46;
constexpr std::uint64_t kSynth = 0x47;
constexpr std::uint64_t kVal = 0x48;
}  // namespace stream

}  // namespace mclpd
