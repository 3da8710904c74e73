#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ogcp {

using Rng = std::mt19937_64;

/// Phases of the streaming algorithm that own independent random streams.
enum class RngPhase : std::uint64_t {
  WeightsObjective = 1,
  WeightsGradient = 2,
  FactorsObjective = 3,
  FactorsGradient = 4,
  Reservoir = 5,
  Metrics = 6,
  StaticInit = 7,
  StaticObjective = 8,
  StaticGradient = 9,
  Generator = 10,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent generator from a base seed and a key tuple such as
/// (slice, phase, epoch, iteration). Draw order inside one keyed stream is the
/// only thing that affects its output, so reordering work across keys never
/// perturbs results.
inline Rng keyed_rng(std::uint64_t seed,
                     std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t k : key) h = splitmix64(h ^ splitmix64(k));
  return Rng(h);
}

inline Rng keyed_rng(std::uint64_t seed, std::uint64_t t, RngPhase phase,
                     std::uint64_t epoch = 0, std::uint64_t iter = 0) {
  return keyed_rng(seed, {t, static_cast<std::uint64_t>(phase), epoch, iter});
}

}  // namespace ogcp
