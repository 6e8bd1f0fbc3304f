#pragma once

#include <cstdint>
#include <random>

namespace grl {

/// splitmix64 finalizer. Good avalanche, cheap, and stable across platforms.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed from a tuple of identifiers (master seed,
/// generation, agent id, purpose...). Every random decision in a run draws
/// from a stream seeded this way, so results never depend on scheduling.
inline std::uint64_t seed_stream(std::uint64_t first) { return mix64(first); }

template <typename... Rest>
std::uint64_t seed_stream(std::uint64_t first, Rest... rest) {
  return mix64(first ^ seed_stream(static_cast<std::uint64_t>(rest)...));
}

/// Stream purposes. Keeping them distinct guarantees that e.g. the terrain
/// draw for agent k never overlaps its policy-sampling stream.
namespace stream {
inline constexpr std::uint64_t kGenomeInit = 0x01;
inline constexpr std::uint64_t kTraining = 0x02;
inline constexpr std::uint64_t kHeightfield = 0x03;
inline constexpr std::uint64_t kTaskAssign = 0x04;
inline constexpr std::uint64_t kInheritance = 0x05;
inline constexpr std::uint64_t kTournament = 0x06;
inline constexpr std::uint64_t kEvolution = 0x07;
inline constexpr std::uint64_t kOracle = 0x08;
}  // namespace stream

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace grl
