#pragma once

// Random streams and the seed-derivation scheme used for reproducible
// parallel Monte Carlo.
//
// Every stream is a std::mt19937_64 seeded with a 64-bit key. Keys are
// derived by folding each coordinate into a SplitMix64 state:
//
//   key = master
//   for c in (coordinates...): key = splitmix64(key ^ splitmix64(c))
//
// Simulation replicates use coordinates (hr_exp index, hr_rwd index,
// replicate index, stream tag). Uniforms take the top 53 bits of a draw;
// exponentials and normals use explicit transforms so that a replay in
// another language only needs mt19937_64 and SplitMix64.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hybridsim {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t key = master;
  for (std::uint64_t c : coords) key = splitmix64(key ^ splitmix64(c));
  return key;
}

// Stream tags, one per consumer of randomness inside a replicate.
enum class StreamTag : std::uint64_t {
  DataGeneration = 1,
  PowerPrior = 2,
  Commensurate = 3,
  TrialOnlyBayes = 4,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential(double rate);

  // Standard normal by Box-Muller; the second variate is cached.
  double normal();

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace hybridsim
