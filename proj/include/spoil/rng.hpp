#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace spoil {

/// SplitMix64 finalizer. Used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of substream `stream` under parent seed `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Seeded 64-bit generator with portable variate transforms.
///
/// The engine is std::mt19937_64; every transform below is written out
/// explicitly so that draws do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Substream `stream` of `seed`; independent of every other stream index.
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive_seed(seed, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_left() { return 1.0 - uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Standard exponential.
  double exponential();

  /// Standard normal (Box-Muller, one value per call).
  double normal();

  /// Index drawn from an (unnormalised, non-negative) weight vector.
  std::size_t categorical(std::span<const double> weights);

  /// Number of failures before the first success of a Bernoulli(1 - q) trial,
  /// i.e. P[H = h] = (1 - q) q^h.
  std::uint64_t geometric(double q);

 private:
  std::mt19937_64 engine_;
};

}  // namespace spoil
