#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace daps {

/// SplitMix64 finalizer. Used to derive decorrelated stream seeds from a
/// master seed plus stream identifiers (setting index, chunk index, ...).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seeding: every (seed, a, b, c) tuple names one independent
/// stream, so parallel work units reproduce regardless of scheduling.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

/// xoshiro256++ with self-contained transforms. <random> distributions are
/// implementation-defined; everything here is bit-reproducible across
/// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s = splitmix64(s);
      word = s;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (cached pair).
  double normal();

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Walker/Vose alias table for O(1) draws from a finite distribution.
class AliasTable {
 public:
  /// Weights must be nonnegative with a positive sum; they are normalized.
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const { return prob_.size(); }

  std::size_t sample(Rng& rng) const {
    const std::uint64_t r = rng.next_u64();
    const std::size_t cell = static_cast<std::size_t>(
        (static_cast<unsigned __int128>(r) * prob_.size()) >> 64);
    const double u = rng.uniform();
    return u < prob_[cell] ? cell : alias_[cell];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace daps
