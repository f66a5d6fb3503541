#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace prbcast {

/// One SplitMix64 step. Used to expand seeds and to derive per-model
/// seed streams; the algorithm is fixed so results reproduce everywhere.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256** 1.0 (Blackman/Vigna), seeded through SplitMix64.
///
/// All randomness in the engine flows through this generator: trace noise,
/// weight init, window shuffling, sample-path draws. Never std::mt19937 or
/// std::normal_distribution, whose streams differ between standard library
/// implementations.
class Xoshiro256StarStar {
 public:
  explicit Xoshiro256StarStar(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller. Consumes exactly two uniforms per call,
  /// which keeps the stream layout independent of caller history.
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Bounded draw in [0, n) via Lemire multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

/// FNV-1a 64-bit hash; stable across platforms, used for seed fan-out
/// (master seed + model name) and config fingerprints.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent seed for a named component from a master seed.
/// Adding or removing one component never perturbs the others' streams.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view name) {
  std::uint64_t s = master_seed ^ fnv1a64(name);
  return splitmix64_next(s);
}

}  // namespace prbcast
