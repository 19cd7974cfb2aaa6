// Deterministic random source with named sub-streams.
//
// Every random draw in the library flows from one master seed through a
// named stream ("init", "growth", "dropout", "data:task0", ...), so adding
// a consumer to one stream never perturbs the draws of another. Variates
// are generated from raw mt19937_64 words rather than std distributions,
// which keeps the byte-level output independent of the standard library
// implementation.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace plasticnn {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : gen_(detail::splitmix64(seed)) {}

  /// Independent stream derived from (master seed, stream name).
  static SplitRng substream(std::uint64_t master, std::string_view name) {
    return SplitRng(detail::splitmix64(master ^ detail::fnv1a64(name)));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // Guard log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  /// True with probability keep_prob.
  bool bernoulli(double keep_prob) { return uniform() < keep_prob; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace plasticnn
