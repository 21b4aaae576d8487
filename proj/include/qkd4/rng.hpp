#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace qkd4 {

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

/// Seed for a named child stream. Streams derived from the same master seed
/// with distinct tags are independent for simulation purposes; a party/module
/// never shares a stream, so consumption order in one stream cannot shift
/// another.
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view tag) {
  return splitmix64(master ^ splitmix64(fnv1a64(tag)));
}

/// mt19937_64 wrapped with fixed draw algorithms. The standard distributions
/// are implementation-defined, so every draw here is spelled out to keep
/// sequences reproducible for a given seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform double in [0, 1), 53 significant bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). Lemire's unbiased multiply-shift.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw std::domain_error("RngStream::index: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const __uint128_t m = static_cast<__uint128_t>(gen_()) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  /// Draw from a finite distribution given by weights (summing to ~1).
  /// Rounding slack lands on the last positive-weight cell.
  std::size_t categorical(std::span<const double> weights) {
    if (weights.empty()) throw std::domain_error("RngStream::categorical: empty weights");
    const double u = uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = i;
      acc += weights[i];
      if (u < acc) return i;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 gen_;
};

inline RngStream derive_stream(std::uint64_t master, std::string_view tag) {
  return RngStream(stream_seed(master, tag));
}

} // namespace qkd4
