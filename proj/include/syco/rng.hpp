#pragma once

#include <cstdint>
#include <cmath>

namespace syco {

// Counter-based generator: the k-th draw is a pure function of (seed, k),
// so sequences replay identically across runs and platforms and substreams
// can be forked without sharing mutable state.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  RngState() = default;
  explicit RngState(std::uint64_t s) : seed(s) {}

  static std::uint64_t mix(std::uint64_t s, std::uint64_t k) {
    std::uint64_t z = s + k * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(seed, ++counter); }

  // uniform in [0, 1)
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; consumes two draws, no cached spare
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586477 * u2);
  }

  // independent substream, e.g. one per task or per stream segment
  RngState fork(std::uint64_t stream_id) const {
    return RngState(mix(seed ^ 0xA5A5A5A5DEADBEEFull, stream_id + 1));
  }
};

}  // namespace syco
