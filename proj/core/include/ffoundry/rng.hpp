#pragma once

#include <cstdint>
#include <string>

namespace ffoundry {

// SplitMix64. Pinned algorithm so seeded results are identical across
// platforms and standard libraries (std distributions are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Rejection sampling, unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (one draw per call, spare discarded).
  double next_gaussian();

 private:
  std::uint64_t state_;
};

// Stable 64-bit seed derived from a root seed and a label, for giving each
// consumer (bootstrap iteration, sampler, k-means) its own stream.
std::uint64_t derive_seed(std::uint64_t root, const std::string& label);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter);

}  // namespace ffoundry
