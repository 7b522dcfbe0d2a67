#include "ffoundry/rng.hpp"

#include <cmath>

namespace ffoundry {

double Rng::next_gaussian() {
  double u1, u2;
  do {
    u1 = next_double();
  } while (u1 <= 0.0);
  u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t derive_seed(std::uint64_t root, const std::string& label) {
  // FNV-1a over the label, mixed with the root through SplitMix.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  Rng mix(root ^ h);
  return mix.next_u64();
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter) {
  Rng mix(root ^ (counter * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  return mix.next_u64();
}

}  // namespace ffoundry
