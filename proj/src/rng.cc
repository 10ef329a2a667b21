#include "hallucheck/rng.h"

#include <stdexcept>

namespace hallucheck {

std::uint64_t SplitMix64::bounded(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("bounded(0)");
  const std::uint64_t reject_below = (0 - n) % n;
  std::uint64_t x = next();
  while (x < reject_below) x = next();
  return x % n;
}

}  // namespace hallucheck
