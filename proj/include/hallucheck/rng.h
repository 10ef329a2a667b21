#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace hallucheck {

// SplitMix64 (Steele, Lea & Flood 2014). Samples must reproduce bit-for-bit
// in other implementations of the same published constants.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n) by rejecting draws below 2^64 mod n. n must be > 0.
  std::uint64_t bounded(std::uint64_t n);

 private:
  std::uint64_t state_;
};

// Partial Fisher-Yates: moves a uniform k-subset (in draw order) to the
// front of `items` and truncates to it.
template <typename T>
void sample_prefix(std::vector<T>& items, std::size_t k, SplitMix64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::size_t>(rng.bounded(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
}

// Fisher-Yates from the back.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace hallucheck
