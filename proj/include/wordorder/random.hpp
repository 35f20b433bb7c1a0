#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace wordorder {

// Seedable generator with a fully specified output stream, so that shuffles
// and samples are reproducible across platforms and implementations:
//
//   * raw stream: std::mt19937_64 seeded with the 64-bit seed (the standard
//     pins its output sequence);
//   * below(n): rejection sampling, drawing x until x >= (2^64 - n) mod n,
//     then returning x mod n;
//   * uniform(): (x >> 11) * 2^-53, a double in [0, 1);
//   * shuffle(): Fisher-Yates from the back, swapping i with below(i + 1)
//     for i = n-1 .. 1.
//
// std::uniform_int_distribution and std::shuffle are avoided because their
// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  std::uint64_t below(std::uint64_t n);
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer over (seed, stream); used to give each sentence or
// grid cell its own independent sub-seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace wordorder
