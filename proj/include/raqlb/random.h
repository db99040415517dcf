#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

namespace raqlb {

// Seeded generator. Distributions are implemented here instead of using the
// <random> distribution classes, whose output is not specified bit-for-bit
// and differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  // Standard normal deviate (Box-Muller, spare value cached).
  double normal();

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      auto j = static_cast<decltype(i)>(below(static_cast<std::uint64_t>(i) + 1));
      using std::swap;
      swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Child seed for a named subsystem; lets one master seed drive independent
// streams so that changing one subsystem leaves the others untouched.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

}  // namespace raqlb
