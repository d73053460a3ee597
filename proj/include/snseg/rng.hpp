#pragma once

#include <cstdint>
#include <random>

namespace snseg {

// std::mt19937_64 raw stream; uniforms take the top 53 bits, normals use Box-Muller,
// integers use rejection sampling. Every step is spelled out so streams match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal();
  // Uniform integer on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
// Independent stream seed for replication `index` under `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace snseg
