#pragma once

// Counter-based 64-bit generator keyed by (master seed, path index, stream).
// Every path owns its own key, so draws never depend on scheduling order.

#include <cmath>
#include <cstdint>
#include <limits>

namespace lcpkit {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  CounterRng(std::uint64_t master_seed, std::uint64_t path_index, std::uint64_t stream = 0)
      : key_(derive_key(master_seed, path_index, stream)) {}

  static constexpr std::uint64_t derive_key(std::uint64_t master_seed, std::uint64_t path_index,
                                            std::uint64_t stream) {
    const std::uint64_t s = mix64(master_seed + kGolden);
    const std::uint64_t p = mix64(path_index * kGolden + 0x632be59bd9b4e019ULL);
    return mix64(s ^ (p + mix64(stream + 0x3c6ef372fe94f82bULL)));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lcpkit
