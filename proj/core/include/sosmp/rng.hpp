#pragma once

#include <cstdint>

namespace sosmp {

/// SplitMix64 mixing step.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based random stream: the value at (seed, stream, counter) is a pure
/// function of its key, so streams can be split per particle, per sample or per
/// parameter without shared state and are reproducible regardless of the order
/// in which values are drawn.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  /// Uniform in the open interval (0, 1).
  double next_u01() { return u01(seed_, stream_, counter_++); }

  /// Standard normal deviate.
  double next_normal() { return normal(seed_, stream_, counter_++); }

  /// Uniform integer in [0, bound).
  std::uint64_t next_uint(std::uint64_t bound);

  std::uint64_t counter() const { return counter_; }

  // Stateless accessors for regeneration checks.
  static double u01(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
  static double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace sosmp
