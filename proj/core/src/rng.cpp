#include "sosmp/rng.hpp"

#include "sosmp/special_functions.hpp"

namespace sosmp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {
std::uint64_t key_bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}
}  // namespace

double RngStream::u01(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  // 53 mantissa bits, offset by half an ulp so 0 and 1 are never produced.
  const std::uint64_t bits = key_bits(seed, stream, counter);
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return inv_norm_cdf(u01(seed, stream, counter));
}

std::uint64_t RngStream::next_uint(std::uint64_t bound) {
  // Bounded draw by rejection on the top bits; bias is negligible for the
  // bounds used here but rejection keeps it exact.
  const std::uint64_t limit = bound * ((~0ULL) / bound);
  for (;;) {
    const std::uint64_t bits = key_bits(seed_, stream_, counter_++);
    if (bits < limit) return bits % bound;
  }
}

}  // namespace sosmp
