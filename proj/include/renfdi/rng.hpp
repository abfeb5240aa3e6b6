#pragma once

#include <cstdint>
#include <string_view>

namespace renfdi {

/// Counter-based SplitMix64 generator.
///
/// Output k of a stream is `mix(seed + (k + 1) * 0x9E3779B97F4A7C15)`, so the
/// sequence depends only on the seed and is identical on every platform.
/// Floating-point draws use the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi], both ends inclusive.
  long uniform_int(long lo, long hi);
  /// Standard normal via Box-Muller (no cached second value).
  double normal();

 private:
  std::uint64_t state_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Child seed for stream `tag` at position `index` under `parent`:
/// `mix64(mix64(parent ^ fnv1a64(tag)) + index)`. Children of one parent never
/// depend on how many siblings exist, so growing a set leaves earlier members
/// untouched.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index = 0);

}  // namespace renfdi
