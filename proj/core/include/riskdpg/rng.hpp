#pragma once

#include <cstdint>
#include <string_view>

namespace riskdpg {

/// Counter-based random stream.
///
/// Every draw is a pure function of (key, counter): the i-th 64-bit word of a
/// stream is splitmix64(key + (i + 1) * golden_gamma), so a stream can be
/// reproduced in any language from its key alone. Named substreams derive
/// their key from a master seed and an FNV-1a hash of the name, which keeps
/// e.g. exploration noise independent of replay sampling.
///
/// Gaussian variates use the Box-Muller transform on two consecutive
/// uniforms (u1, u2) and return only the cosine branch:
///   z = sqrt(-2 ln u1) * cos(2 pi u2)
/// Each normal() therefore consumes exactly two counter values.
class Rng {
 public:
  explicit Rng(std::uint64_t key = 0) noexcept : key_(key) {}

  /// Stream keyed by (master_seed, name).
  static Rng substream(std::uint64_t master_seed, std::string_view name) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;

  double normal() noexcept;

  /// Derive an independent child stream; consumes one draw from this stream.
  Rng split() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

}  // namespace riskdpg
