// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace fairdiv {

/// Philox4x32-10 counter-based generator.
///
/// The key is the 64-bit seed; the upper half of the 128-bit counter is the
/// substream id, so every (seed, stream) pair yields an independent sequence
/// that does not depend on how many other streams exist.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  using result_type = std::uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0);

  /// Ten-round bijection of one counter block.
  static Block encrypt(Block counter, Key key);

  result_type operator()();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on {0, ..., n - 1}; n must be positive.
  std::size_t below(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  unsigned used_ = 4;
};

}  // namespace fairdiv
