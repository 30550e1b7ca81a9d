#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lutcount/rng.hpp"

namespace lutcount {

/**
 * Fixed-length packed binary vector.
 *
 * Bit i lives in word i / 64 at position i % 64 (bit 0 is the least
 * significant bit of the first word). Bits past length() are kept zero.
 * Text form lists bit 0 first, so "110100" has bits 0, 1 and 3 set.
 */
class BitVector {
 public:
  using word_type = std::uint64_t;
  static constexpr std::size_t word_bits = 64;

  /// Throws std::invalid_argument when n == 0.
  explicit BitVector(std::size_t n);

  std::size_t length() const noexcept { return length_; }
  std::span<const word_type> words() const noexcept { return words_; }

  bool test(std::size_t i) const;
  void set(std::size_t i, bool value = true);

  /// Number of set bits.
  std::size_t weight() const noexcept;
  /// Number of set bits in [first, first + count), clipped at length().
  std::size_t weight_range(std::size_t first, std::size_t count) const noexcept;

  /// Positions of set bits in increasing order.
  std::vector<std::uint32_t> indices() const;

  std::string to_string() const;

  friend bool operator==(const BitVector&, const BitVector&) = default;
  friend BitVector bitwise_and(const BitVector& a, const BitVector& b);

 private:
  std::size_t length_;
  std::vector<word_type> words_;
};

BitVector make_zero(std::size_t n);
BitVector make_ones(std::size_t n);

/// Bits set at every listed position; duplicates are harmless.
BitVector from_indices(std::size_t n, std::span<const std::uint32_t> indices);
BitVector from_indices(std::size_t n, std::initializer_list<std::uint32_t> indices);

/// Parses '0'/'1' text with bit 0 first.
BitVector from_string(std::string_view bits);

/// Exactly w set bits, uniform over all C(n, w) position sets (Floyd's sampler).
BitVector random_fixed_weight(std::size_t n, std::size_t w, RngStream& rng);

/// Population count via hardware popcount on packed words.
std::size_t exact_weight(const BitVector& v) noexcept;

BitVector bitwise_and(const BitVector& a, const BitVector& b);

/// Weight of a AND b without materializing the result.
std::size_t and_weight(const BitVector& a, const BitVector& b);

}  // namespace lutcount
