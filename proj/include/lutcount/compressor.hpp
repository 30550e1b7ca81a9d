#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lutcount/bitvec.hpp"

namespace lutcount {

/// The three LUT primitives, modeled as saturating counters.
enum class LutKind : std::uint8_t {
  Or6,              ///< six inputs, one output bit: any input set
  Sat3Positional,   ///< five inputs, one 2-bit binary digit 0..3
  Sat2Thermometer,  ///< five inputs, two unary bits 0..2
};

constexpr unsigned fan_in(LutKind k) noexcept { return k == LutKind::Or6 ? 6U : 5U; }

constexpr unsigned cap(LutKind k) noexcept {
  switch (k) {
    case LutKind::Or6: return 1;
    case LutKind::Sat3Positional: return 3;
    case LutKind::Sat2Thermometer: return 2;
  }
  return 0;
}

constexpr unsigned output_bits(LutKind k) noexcept { return k == LutKind::Or6 ? 1U : 2U; }

constexpr unsigned saturate(LutKind k, unsigned weight) noexcept { return weight < cap(k) ? weight : cap(k); }

/**
 * Value of output bit `bit` of a LUT of kind `k` holding digit `value`.
 *
 * Thermometer: bit 0 = value >= 1, bit 1 = value >= 2.
 * Positional: bit 0 is the high (x2) bit, bit 1 the low bit.
 */
constexpr unsigned output_bit(LutKind k, unsigned value, unsigned bit) noexcept {
  switch (k) {
    case LutKind::Or6: return value;
    case LutKind::Sat2Thermometer: return value > bit ? 1U : 0U;
    case LutKind::Sat3Positional: return bit == 0 ? (value >> 1) & 1U : value & 1U;
  }
  return 0;
}

/// Significance multiplier of output bit `bit` relative to the LUT's digit significance.
constexpr unsigned output_bit_scale(LutKind k, unsigned bit) noexcept {
  return (k == LutKind::Sat3Positional && bit == 0) ? 2U : 1U;
}

std::string_view to_string(LutKind k) noexcept;
/// Bracket notation, e.g. "[6:1)", "[5:2)", "[5:2<>)".
std::string_view notation(LutKind k) noexcept;

/// min(weight(bits), cap(kind)). Throws std::invalid_argument on a width other than fan_in(kind).
unsigned lut_apply(LutKind kind, const BitVector& bits);

/// Reference to output bit `bit` of LUT `lut` on the previous level.
struct WireRef {
  std::uint32_t lut;
  std::uint8_t bit;
};

/// One LUT instance inside a compressor tree.
struct LutNode {
  LutKind kind;
  /// Weight of one unit of this LUT's digit.
  std::uint64_t significance = 1;
  /// First level only: inputs are block bits [first_bit, first_bit + fan_in).
  std::uint32_t first_bit = 0;
  /// Upper levels: producer outputs; fewer than fan_in means zero padding.
  std::vector<WireRef> inputs;
};

struct DigitSpec {
  /// Largest value the digit can reach (may be below the LUT cap when inputs are padded).
  unsigned cap;
  std::uint64_t significance;
};

struct Digit {
  unsigned value;
  std::uint64_t significance;
};

/// Weighted digits of one compressed block; fed to the exact final adder.
struct CompressedVector {
  std::vector<Digit> digits;

  std::uint64_t total() const noexcept {
    std::uint64_t sum = 0;
    for (const auto& d : digits) sum += d.value * d.significance;
    return sum;
  }
};

/**
 * A leveled LUT tree applied independently to every block of the input.
 *
 * Wiring between levels: previous-level output bits are listed in producer
 * order. Or6 levels pack that list left to right six at a time and take the
 * smallest input significance. Five-input levels first split the list into
 * significance classes (largest first) and pack each class separately, so a
 * saturating count never mixes weights. An empty level list is the identity
 * (exact) configuration with block width 1.
 */
class CompressorConfig {
 public:
  CompressorConfig() = default;

  std::span<const LutKind> levels() const noexcept { return levels_; }
  std::size_t depth() const noexcept { return levels_.size(); }
  bool is_identity() const noexcept { return levels_.empty(); }
  std::size_t block_width() const noexcept { return block_width_; }
  std::span<const DigitSpec> output_spec() const noexcept { return output_spec_; }
  const std::vector<std::vector<LutNode>>& netlist() const noexcept { return netlist_; }
  const std::string& name() const noexcept { return name_; }

  /// Largest total a block can report; equals the all-ones block's total.
  std::uint64_t saturation_ceiling() const noexcept;
  /// "[36:1)"-style summary of the whole tree.
  std::string notation() const;

  CompressorConfig&& named(std::string name) && {
    name_ = std::move(name);
    return std::move(*this);
  }

 private:
  friend CompressorConfig build(std::vector<LutKind> levels, std::size_t first_level_luts);

  std::vector<LutKind> levels_;
  std::size_t block_width_ = 1;
  std::vector<DigitSpec> output_spec_{{1, 1}};
  std::vector<std::vector<LutNode>> netlist_;
  std::string name_ = "EXACT";
};

/// Upper bound on block width accepted by build().
inline constexpr std::size_t max_block_width = std::size_t{1} << 20;

/**
 * Smallest tree in which every LUT past the first level is fully used.
 * Empty `levels` yields the identity configuration.
 */
CompressorConfig build(std::vector<LutKind> levels);

/**
 * Tree with an explicit first-level LUT count; upper levels take as many
 * LUTs as their inputs need and pad the last one of each group with zeros.
 * Throws std::invalid_argument naming the level when the count is zero or
 * the block would exceed max_block_width.
 */
CompressorConfig build(std::vector<LutKind> levels, std::size_t first_level_luts);

/// Labels A..L, D216 (or 216), D540 (540), D1024 (1024), EXACT (exact).
CompressorConfig preset(std::string_view label);

/// The twelve one- and two-level presets A..L.
std::vector<std::string> shallow_preset_labels();
/// Every preset label in canonical spelling.
std::vector<std::string> all_preset_labels();

/// Evaluates one block. Throws std::invalid_argument on a width mismatch.
CompressedVector compress_block(const CompressorConfig& config, const BitVector& block);

/// Sum of compressed digits over all zero-padded blocks of v.
std::uint64_t approx_weight(const CompressorConfig& config, const BitVector& v);

/// Same as approx_weight for a vector given by its sorted set positions.
std::uint64_t approx_weight_sparse(const CompressorConfig& config, std::span<const std::uint32_t> sorted_indices);

/// LUT instances per kind across ceil(n / block_width) trees.
std::map<LutKind, std::uint64_t> resource_estimate(const CompressorConfig& config, std::size_t n);

/**
 * Reusable evaluator with scratch buffers, for hot loops.
 *
 * total() takes the set-bit count of each first-level LUT.
 */
class TreeEvaluator {
 public:
  explicit TreeEvaluator(const CompressorConfig& config);

  std::uint64_t total(std::span<const std::uint8_t> first_level_counts);
  /// Block of at most 64 bits given as a word (bit i of the block = bit i of the word).
  std::uint64_t total_word(std::uint64_t block);
  CompressedVector digits(std::span<const std::uint8_t> first_level_counts);

 private:
  void run(std::span<const std::uint8_t> first_level_counts);

  const CompressorConfig* config_;
  std::vector<std::vector<std::uint8_t>> values_;
  std::vector<std::uint8_t> counts_;
};

}  // namespace lutcount
