#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "lutcount/compressor.hpp"

namespace lutcount {

using BigCount = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

/// Fraction of all 2^block_width block inputs that a configuration counts exactly.
struct AccuracyReport {
  std::string config;
  std::size_t block_width = 0;
  BigCount total_inputs;
  BigCount correct_count;

  /// 100 * correct / total, exact.
  BigRational percent_exact() const { return BigRational(correct_count * 100, total_inputs); }
  /// Nearest double; zero when the value underflows.
  double percent_correct() const;
  /// Scientific notation with `significant` digits, correctly rounded from the exact value.
  std::string percent_string(int significant = 6) const;
};

inline constexpr std::size_t default_exhaustive_limit = 25;

/**
 * Scans every block input. Throws std::invalid_argument when the block is
 * wider than `width_limit` (or 63 bits); use the combinatorial oracle then.
 */
AccuracyReport enumerate_accuracy_exhaustive(const CompressorConfig& config,
                                             std::size_t width_limit = default_exhaustive_limit);

/**
 * Counts exact outputs without enumerating inputs.
 *
 * First-level LUTs are folded in one at a time, each contributing C(fan_in, w)
 * inputs of weight w. The state is (true weight - reported total, clipped
 * set-input counts of every LUT still waiting for producers); a LUT is
 * evaluated and dropped from the state as soon as its last producer is done.
 */
AccuracyReport enumerate_accuracy_combinatorial(const CompressorConfig& config);

/// (exact - approx) / exact. Throws std::domain_error when exact == 0.
double relative_error(std::uint64_t exact, std::uint64_t approx);

struct SweepRow {
  double density;
  std::size_t weight;
  double mean_err_pct;
  double std_err_pct;
};

struct SweepReport {
  std::string config;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;
};

/// Densities 1..10% in 1% steps, then 20..100% in 10% steps.
std::vector<double> default_densities();

/**
 * Mean and sample standard deviation of the relative error (percent) over
 * `trials` fixed-weight vectors per density, weight = round(d * n).
 *
 * Trial t at density index i draws from RngStream(seed, hash_combine(i, t)),
 * so the report does not depend on `workers`. Throws std::invalid_argument
 * for a density with weight outside [1, n], unsorted densities, or trials < 2.
 */
SweepReport density_sweep(const CompressorConfig& config, std::size_t n, const std::vector<double>& densities,
                          std::size_t trials, std::uint64_t seed, unsigned workers = 0);

/// Published correct-output percentages for the shallow presets A..L.
std::optional<double> reference_percent_correct(std::string_view label);

struct AuditRow {
  std::string config;
  AccuracyReport report;
  double reference_pct;
  double ratio;  ///< oracle / reference
  bool flagged;  ///< ratio outside [1/2, 2]
};

/// Oracle-vs-reference comparison for the given shallow presets.
std::vector<AuditRow> table_audit(const std::vector<std::string>& labels, double flag_factor = 2.0);

}  // namespace lutcount
