#include "lutcount/compressor.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>

namespace lutcount {

std::string_view to_string(LutKind k) noexcept {
  switch (k) {
    case LutKind::Or6: return "Or6";
    case LutKind::Sat3Positional: return "Sat3Positional";
    case LutKind::Sat2Thermometer: return "Sat2Thermometer";
  }
  return "?";
}

std::string_view notation(LutKind k) noexcept {
  switch (k) {
    case LutKind::Or6: return "[6:1)";
    case LutKind::Sat3Positional: return "[5:2)";
    case LutKind::Sat2Thermometer: return "[5:2<>)";
  }
  return "?";
}

unsigned lut_apply(LutKind kind, const BitVector& bits) {
  if (bits.length() != fan_in(kind)) {
    throw std::invalid_argument(std::string(to_string(kind)) + " expects " + std::to_string(fan_in(kind)) +
                                " input bits, got " + std::to_string(bits.length()));
  }
  return saturate(kind, static_cast<unsigned>(exact_weight(bits)));
}

std::uint64_t CompressorConfig::saturation_ceiling() const noexcept {
  std::uint64_t sum = 0;
  for (const auto& d : output_spec_) sum += d.cap * d.significance;
  return sum;
}

std::string CompressorConfig::notation() const {
  if (is_identity()) return "exact";
  std::size_t bits = 0;
  for (const auto& node : netlist_.back()) bits += output_bits(node.kind);
  std::string s = "[" + std::to_string(block_width_) + ":" + std::to_string(bits);
  if (levels_.back() == LutKind::Sat2Thermometer) s += "<>";
  return s + ")";
}

namespace {

struct PendingBit {
  WireRef ref;
  std::uint64_t significance;
};

// Wires `inputs` into LUTs of `kind`. Returns the index of the first group
// that is not completely filled, or -1 when every LUT is full.
long wire_level(LutKind kind, const std::vector<PendingBit>& inputs, std::vector<LutNode>& out,
                std::size_t& short_group_size) {
  long first_short = -1;
  const unsigned f = fan_in(kind);
  auto pack = [&](const std::vector<const PendingBit*>& group) {
    for (std::size_t start = 0; start < group.size(); start += f) {
      LutNode node{kind, 0, 0, {}};
      std::uint64_t sig = 0;
      const std::size_t stop = std::min(group.size(), start + f);
      for (std::size_t i = start; i < stop; ++i) {
        node.inputs.push_back(group[i]->ref);
        sig = (sig == 0) ? group[i]->significance : std::min(sig, group[i]->significance);
      }
      node.significance = sig;
      if (node.inputs.size() < f && first_short < 0) {
        first_short = static_cast<long>(out.size());
        short_group_size = group.size();
      }
      out.push_back(std::move(node));
    }
  };

  if (kind == LutKind::Or6) {
    std::vector<const PendingBit*> all;
    for (const auto& b : inputs) all.push_back(&b);
    pack(all);
    return first_short;
  }

  std::vector<std::uint64_t> classes;
  for (const auto& b : inputs) classes.push_back(b.significance);
  std::sort(classes.begin(), classes.end(), std::greater<>());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  for (std::uint64_t sig : classes) {
    std::vector<const PendingBit*> group;
    for (const auto& b : inputs) {
      if (b.significance == sig) group.push_back(&b);
    }
    pack(group);
  }
  return first_short;
}

struct WiringResult {
  std::vector<std::vector<LutNode>> netlist;
  // Level and group size of the first underfull LUT, if any.
  long short_level = -1;
  std::size_t short_group_size = 0;
};

WiringResult wire(const std::vector<LutKind>& levels, std::size_t first_level_luts) {
  WiringResult result;
  const unsigned f0 = fan_in(levels.front());
  std::vector<LutNode> first;
  first.reserve(first_level_luts);
  for (std::size_t j = 0; j < first_level_luts; ++j) {
    first.push_back(LutNode{levels.front(), 1, static_cast<std::uint32_t>(j * f0), {}});
  }
  result.netlist.push_back(std::move(first));

  for (std::size_t k = 1; k < levels.size(); ++k) {
    std::vector<PendingBit> bits;
    const auto& prev = result.netlist.back();
    for (std::size_t p = 0; p < prev.size(); ++p) {
      for (unsigned b = 0; b < output_bits(prev[p].kind); ++b) {
        bits.push_back({WireRef{static_cast<std::uint32_t>(p), static_cast<std::uint8_t>(b)},
                        prev[p].significance * output_bit_scale(prev[p].kind, b)});
      }
    }
    std::vector<LutNode> level;
    std::size_t group_size = 0;
    const long short_at = wire_level(levels[k], bits, level, group_size);
    if (short_at >= 0 && result.short_level < 0) {
      result.short_level = static_cast<long>(k);
      result.short_group_size = group_size;
    }
    result.netlist.push_back(std::move(level));
  }
  return result;
}

}  // namespace

CompressorConfig build(std::vector<LutKind> levels, std::size_t first_level_luts) {
  if (levels.empty()) return CompressorConfig{};
  if (first_level_luts == 0) {
    throw std::invalid_argument("inconsistent wiring at level 0: a tree needs at least one first-level LUT");
  }
  if (first_level_luts * fan_in(levels.front()) > max_block_width) {
    throw std::invalid_argument("inconsistent wiring at level 0: block width exceeds " +
                                std::to_string(max_block_width) + " bits");
  }
  auto wiring = wire(levels, first_level_luts);
  CompressorConfig config;
  config.levels_ = std::move(levels);
  config.block_width_ = first_level_luts * fan_in(config.levels_.front());
  config.netlist_ = std::move(wiring.netlist);
  config.name_.clear();
  // All-ones input drives every LUT to its reachable maximum at once.
  TreeEvaluator eval(config);
  const std::vector<std::uint8_t> full(config.netlist_.front().size(), static_cast<std::uint8_t>(fan_in(config.levels_.front())));
  const CompressedVector top = eval.digits(full);
  config.output_spec_.clear();
  for (const auto& d : top.digits) config.output_spec_.push_back({d.value, d.significance});
  if (config.saturation_ceiling() > config.block_width_) {
    throw std::logic_error("compressor tree reports more than its block width");
  }
  return config;
}

CompressorConfig build(std::vector<LutKind> levels) {
  if (levels.empty()) return CompressorConfig{};
  std::size_t luts = 1;
  for (;;) {
    auto wiring = wire(levels, luts);
    if (wiring.short_level < 0) return build(std::move(levels), luts);
    // Every bit count grows linearly with the first-level LUT count.
    const unsigned f = fan_in(levels[static_cast<std::size_t>(wiring.short_level)]);
    const std::size_t g = std::gcd(wiring.short_group_size, static_cast<std::size_t>(f));
    luts *= f / g;
    if (luts * fan_in(levels.front()) > max_block_width) {
      throw std::invalid_argument("inconsistent wiring at level " + std::to_string(wiring.short_level) +
                                  ": filling every LUT needs a block wider than " +
                                  std::to_string(max_block_width) + " bits");
    }
  }
}

namespace {

std::string canonical_label(std::string_view label) {
  std::string s;
  for (char c : label) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (s == "216" || s == "540" || s == "1024") s = "D" + s;
  return s;
}

}  // namespace

CompressorConfig preset(std::string_view label) {
  using enum LutKind;
  const std::string key = canonical_label(label);
  std::vector<LutKind> levels;
  if (key == "A") levels = {Or6};
  else if (key == "B") levels = {Sat2Thermometer};
  else if (key == "C") levels = {Sat3Positional};
  else if (key == "D") levels = {Or6, Or6};
  else if (key == "E") levels = {Or6, Sat2Thermometer};
  else if (key == "F") levels = {Or6, Sat3Positional};
  else if (key == "G") levels = {Sat2Thermometer, Or6};
  else if (key == "H") levels = {Sat2Thermometer, Sat2Thermometer};
  else if (key == "I") levels = {Sat2Thermometer, Sat3Positional};
  else if (key == "J") levels = {Sat3Positional, Or6};
  else if (key == "K") levels = {Sat3Positional, Sat2Thermometer};
  else if (key == "L") levels = {Sat3Positional, Sat3Positional};
  else if (key == "D216") levels = {Or6, Or6, Or6};
  else if (key == "D540") levels = {Or6, Or6, Sat2Thermometer, Or6};  // [36:1) stage into a [15:1) stage
  else if (key == "D1024") levels = {Or6, Or6, Or6, Or6};             // 1296-bit block covers 1024
  else if (key == "EXACT") return CompressorConfig{};
  else throw std::invalid_argument("unknown compressor preset '" + std::string(label) + "'");
  return build(std::move(levels)).named(key);
}

std::vector<std::string> shallow_preset_labels() { return {"A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L"}; }

std::vector<std::string> all_preset_labels() {
  auto labels = shallow_preset_labels();
  for (const char* s : {"D216", "D540", "D1024", "EXACT"}) labels.emplace_back(s);
  return labels;
}

TreeEvaluator::TreeEvaluator(const CompressorConfig& config) : config_(&config) {
  for (const auto& level : config.netlist()) values_.emplace_back(level.size(), 0);
  if (!config.is_identity()) counts_.resize(config.netlist().front().size());
}

void TreeEvaluator::run(std::span<const std::uint8_t> first_level_counts) {
  const auto& net = config_->netlist();
  for (std::size_t j = 0; j < net[0].size(); ++j) values_[0][j] = static_cast<std::uint8_t>(saturate(net[0][j].kind, first_level_counts[j]));
  for (std::size_t k = 1; k < net.size(); ++k) {
    const auto& prev = net[k - 1];
    const auto& prev_values = values_[k - 1];
    for (std::size_t j = 0; j < net[k].size(); ++j) {
      const LutNode& node = net[k][j];
      unsigned count = 0;
      for (const WireRef& in : node.inputs) count += output_bit(prev[in.lut].kind, prev_values[in.lut], in.bit);
      values_[k][j] = static_cast<std::uint8_t>(saturate(node.kind, count));
    }
  }
}

std::uint64_t TreeEvaluator::total(std::span<const std::uint8_t> first_level_counts) {
  run(first_level_counts);
  const auto& last = config_->netlist().back();
  std::uint64_t sum = 0;
  for (std::size_t j = 0; j < last.size(); ++j) sum += values_.back()[j] * last[j].significance;
  return sum;
}

std::uint64_t TreeEvaluator::total_word(std::uint64_t block) {
  if (config_->is_identity()) return static_cast<std::uint64_t>(std::popcount(block));
  const auto& first = config_->netlist().front();
  const unsigned f = fan_in(first.front().kind);
  const std::uint64_t mask = (std::uint64_t{1} << f) - 1;
  for (std::size_t j = 0; j < first.size(); ++j) {
    counts_[j] = static_cast<std::uint8_t>(std::popcount((block >> first[j].first_bit) & mask));
  }
  return total(counts_);
}

CompressedVector TreeEvaluator::digits(std::span<const std::uint8_t> first_level_counts) {
  run(first_level_counts);
  const auto& last = config_->netlist().back();
  CompressedVector out;
  for (std::size_t j = 0; j < last.size(); ++j) out.digits.push_back({values_.back()[j], last[j].significance});
  return out;
}

namespace {

void block_counts(const CompressorConfig& config, const BitVector& v, std::size_t offset,
                  std::vector<std::uint8_t>& counts) {
  const auto& first = config.netlist().front();
  for (std::size_t j = 0; j < first.size(); ++j) {
    counts[j] = static_cast<std::uint8_t>(v.weight_range(offset + first[j].first_bit, fan_in(first[j].kind)));
  }
}

}  // namespace

CompressedVector compress_block(const CompressorConfig& config, const BitVector& block) {
  if (block.length() != config.block_width()) {
    throw std::invalid_argument("block has " + std::to_string(block.length()) + " bits, configuration expects " +
                                std::to_string(config.block_width()));
  }
  if (config.is_identity()) return CompressedVector{{Digit{block.test(0) ? 1U : 0U, 1}}};
  TreeEvaluator eval(config);
  std::vector<std::uint8_t> counts(config.netlist().front().size());
  block_counts(config, block, 0, counts);
  return eval.digits(counts);
}

std::uint64_t approx_weight(const CompressorConfig& config, const BitVector& v) {
  if (config.is_identity()) return exact_weight(v);
  TreeEvaluator eval(config);
  std::vector<std::uint8_t> counts(config.netlist().front().size());
  const std::size_t width = config.block_width();
  std::uint64_t sum = 0;
  for (std::size_t offset = 0; offset < v.length(); offset += width) {
    if (v.weight_range(offset, width) == 0) continue;
    block_counts(config, v, offset, counts);
    sum += eval.total(counts);
  }
  return sum;
}

std::uint64_t approx_weight_sparse(const CompressorConfig& config, std::span<const std::uint32_t> sorted_indices) {
  if (config.is_identity()) return sorted_indices.size();
  const std::size_t width = config.block_width();
  const unsigned f = fan_in(config.levels().front());
  std::uint64_t sum = 0;
  std::size_t i = 0;
  std::vector<std::uint8_t> counts;
  std::optional<TreeEvaluator> eval;
  while (i < sorted_indices.size()) {
    const std::size_t block = sorted_indices[i] / width;
    std::size_t j = i + 1;
    while (j < sorted_indices.size() && sorted_indices[j] / width == block) ++j;
    if (j - i == 1) {
      // A lone set bit always survives the tree with unit weight.
      sum += 1;
    } else {
      if (!eval) {
        eval.emplace(config);
        counts.assign(config.netlist().front().size(), 0);
      }
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t k = i; k < j; ++k) ++counts[(sorted_indices[k] % width) / f];
      sum += eval->total(counts);
    }
    i = j;
  }
  return sum;
}

std::map<LutKind, std::uint64_t> resource_estimate(const CompressorConfig& config, std::size_t n) {
  if (n == 0) throw std::invalid_argument("input width must be at least 1");
  std::map<LutKind, std::uint64_t> counts;
  if (config.is_identity()) return counts;
  const std::uint64_t trees = (n + config.block_width() - 1) / config.block_width();
  for (const auto& level : config.netlist()) {
    for (const auto& node : level) counts[node.kind] += trees;
  }
  return counts;
}

}  // namespace lutcount
