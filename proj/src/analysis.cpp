#include "lutcount/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

namespace lutcount {

namespace mp = boost::multiprecision;

double AccuracyReport::percent_correct() const {
  using Wide = mp::cpp_bin_float_50;
  return static_cast<double>(Wide(correct_count * 100) / Wide(total_inputs));
}

std::string AccuracyReport::percent_string(int significant) const {
  using Dec = mp::cpp_dec_float_100;
  const Dec value = Dec(correct_count * 100) / Dec(total_inputs);
  std::ostringstream os;
  os << std::scientific << std::setprecision(significant - 1) << value;
  return os.str();
}

namespace {

unsigned resolve_workers(unsigned workers) {
  if (workers == 0) workers = std::max(1U, std::thread::hardware_concurrency());
  return workers;
}

AccuracyReport make_report(const CompressorConfig& config) {
  AccuracyReport r;
  r.config = config.name();
  r.block_width = config.block_width();
  r.total_inputs = BigCount(1) << config.block_width();
  return r;
}

}  // namespace

AccuracyReport enumerate_accuracy_exhaustive(const CompressorConfig& config, std::size_t width_limit) {
  const std::size_t width = config.block_width();
  if (width > width_limit || width > 63) {
    throw std::invalid_argument("block width " + std::to_string(width) + " exceeds the exhaustive limit of " +
                                std::to_string(std::min<std::size_t>(width_limit, 63)) +
                                " bits; use the combinatorial oracle");
  }
  const std::uint64_t inputs = std::uint64_t{1} << width;
  const unsigned workers = static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(0), inputs));
  std::vector<std::uint64_t> partial(workers, 0);
  auto scan = [&](unsigned w) {
    TreeEvaluator eval(config);
    const std::uint64_t begin = inputs / workers * w;
    const std::uint64_t end = (w + 1 == workers) ? inputs : inputs / workers * (w + 1);
    std::uint64_t correct = 0;
    for (std::uint64_t block = begin; block < end; ++block) {
      if (eval.total_word(block) == static_cast<std::uint64_t>(std::popcount(block))) ++correct;
    }
    partial[w] = correct;
  };
  if (workers == 1) {
    scan(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(scan, w);
  }
  AccuracyReport report = make_report(config);
  std::uint64_t correct = 0;
  for (auto c : partial) correct += c;
  report.correct_count = correct;
  return report;
}

namespace {

// Slot numbering for every LUT past the first level, plus who feeds whom.
struct Topology {
  struct Node {
    LutKind kind;
    std::uint64_t significance;
    bool is_final;
    std::vector<int> consumer_of_bit;  // slot consuming each output bit, -1 for final outputs
  };
  std::vector<Node> first;            // first-level LUTs
  std::vector<Node> upper;            // slots
  std::vector<std::vector<int>> closes_after;  // slots evaluated after each first-level LUT, in order
};

Topology make_topology(const CompressorConfig& config) {
  const auto& net = config.netlist();
  Topology topo;
  std::vector<std::size_t> level_base(net.size(), 0);
  std::size_t slots = 0;
  for (std::size_t k = 1; k < net.size(); ++k) {
    level_base[k] = slots;
    slots += net[k].size();
  }
  auto make_node = [&](std::size_t k, std::size_t j) {
    const LutNode& n = net[k][j];
    return Topology::Node{n.kind, n.significance, k + 1 == net.size(),
                          std::vector<int>(output_bits(n.kind), -1)};
  };
  for (std::size_t j = 0; j < net[0].size(); ++j) topo.first.push_back(make_node(0, j));
  for (std::size_t k = 1; k < net.size(); ++k) {
    for (std::size_t j = 0; j < net[k].size(); ++j) topo.upper.push_back(make_node(k, j));
  }

  std::vector<int> pending(slots, 0);
  for (std::size_t k = 1; k < net.size(); ++k) {
    for (std::size_t j = 0; j < net[k].size(); ++j) {
      const int slot = static_cast<int>(level_base[k] + j);
      std::vector<std::uint32_t> producers;
      for (const WireRef& in : net[k][j].inputs) {
        Topology::Node& p = (k == 1) ? topo.first[in.lut] : topo.upper[level_base[k - 1] + in.lut];
        p.consumer_of_bit[in.bit] = slot;
        producers.push_back(in.lut);
      }
      std::sort(producers.begin(), producers.end());
      pending[static_cast<std::size_t>(slot)] =
          static_cast<int>(std::unique(producers.begin(), producers.end()) - producers.begin());
    }
  }

  auto distinct_consumers = [](const Topology::Node& n) {
    std::vector<int> out;
    for (int c : n.consumer_of_bit) {
      if (c >= 0 && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
  };
  topo.closes_after.resize(topo.first.size());
  for (std::size_t j = 0; j < topo.first.size(); ++j) {
    std::vector<int> ready;
    for (int c : distinct_consumers(topo.first[j])) {
      if (--pending[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
    }
    for (std::size_t q = 0; q < ready.size(); ++q) {
      topo.closes_after[j].push_back(ready[q]);
      for (int c : distinct_consumers(topo.upper[static_cast<std::size_t>(ready[q])])) {
        if (--pending[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
      }
    }
  }
  return topo;
}

// State key: 4 bytes of signed (true - reported) followed by one clipped count per slot.
using StateMap = std::unordered_map<std::string, BigCount>;

std::int32_t key_diff(const std::string& key) {
  std::int32_t d;
  std::memcpy(&d, key.data(), sizeof d);
  return d;
}

void set_diff(std::string& key, std::int32_t d) { std::memcpy(key.data(), &d, sizeof d); }

std::uint8_t& slot_count(std::string& key, int slot) {
  return reinterpret_cast<std::uint8_t&>(key[sizeof(std::int32_t) + static_cast<std::size_t>(slot)]);
}

// Routes a LUT's digit to its consumers (or into the reported total).
void emit(const Topology& topo, const Topology::Node& node, unsigned value, std::string& key) {
  if (node.is_final) {
    set_diff(key, key_diff(key) - static_cast<std::int32_t>(value * node.significance));
    return;
  }
  for (std::size_t b = 0; b < node.consumer_of_bit.size(); ++b) {
    if (output_bit(node.kind, value, static_cast<unsigned>(b)) == 0) continue;
    const int c = node.consumer_of_bit[b];
    std::uint8_t& count = slot_count(key, c);
    if (count < cap(topo.upper[static_cast<std::size_t>(c)].kind)) ++count;
  }
}

}  // namespace

AccuracyReport enumerate_accuracy_combinatorial(const CompressorConfig& config) {
  AccuracyReport report = make_report(config);
  if (config.is_identity()) {
    report.correct_count = report.total_inputs;
    return report;
  }
  const Topology topo = make_topology(config);
  const unsigned f = fan_in(config.levels().front());
  std::vector<BigCount> binom(f + 1);
  for (unsigned w = 0; w <= f; ++w) {
    std::uint64_t c = 1;
    for (unsigned i = 0; i < w; ++i) c = c * (f - i) / (i + 1);
    binom[w] = c;
  }

  StateMap states;
  states.emplace(std::string(sizeof(std::int32_t) + topo.upper.size(), '\0'), BigCount(1));
  for (std::size_t j = 0; j < topo.first.size(); ++j) {
    const Topology::Node& lut = topo.first[j];
    StateMap next;
    next.reserve(states.size() * 2);
    for (const auto& [key, mult] : states) {
      for (unsigned w = 0; w <= f; ++w) {
        std::string k2 = key;
        set_diff(k2, key_diff(k2) + static_cast<std::int32_t>(w));
        emit(topo, lut, saturate(lut.kind, w), k2);
        for (int slot : topo.closes_after[j]) {
          std::uint8_t& count = slot_count(k2, slot);
          const Topology::Node& node = topo.upper[static_cast<std::size_t>(slot)];
          const unsigned value = saturate(node.kind, count);
          count = 0;
          emit(topo, node, value, k2);
        }
        next[std::move(k2)] += mult * binom[w];
      }
    }
    states = std::move(next);
  }
  BigCount correct = 0;
  for (const auto& [key, mult] : states) {
    if (key_diff(key) == 0) correct += mult;
  }
  report.correct_count = correct;
  return report;
}

double relative_error(std::uint64_t exact, std::uint64_t approx) {
  if (exact == 0) throw std::domain_error("relative error is undefined for an exact count of zero");
  return (static_cast<double>(exact) - static_cast<double>(approx)) / static_cast<double>(exact);
}

std::vector<double> default_densities() {
  std::vector<double> d;
  for (int p = 1; p <= 10; ++p) d.push_back(p / 100.0);
  for (int p = 20; p <= 100; p += 10) d.push_back(p / 100.0);
  return d;
}

SweepReport density_sweep(const CompressorConfig& config, std::size_t n, const std::vector<double>& densities,
                          std::size_t trials, std::uint64_t seed, unsigned workers) {
  if (trials < 2) throw std::invalid_argument("a sweep needs at least two trials per density");
  if (n == 0) throw std::invalid_argument("vector length must be at least 1");
  for (std::size_t i = 0; i < densities.size(); ++i) {
    const double w = std::round(densities[i] * static_cast<double>(n));
    if (!(w >= 1.0) || w > static_cast<double>(n)) {
      throw std::invalid_argument("density " + std::to_string(densities[i]) + " gives weight outside [1, " +
                                  std::to_string(n) + "]");
    }
    if (i > 0 && !(densities[i] > densities[i - 1])) {
      throw std::invalid_argument("densities must be strictly increasing");
    }
  }

  SweepReport report{config.name(), n, trials, seed, {}};
  workers = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), trials));
  std::vector<std::uint64_t> lost(trials);  // exact - approx per trial
  for (std::size_t di = 0; di < densities.size(); ++di) {
    const auto weight = static_cast<std::size_t>(std::round(densities[di] * static_cast<double>(n)));
    auto run = [&](unsigned w) {
      for (std::size_t t = w; t < trials; t += workers) {
        RngStream rng(seed, hash_combine(di, t));
        const BitVector v = random_fixed_weight(n, weight, rng);
        lost[t] = weight - approx_weight(config, v);
      }
    };
    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }
    // Integer moments keep the statistics exact until the final scaling.
    unsigned __int128 sum = 0, sum_sq = 0;
    for (std::uint64_t d : lost) {
      sum += d;
      sum_sq += static_cast<unsigned __int128>(d) * d;
    }
    const double scale = 100.0 / static_cast<double>(weight);
    const double t = static_cast<double>(trials);
    const double mean = static_cast<double>(sum) / t * scale;
    const auto num = static_cast<unsigned __int128>(trials) * sum_sq - sum * sum;
    const double var = static_cast<double>(num) / (t * (t - 1.0)) * scale * scale;
    report.rows.push_back({densities[di], weight, mean, std::sqrt(var)});
  }
  return report;
}

std::optional<double> reference_percent_correct(std::string_view label) {
  static const std::pair<const char*, double> table[] = {
      {"A", 11.0},   {"B", 50.0},   {"C", 81.0},   {"D", 5.4e-08}, {"E", 3.8e-06}, {"F", 4.7e-06},
      {"G", 4.9e-02}, {"H", 1.9e-02}, {"I", 1.9e-02}, {"J", 4.9e-02}, {"K", 1.7e-03}, {"L", 7.8e-03},
  };
  for (const auto& [name, value] : table) {
    if (label == name) return value;
  }
  return std::nullopt;
}

std::vector<AuditRow> table_audit(const std::vector<std::string>& labels, double flag_factor) {
  std::vector<AuditRow> rows;
  for (const auto& label : labels) {
    const auto ref = reference_percent_correct(label);
    if (!ref) throw std::invalid_argument("no reference value for preset '" + label + "'");
    const CompressorConfig config = preset(label);
    AccuracyReport report = enumerate_accuracy_combinatorial(config);
    const double ratio = report.percent_correct() / *ref;
    const bool flagged = ratio > flag_factor || ratio < 1.0 / flag_factor;
    rows.push_back({label, std::move(report), *ref, ratio, flagged});
  }
  return rows;
}

}  // namespace lutcount
