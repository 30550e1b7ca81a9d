#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lutcount/bitvec.hpp"
#include "lutcount/compressor.hpp"

namespace lutcount::snn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct SnnResult;

/// Thrown when v, u, s or the readout stop being finite. Carries the traces up to that step when known.
class SimulationDiverged : public std::runtime_error {
 public:
  explicit SimulationDiverged(const std::string& what, std::shared_ptr<const SnnResult> partial = nullptr)
      : std::runtime_error(what), partial(std::move(partial)) {}
  std::shared_ptr<const SnnResult> partial;
};

/// Thrown when the RLS correlation matrix stops being finite.
class TrainingDiverged : public SimulationDiverged {
 public:
  using SimulationDiverged::SimulationDiverged;
};

/// Izhikevich quadratic integrate-and-fire constants (mV, ms, pA-like units).
struct NeuronParams {
  double C = 250.0;
  double k = 2.5;
  double v_r = -60.0;
  double v_t = -19.2;
  double v_peak = 30.0;
  double v_reset = -65.0;
  double a = 0.01;
  double b = -2.0;
  double jump_d = 200.0;
  /// Slightly above rheobase (1000) so heavily compressed networks keep firing.
  double bias = 1050.0;
  double tau_s = 20.0;
  double dt = 0.04;

  void validate() const;
};

struct NetworkConfig {
  std::size_t n = 1024;
  double frac_exc = 0.5;
  /// Fraction of all n*n entries set in each matrix.
  double density_exc = 0.05;
  double density_inh = 0.05;
  /// Per-spike jump of s before the global gain; includes the 1/tau_s filter normalization.
  double w_exc = 0.015625;
  double w_inh = 0.015625;
  double G = 5000.0;
  double Q = 5000.0;
  CompressorConfig compressor{};
  std::uint64_t seed = 0;

  std::size_t n_exc() const { return static_cast<std::size_t>(static_cast<double>(n) * frac_exc + 0.5); }
  void validate() const;
};

struct LearningParams {
  double target_hz = 5.0;
  double target_amplitude = 1.0;
  /// P starts as p0 * I.
  double p0 = 2.0;
  /// Steps between RLS updates during training.
  std::size_t rls_interval = 20;

  void validate() const;
};

struct PhaseSchedule {
  double init_ms = 2000.0;
  double train_ms = 2000.0;
  double generate_ms = 1000.0;

  double total_ms() const { return init_ms + train_ms + generate_ms; }
  void validate() const;
};

struct ChaosParams {
  std::uint32_t neuron = 0;
  double after_ms = 1000.0;
  /// Divergence criterion: |d pop| > threshold_frac * baseline mean rate within horizon_ms.
  double threshold_frac = 0.1;
  double horizon_ms = 1000.0;
};

struct SnnConfig {
  NeuronParams neuron;
  NetworkConfig network;
  LearningParams learning;
  PhaseSchedule schedule;
  double population_window_ms = 8.0;
  ChaosParams chaos;

  void validate() const;
  /// Steps per phase boundary, rounded to the nearest step.
  std::size_t init_steps() const;
  std::size_t train_end_step() const;
  std::size_t total_steps() const;
};

/**
 * Binary E and I connectivity. Row i of exc/inh is the presynaptic connection
 * vector of neuron i; columns below n_exc are excitatory, the rest inhibitory.
 */
struct Connectivity {
  std::size_t n = 0;
  std::size_t n_exc = 0;
  std::vector<BitVector> exc;
  std::vector<BitVector> inh;
  /// targets[j] = postsynaptic neurons of j, ascending.
  std::vector<std::vector<std::uint32_t>> targets;

  bool is_excitatory(std::size_t j) const { return j < n_exc; }
  double density_exc() const;
  double density_inh() const;
};

Connectivity build_network(const NetworkConfig& config);

struct PresynapticCount {
  std::uint64_t approx = 0;
  std::uint64_t exact = 0;
};

/// rv = cv & sv; returns (approx_weight(rv), exact_weight(rv)).
PresynapticCount accumulate_presynaptic(const CompressorConfig& compressor, const BitVector& cv, const BitVector& sv);

/// Running max/mean of 100*(exact - approx)/exact over pairs with exact >= 1.
struct FailureStats {
  double max_pct = 0.0;
  double sum_pct = 0.0;
  std::uint64_t pairs = 0;

  double mean_pct() const { return pairs == 0 ? 0.0 : sum_pct / static_cast<double>(pairs); }
  void add(std::uint64_t exact, std::uint64_t approx);
};

/**
 * Sparse spike propagation for one step. Given the neurons that fired on the
 * previous step, produces approximate E and I counts for every neuron with at
 * least one incoming spike, identical to accumulate_presynaptic on the dense
 * vectors.
 */
class SpikeRouter {
 public:
  SpikeRouter(const Connectivity& net, const CompressorConfig& compressor);

  struct Input {
    std::uint32_t neuron;
    PresynapticCount exc;
    PresynapticCount inh;
  };

  /// `fired` must be ascending. The returned span is valid until the next call.
  std::span<const Input> route(std::span<const std::uint32_t> fired);

 private:
  const Connectivity* net_;
  const CompressorConfig* compressor_;
  std::vector<std::vector<std::uint32_t>> exc_in_, inh_in_;
  std::vector<std::uint32_t> touched_;
  std::vector<Input> out_;
};

/// One RLS step in place; throws TrainingDiverged if P stops being finite.
void rls_update(Matrix& P, Vector& phi, const Vector& r, double err);

struct SpikeRecord {
  std::uint32_t neuron;
  std::uint64_t step;
  bool operator==(const SpikeRecord&) const = default;
};

struct Metrics {
  double mfr = 0.0;
  double mse = 0.0;
  double failure_max_pct = 0.0;
  double failure_mean_pct = 0.0;
  std::uint64_t failure_pairs = 0;
  std::uint64_t total_spikes = 0;
};

struct SnnResult {
  double dt = 0.0;
  std::size_t n = 0;
  std::size_t steps = 0;
  std::vector<SpikeRecord> spikes;
  std::vector<double> v0;
  std::vector<std::uint32_t> step_spike_counts;
  std::vector<double> population;
  std::vector<double> zhat;
  std::vector<double> target;
  Metrics metrics;

  double time_ms(std::size_t step) const { return static_cast<double>(step) * dt; }
};

enum class Phase { Init, Train, Generate };

/**
 * Stepwise simulator. State is public for inspection; step() advances one dt.
 *
 * Within a step: spikes fired on the previous step are routed through the
 * compressor into s, the rate filter r is updated, the readout is formed,
 * RLS runs when training, and v, u advance by forward Euler.
 */
class Network {
 public:
  explicit Network(const SnnConfig& config);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const SnnConfig& config() const { return config_; }
  const Connectivity& connectivity() const { return net_; }
  std::size_t step_index() const { return step_; }
  Phase phase() const;
  double target_at(std::size_t step) const;

  /// Advances one step and returns the ascending list of neurons that fired.
  std::span<const std::uint32_t> step();

  /// Clears `neuron`'s spike-vector bit from the step just taken; its reset and spike record stay.
  void suppress_transmission(std::uint32_t neuron);

  Vector v, u, s, r, eta, phi;
  Matrix P;
  double zhat = 0.0;
  FailureStats failures;

 private:
  SnnConfig config_;
  Connectivity net_;
  SpikeRouter router_;
  std::size_t step_ = 0;
  std::size_t init_steps_, train_end_;
  double decay_s_, filter_jump_;
  std::vector<std::uint32_t> fired_, transmit_;
};

/// Population rate (spikes/s per neuron) from per-step spike counts; centered window truncated at the edges.
std::vector<double> population_activity(std::span<const std::uint32_t> step_counts, std::size_t n, double dt_ms,
                                        double window_ms);

SnnResult run_experiment(const SnnConfig& config);

/**
 * Open loop: routes a recorded spike train through `compressor` without
 * feeding anything back. Spikes on the last step are never delivered, exactly
 * as in the closed-loop run.
 */
FailureStats replay_failure(std::span<const SpikeRecord> spikes, std::size_t steps, const Connectivity& net,
                            const CompressorConfig& compressor);

struct ChaosReport {
  std::uint32_t neuron = 0;
  std::size_t deletion_step = 0;
  std::vector<double> dv0;
  std::vector<double> dpop;
  std::optional<std::size_t> first_divergence_step;
  double baseline_mean_rate = 0.0;
  /// Largest |d pop| within the horizon after deletion.
  double max_dpop_in_horizon = 0.0;
  bool identical_before_deletion = false;
  bool diverged = false;
  SnnResult baseline;
  SnnResult perturbed;
};

/**
 * Reruns `config` with the transmission of one spike suppressed: the first
 * spike of chaos.neuron at or after chaos.after_ms. Throws std::runtime_error
 * when that spike does not exist in the baseline.
 */
ChaosReport chaos_experiment(const SnnConfig& config);

}  // namespace lutcount::snn
