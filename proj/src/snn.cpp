#include "lutcount/snn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lutcount/rng.hpp"

namespace lutcount::snn {

namespace {

constexpr std::uint64_t kConnectionStream = 0x636f6e6e;
constexpr std::uint64_t kInitialStateStream = 0x76696e69;
constexpr std::uint64_t kEncoderStream = 0x6574610a;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

std::size_t to_steps(double ms, double dt) { return static_cast<std::size_t>(std::llround(ms / dt)); }

}  // namespace

void NeuronParams::validate() const {
  require(v_reset < v_r && v_r < v_t && v_t < v_peak, "neuron: need v_reset < v_r < v_t < v_peak");
  require(dt > 0 && tau_s > 0 && C > 0, "neuron: dt, tau_s and C must be positive");
}

void NetworkConfig::validate() const {
  require(n >= 2 && n % 2 == 0, "network: n must be even and at least 2");
  require(n <= (1U << 20), "network: n too large");
  require(frac_exc > 0 && frac_exc < 1, "network: frac_exc must be in (0, 1)");
  require(density_exc >= 0 && density_exc <= frac_exc, "network: density_exc must be in [0, frac_exc]");
  require(density_inh >= 0 && density_inh <= 1 - frac_exc, "network: density_inh must be in [0, 1 - frac_exc]");
}

void LearningParams::validate() const {
  require(p0 > 0, "learning: p0 must be positive");
  require(rls_interval >= 1, "learning: rls_interval must be at least 1");
}

void PhaseSchedule::validate() const {
  require(init_ms > 0 && train_ms > 0 && generate_ms > 0, "schedule: durations must be positive");
}

void SnnConfig::validate() const {
  neuron.validate();
  network.validate();
  learning.validate();
  schedule.validate();
  require(population_window_ms > 0, "population_window_ms must be positive");
  require(chaos.neuron < network.n, "chaos.neuron out of range");
  require(chaos.threshold_frac > 0 && chaos.horizon_ms > 0, "chaos: threshold and horizon must be positive");
}

std::size_t SnnConfig::init_steps() const { return to_steps(schedule.init_ms, neuron.dt); }
std::size_t SnnConfig::train_end_step() const {
  return to_steps(schedule.init_ms + schedule.train_ms, neuron.dt);
}
std::size_t SnnConfig::total_steps() const { return to_steps(schedule.total_ms(), neuron.dt); }

double Connectivity::density_exc() const {
  std::size_t total = 0;
  for (const auto& row : exc) total += row.weight();
  return static_cast<double>(total) / static_cast<double>(n * n);
}

double Connectivity::density_inh() const {
  std::size_t total = 0;
  for (const auto& row : inh) total += row.weight();
  return static_cast<double>(total) / static_cast<double>(n * n);
}

Connectivity build_network(const NetworkConfig& config) {
  config.validate();
  Connectivity net;
  net.n = config.n;
  net.n_exc = config.n_exc();
  // Each matrix only has entries in the columns its type owns, so the
  // within-column probability is the matrix density over the owned fraction.
  const double p_exc = config.density_exc * static_cast<double>(net.n) / static_cast<double>(net.n_exc);
  const double p_inh = config.density_inh * static_cast<double>(net.n) / static_cast<double>(net.n - net.n_exc);
  net.exc.assign(net.n, BitVector(net.n));
  net.inh.assign(net.n, BitVector(net.n));
  net.targets.assign(net.n, {});
  for (std::size_t i = 0; i < net.n; ++i) {
    RngStream rng(config.seed, hash_combine(kConnectionStream, i));
    for (std::size_t j = 0; j < net.n; ++j) {
      const bool excitatory = net.is_excitatory(j);
      if (!rng.bernoulli(excitatory ? p_exc : p_inh)) continue;
      (excitatory ? net.exc : net.inh)[i].set(j);
      net.targets[j].push_back(static_cast<std::uint32_t>(i));
    }
  }
  return net;
}

PresynapticCount accumulate_presynaptic(const CompressorConfig& compressor, const BitVector& cv, const BitVector& sv) {
  const BitVector rv = bitwise_and(cv, sv);
  return {approx_weight(compressor, rv), exact_weight(rv)};
}

void FailureStats::add(std::uint64_t exact, std::uint64_t approx) {
  if (exact == 0) return;
  const double pct = 100.0 * static_cast<double>(exact - approx) / static_cast<double>(exact);
  max_pct = std::max(max_pct, pct);
  sum_pct += pct;
  ++pairs;
}

SpikeRouter::SpikeRouter(const Connectivity& net, const CompressorConfig& compressor)
    : net_(&net), compressor_(&compressor), exc_in_(net.n), inh_in_(net.n) {}

std::span<const SpikeRouter::Input> SpikeRouter::route(std::span<const std::uint32_t> fired) {
  out_.clear();
  touched_.clear();
  for (std::uint32_t j : fired) {
    auto& lists = net_->is_excitatory(j) ? exc_in_ : inh_in_;
    for (std::uint32_t i : net_->targets[j]) {
      if (exc_in_[i].empty() && inh_in_[i].empty()) touched_.push_back(i);
      lists[i].push_back(j);
    }
  }
  std::sort(touched_.begin(), touched_.end());
  for (std::uint32_t i : touched_) {
    Input in{i, {}, {}};
    in.exc = {approx_weight_sparse(*compressor_, exc_in_[i]), exc_in_[i].size()};
    in.inh = {approx_weight_sparse(*compressor_, inh_in_[i]), inh_in_[i].size()};
    exc_in_[i].clear();
    inh_in_[i].clear();
    out_.push_back(in);
  }
  return out_;
}

void rls_update(Matrix& P, Vector& phi, const Vector& r, double err) {
  const Vector Pr = P * r;
  const double c = 1.0 / (1.0 + r.dot(Pr));
  // u u^T is symmetric element for element, so P stays exactly symmetric.
  const Vector u = std::sqrt(c) * Pr;
  P.noalias() -= u * u.transpose();
  // P' r = c P r.
  phi -= (err * c) * Pr;
  if (!std::isfinite(c) || !P.allFinite() || !phi.allFinite()) throw TrainingDiverged("RLS state is not finite");
}

Network::Network(const SnnConfig& config)
    : config_(config),
      net_(build_network(config_.network)),
      router_(net_, config_.network.compressor),
      init_steps_(config_.init_steps()),
      train_end_(config_.train_end_step()) {
  config_.validate();
  const auto n = static_cast<Eigen::Index>(config_.network.n);
  const NeuronParams& np = config_.neuron;
  v.resize(n);
  RngStream init(config_.network.seed, kInitialStateStream);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = init.uniform(np.v_r, np.v_peak);
  RngStream enc(config_.network.seed, kEncoderStream);
  eta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) eta[i] = enc.uniform(-1.0, 1.0);
  u = Vector::Zero(n);
  s = Vector::Zero(n);
  r = Vector::Zero(n);
  phi = Vector::Zero(n);
  P = Matrix::Identity(n, n) * config_.learning.p0;
  decay_s_ = std::exp(-np.dt / np.tau_s);
  filter_jump_ = 1.0 / np.tau_s;
}

Phase Network::phase() const {
  if (step_ < init_steps_) return Phase::Init;
  if (step_ < train_end_) return Phase::Train;
  return Phase::Generate;
}

double Network::target_at(std::size_t step) const {
  const double t_s = static_cast<double>(step) * config_.neuron.dt * 1e-3;
  return config_.learning.target_amplitude * std::sin(2.0 * std::numbers::pi * config_.learning.target_hz * t_s);
}

void Network::suppress_transmission(std::uint32_t neuron) { std::erase(transmit_, neuron); }

std::span<const std::uint32_t> Network::step() {
  const NeuronParams& np = config_.neuron;
  const NetworkConfig& nc = config_.network;

  s *= decay_s_;
  for (const auto& in : router_.route(transmit_)) {
    s[in.neuron] += nc.G * (nc.w_exc * static_cast<double>(in.exc.approx) - nc.w_inh * static_cast<double>(in.inh.approx));
    failures.add(in.exc.exact + in.inh.exact, in.exc.approx + in.inh.approx);
  }
  r *= decay_s_;
  for (std::uint32_t j : fired_) r[j] += filter_jump_;

  zhat = phi.dot(r);
  const Phase ph = phase();
  if (ph == Phase::Train && (step_ - init_steps_) % config_.learning.rls_interval == 0) {
    rls_update(P, phi, r, zhat - target_at(step_));
  }

  const auto I = (s + (nc.Q * zhat) * eta).array() + np.bias;
  const Eigen::ArrayXd va = v.array();
  const Eigen::ArrayXd dv = (np.k * (va - np.v_r) * (va - np.v_t) - u.array() + I) / np.C;
  u.array() += np.dt * np.a * (np.b * (va - np.v_r) - u.array());
  v.array() += np.dt * dv;

  fired_.clear();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] >= np.v_peak) {
      v[i] = np.v_reset;
      u[i] += np.jump_d;
      fired_.push_back(static_cast<std::uint32_t>(i));
    }
  }
  transmit_ = fired_;
  if (!v.allFinite() || !u.allFinite() || !s.allFinite() || !std::isfinite(zhat)) {
    throw SimulationDiverged("simulation diverged at step " + std::to_string(step_));
  }
  ++step_;
  return fired_;
}

std::vector<double> population_activity(std::span<const std::uint32_t> step_counts, std::size_t n, double dt_ms,
                                        double window_ms) {
  require(window_ms > 0 && dt_ms > 0 && n > 0, "population_activity: window, dt and n must be positive");
  const std::size_t steps = step_counts.size();
  const std::size_t w = std::max<std::size_t>(1, to_steps(window_ms, dt_ms));
  const std::size_t before = w / 2;
  const std::size_t after = w - 1 - before;
  std::vector<std::uint64_t> prefix(steps + 1, 0);
  for (std::size_t k = 0; k < steps; ++k) prefix[k + 1] = prefix[k] + step_counts[k];
  const double to_rate = 1.0 / (static_cast<double>(n) * dt_ms * 1e-3);
  std::vector<double> out(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t lo = k >= before ? k - before : 0;
    const std::size_t hi = std::min(steps, k + after + 1);
    out[k] = static_cast<double>(prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo) * to_rate;
  }
  return out;
}

namespace {

struct Deletion {
  std::uint32_t neuron;
  std::size_t step;
};

void finalize(SnnResult& res, const SnnConfig& config, std::size_t steps, double sq_err, const FailureStats& failures) {
  const std::size_t train_end = config.train_end_step();
  res.steps = steps;
  res.v0.resize(steps);
  res.step_spike_counts.resize(steps);
  res.zhat.resize(steps);
  res.target.resize(steps);
  res.population = population_activity(res.step_spike_counts, res.n, res.dt, config.population_window_ms);
  Metrics& m = res.metrics;
  m.total_spikes = res.spikes.size();
  const double seconds = static_cast<double>(steps) * res.dt * 1e-3;
  m.mfr = steps == 0 ? 0.0 : static_cast<double>(m.total_spikes) / (static_cast<double>(res.n) * seconds);
  m.mse = steps > train_end ? sq_err / static_cast<double>(steps - train_end) : 0.0;
  m.failure_max_pct = failures.max_pct;
  m.failure_mean_pct = failures.mean_pct();
  m.failure_pairs = failures.pairs;
}

SnnResult simulate(const SnnConfig& config, std::optional<Deletion> deletion = std::nullopt) {
  Network net(config);
  const std::size_t steps = config.total_steps();
  const std::size_t train_end = config.train_end_step();
  SnnResult res;
  res.dt = config.neuron.dt;
  res.n = config.network.n;
  res.v0.resize(steps);
  res.step_spike_counts.resize(steps);
  res.zhat.resize(steps);
  res.target.resize(steps);
  double sq_err = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    std::span<const std::uint32_t> fired;
    try {
      fired = net.step();
    } catch (const TrainingDiverged& e) {
      finalize(res, config, k, sq_err, net.failures);
      throw TrainingDiverged(e.what(), std::make_shared<const SnnResult>(std::move(res)));
    } catch (const SimulationDiverged& e) {
      finalize(res, config, k, sq_err, net.failures);
      throw SimulationDiverged(e.what(), std::make_shared<const SnnResult>(std::move(res)));
    }
    const bool v0_fired = !fired.empty() && fired.front() == 0;
    res.v0[k] = v0_fired ? config.neuron.v_peak : net.v[0];
    res.step_spike_counts[k] = static_cast<std::uint32_t>(fired.size());
    for (std::uint32_t j : fired) res.spikes.push_back({j, k});
    res.zhat[k] = net.zhat;
    res.target[k] = net.target_at(k);
    if (k >= train_end) sq_err += (res.zhat[k] - res.target[k]) * (res.zhat[k] - res.target[k]);
    if (deletion && deletion->step == k) net.suppress_transmission(deletion->neuron);
  }
  finalize(res, config, steps, sq_err, net.failures);
  return res;
}

}  // namespace

SnnResult run_experiment(const SnnConfig& config) { return simulate(config); }

FailureStats replay_failure(std::span<const SpikeRecord> spikes, std::size_t steps, const Connectivity& net,
                            const CompressorConfig& compressor) {
  require(steps > 0, "replay_failure: empty recording");
  std::vector<SpikeRecord> sorted(spikes.begin(), spikes.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const SpikeRecord& a, const SpikeRecord& b) { return a.step != b.step ? a.step < b.step : a.neuron < b.neuron; });
  SpikeRouter router(net, compressor);
  FailureStats stats;
  std::vector<std::uint32_t> fired;
  std::size_t pos = 0;
  while (pos < sorted.size()) {
    const std::uint64_t k = sorted[pos].step;
    // A spike is delivered on the step after it fires, which must still be inside the recording.
    if (k + 1 >= steps) break;
    fired.clear();
    for (; pos < sorted.size() && sorted[pos].step == k; ++pos) {
      if (sorted[pos].neuron >= net.n) throw std::out_of_range("replay_failure: neuron id out of range");
      if (fired.empty() || fired.back() != sorted[pos].neuron) fired.push_back(sorted[pos].neuron);
    }
    for (const auto& in : router.route(fired)) stats.add(in.exc.exact + in.inh.exact, in.exc.approx + in.inh.approx);
  }
  return stats;
}

ChaosReport chaos_experiment(const SnnConfig& config) {
  config.validate();
  ChaosReport rep;
  rep.neuron = config.chaos.neuron;
  rep.baseline = simulate(config);
  const std::size_t after = to_steps(config.chaos.after_ms, config.neuron.dt);
  const auto it = std::find_if(rep.baseline.spikes.begin(), rep.baseline.spikes.end(), [&](const SpikeRecord& sr) {
    return sr.neuron == rep.neuron && sr.step >= after;
  });
  if (it == rep.baseline.spikes.end()) {
    throw std::runtime_error("chaos: neuron " + std::to_string(rep.neuron) + " has no spike after " +
                             std::to_string(config.chaos.after_ms) + " ms");
  }
  rep.deletion_step = it->step;
  rep.perturbed = simulate(config, Deletion{rep.neuron, rep.deletion_step});

  const SnnResult& a = rep.baseline;
  const SnnResult& b = rep.perturbed;
  rep.dv0.resize(a.steps);
  rep.dpop.resize(a.steps);
  for (std::size_t k = 0; k < a.steps; ++k) {
    rep.dv0[k] = std::abs(a.v0[k] - b.v0[k]);
    rep.dpop[k] = std::abs(a.population[k] - b.population[k]);
    if (!rep.first_divergence_step && (a.v0[k] != b.v0[k] || a.step_spike_counts[k] != b.step_spike_counts[k])) {
      rep.first_divergence_step = k;
    }
  }
  const auto upto = [&](const SnnResult& r) {
    return std::vector<SpikeRecord>(r.spikes.begin(), std::find_if(r.spikes.begin(), r.spikes.end(), [&](const SpikeRecord& sr) {
                                      return sr.step > rep.deletion_step;
                                    }));
  };
  rep.identical_before_deletion =
      upto(a) == upto(b) && std::equal(a.v0.begin(), a.v0.begin() + static_cast<std::ptrdiff_t>(rep.deletion_step + 1), b.v0.begin());
  rep.baseline_mean_rate = a.metrics.mfr;
  const std::size_t horizon_end = std::min(a.steps, rep.deletion_step + 1 + to_steps(config.chaos.horizon_ms, config.neuron.dt));
  for (std::size_t k = rep.deletion_step; k < horizon_end; ++k) rep.max_dpop_in_horizon = std::max(rep.max_dpop_in_horizon, rep.dpop[k]);
  rep.diverged = rep.max_dpop_in_horizon > config.chaos.threshold_frac * rep.baseline_mean_rate;
  return rep;
}

}  // namespace lutcount::snn
