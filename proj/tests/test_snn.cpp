#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>

#include "lutcount/snn.hpp"
#include "lutcount/snn_io.hpp"

using namespace lutcount;
using namespace lutcount::snn;

namespace {

SnnConfig short_config(double init_ms, double train_ms, double generate_ms) {
  SnnConfig c;
  c.schedule = {init_ms, train_ms, generate_ms};
  return c;
}

BitVector random_bits(std::size_t n, double p, RngStream& rng) {
  BitVector v(n);
  for (std::size_t i = 0; i < n; ++i) v.set(i, rng.bernoulli(p));
  return v;
}

bool same_state(const Network& a, const Network& b) {
  return a.v == b.v && a.u == b.u && a.s == b.s && a.r == b.r && a.phi == b.phi;
}

}  // namespace

TEST_CASE("parameter validation") {
  NeuronParams np;
  CHECK_NOTHROW(np.validate());
  np.v_t = -70;
  CHECK_THROWS_AS(np.validate(), std::invalid_argument);
  NetworkConfig nc;
  nc.n = 7;
  CHECK_THROWS_AS(nc.validate(), std::invalid_argument);
  PhaseSchedule ps{2000, 0, 1000};
  CHECK_THROWS_AS(ps.validate(), std::invalid_argument);
  const SnnConfig c;
  CHECK(c.init_steps() == 50000);
  CHECK(c.train_end_step() == 100000);
  CHECK(c.total_steps() == 125000);
}

TEST_CASE("build_network") {
  NetworkConfig nc;
  SUBCASE("realized densities and column ownership") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      nc.seed = seed;
      const auto net = build_network(nc);
      CHECK(std::abs(net.density_exc() - 0.05) <= 0.005);
      CHECK(std::abs(net.density_inh() - 0.05) <= 0.005);
      for (std::size_t i = 0; i < net.n; ++i) {
        for (auto j : net.exc[i].indices()) REQUIRE(net.is_excitatory(j));
        for (auto j : net.inh[i].indices()) REQUIRE_FALSE(net.is_excitatory(j));
      }
    }
  }
  SUBCASE("target lists mirror the rows") {
    const auto net = build_network(nc);
    std::size_t edges = 0;
    for (std::size_t j = 0; j < net.n; ++j) {
      REQUIRE(std::is_sorted(net.targets[j].begin(), net.targets[j].end()));
      for (auto i : net.targets[j]) REQUIRE((net.is_excitatory(j) ? net.exc[i] : net.inh[i]).test(j));
      edges += net.targets[j].size();
    }
    std::size_t weight = 0;
    for (std::size_t i = 0; i < net.n; ++i) weight += net.exc[i].weight() + net.inh[i].weight();
    CHECK(edges == weight);
  }
  SUBCASE("deterministic per seed") {
    const auto a = build_network(nc);
    const auto b = build_network(nc);
    CHECK(a.exc == b.exc);
    CHECK(a.inh == b.inh);
    nc.seed = 1;
    CHECK_FALSE(build_network(nc).exc == a.exc);
  }
  SUBCASE("zero density") {
    nc.density_exc = nc.density_inh = 0;
    const auto net = build_network(nc);
    CHECK(net.density_exc() == 0);
    CHECK(net.density_inh() == 0);
  }
}

TEST_CASE("accumulate_presynaptic") {
  RngStream rng(4);
  const auto cv = random_bits(1024, 0.1, rng);
  CHECK(accumulate_presynaptic(preset("D"), cv, make_zero(1024)).exact == 0);
  CHECK(accumulate_presynaptic(preset("D"), cv, make_zero(1024)).approx == 0);
  for (int t = 0; t < 200; ++t) {
    const auto sv = random_bits(1024, 0.05, rng);
    const auto exact = accumulate_presynaptic(preset("EXACT"), cv, sv);
    CHECK(exact.approx == exact.exact);
    CHECK(exact.exact == and_weight(cv, sv));
    const auto deep = accumulate_presynaptic(preset("D1024"), cv, sv);
    CHECK(deep.approx == (deep.exact > 0 ? 1U : 0U));
    for (const char* label : {"A", "D", "L", "D540"}) {
      const auto r = accumulate_presynaptic(preset(label), cv, sv);
      REQUIRE(r.approx <= r.exact);
    }
  }
  CHECK_THROWS_AS(accumulate_presynaptic(preset("A"), make_zero(8), make_zero(9)), std::invalid_argument);
}

TEST_CASE("sparse routing agrees with dense accumulation") {
  NetworkConfig nc;
  nc.seed = 3;
  const auto net = build_network(nc);
  RngStream rng(12);
  for (const char* label : {"EXACT", "A", "D", "H", "L", "D216", "D1024"}) {
    const auto comp = preset(label);
    SpikeRouter router(net, comp);
    for (int t = 0; t < 10; ++t) {
      const auto sv = random_bits(net.n, 0.02, rng);
      std::vector<std::uint32_t> fired;
      for (auto i : sv.indices()) fired.push_back(static_cast<std::uint32_t>(i));
      const auto routed = router.route(fired);
      std::size_t pos = 0;
      for (std::size_t i = 0; i < net.n; ++i) {
        const auto e = accumulate_presynaptic(comp, net.exc[i], sv);
        const auto in = accumulate_presynaptic(comp, net.inh[i], sv);
        if (e.exact + in.exact == 0) continue;
        REQUIRE(pos < routed.size());
        REQUIRE(routed[pos].neuron == i);
        CHECK(routed[pos].exc.approx == e.approx);
        CHECK(routed[pos].exc.exact == e.exact);
        CHECK(routed[pos].inh.approx == in.approx);
        CHECK(routed[pos].inh.exact == in.exact);
        ++pos;
      }
      CHECK(pos == routed.size());
    }
  }
}

TEST_CASE("FailureStats") {
  FailureStats f;
  f.add(0, 0);
  CHECK(f.pairs == 0);
  f.add(4, 4);
  f.add(4, 1);
  CHECK(f.pairs == 2);
  CHECK(f.max_pct == 75.0);
  CHECK(f.mean_pct() == 37.5);
}

TEST_CASE("rls_update") {
  const Eigen::Index n = 40;
  RngStream rng(21);
  const auto random_vector = [&] {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.uniform(-1, 1);
    return x;
  };
  SUBCASE("matches the textbook formula") {
    Matrix P = Matrix::Identity(n, n) * 2.0;
    Vector phi = random_vector();
    for (int t = 0; t < 5; ++t) {
      const Vector r = random_vector();
      const double err = rng.uniform(-1, 1);
      const Matrix expect_P = P - (P * r * r.transpose() * P) / (1.0 + r.dot(P * r));
      const Vector expect_phi = phi - err * expect_P * r;
      rls_update(P, phi, r, err);
      CHECK((P - expect_P).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((phi - expect_phi).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("zero error or zero rate leaves the decoder") {
    Matrix P = Matrix::Identity(n, n);
    Vector phi = random_vector();
    const Vector phi0 = phi;
    rls_update(P, phi, random_vector(), 0.0);
    CHECK(phi == phi0);
    const Matrix P0 = P;
    rls_update(P, phi, Vector::Zero(n), 0.7);
    CHECK(P == P0);
    CHECK(phi == phi0);
  }
  SUBCASE("P stays symmetric over many updates") {
    Matrix P = Matrix::Identity(n, n) * 2.0;
    Vector phi = Vector::Zero(n);
    for (int t = 0; t < 10000; ++t) rls_update(P, phi, 0.05 * random_vector(), rng.uniform(-1, 1));
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("non-finite P") {
    Matrix P = Matrix::Identity(n, n);
    P(0, 0) = std::nan("");
    Vector phi = Vector::Zero(n);
    CHECK_THROWS_AS(rls_update(P, phi, random_vector(), 0.1), TrainingDiverged);
  }
}

TEST_CASE("population_activity") {
  CHECK(population_activity(std::vector<std::uint32_t>(500, 0), 1024, 0.04, 8.0) == std::vector<double>(500, 0.0));
  const auto constant = population_activity(std::vector<std::uint32_t>(1000, 1), 1024, 0.04, 8.0);
  for (double x : constant) CHECK(x == doctest::Approx(1.0 / (1024 * 0.04e-3)));
  CHECK_THROWS_AS(population_activity(std::vector<std::uint32_t>(5, 0), 4, 0.04, 0.0), std::invalid_argument);
}

TEST_CASE("autonomous relaxation without input") {
  SnnConfig c = short_config(20, 20, 20);
  c.network.density_exc = c.network.density_inh = 0;
  c.neuron.bias = 0;
  c.network.Q = 0;
  Network net(c);
  net.v.setConstant(-50.0);
  net.step();
  // Below v_t the quadratic term pulls v down toward v_r.
  CHECK(net.v[0] < -50.0);
  for (int k = 0; k < 25000; ++k) REQUIRE(net.step().empty());
  CHECK(std::abs(net.v[0] - c.neuron.v_r) < 0.5);
  CHECK(net.v == Vector::Constant(net.v.size(), net.v[0]));
}

TEST_CASE("runs are deterministic and the exact adder never fails") {
  const SnnConfig c = short_config(300, 200, 100);
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  CHECK(a.spikes == b.spikes);
  CHECK(a.v0 == b.v0);
  CHECK(a.zhat == b.zhat);
  CHECK(a.population == b.population);
  CHECK(a.metrics.mse == b.metrics.mse);
  CHECK(a.metrics.failure_max_pct == 0.0);
  CHECK(a.metrics.failure_mean_pct == 0.0);
  CHECK(a.metrics.failure_pairs > 0);
  CHECK(a.metrics.total_spikes > 0);

  // MFR from the raw records, same expression.
  const double seconds = static_cast<double>(a.steps) * a.dt * 1e-3;
  CHECK(a.metrics.mfr == static_cast<double>(a.spikes.size()) / (static_cast<double>(a.n) * seconds));

  // Interior of the moving average conserves spikes; only the edges are truncated.
  double integral = 0;
  for (double x : a.population) integral += x * a.dt * 1e-3 * static_cast<double>(a.n);
  CHECK(std::abs(integral - static_cast<double>(a.spikes.size())) <= 0.02 * static_cast<double>(a.spikes.size()));
}

TEST_CASE("an approximate adder first diverges where it first drops a spike") {
  SnnConfig exact_cfg = short_config(400, 10, 10);
  SnnConfig approx_cfg = exact_cfg;
  approx_cfg.network.compressor = preset("D1024");
  Network exact(exact_cfg), approx(approx_cfg);
  bool failed = false;
  for (std::size_t k = 0; k < exact_cfg.total_steps() && !failed; ++k) {
    exact.step();
    approx.step();
    failed = approx.failures.max_pct > 0;
    REQUIRE(same_state(exact, approx) == !failed);
  }
  CHECK(failed);
}

TEST_CASE("closed-loop failures equal a replay of the same spike train") {
  SnnConfig c = short_config(400, 300, 100);
  c.network.compressor = preset("D216");
  const auto run = run_experiment(c);
  const Network net(c);
  const auto replay = replay_failure(run.spikes, run.steps, net.connectivity(), c.network.compressor);
  CHECK(replay.pairs == run.metrics.failure_pairs);
  CHECK(replay.max_pct == run.metrics.failure_max_pct);
  CHECK(replay.mean_pct() == run.metrics.failure_mean_pct);

  const auto exact = replay_failure(run.spikes, run.steps, net.connectivity(), preset("EXACT"));
  CHECK(exact.max_pct == 0);
  CHECK(exact.pairs == run.metrics.failure_pairs);

  double prev = -1;
  for (const char* label : {"A", "D", "D216", "D1024"}) {
    const double mean = replay_failure(run.spikes, run.steps, net.connectivity(), preset(label)).mean_pct();
    CHECK(mean >= prev);
    prev = mean;
  }
  CHECK_THROWS_AS(replay_failure(run.spikes, 0, net.connectivity(), preset("A")), std::invalid_argument);
}

TEST_CASE("simulation divergence is reported") {
  Network net(short_config(10, 10, 10));
  net.step();
  net.u[5] = std::nan("");
  CHECK_THROWS_AS(net.step(), SimulationDiverged);
}

TEST_CASE("chaos experiment") {
  SUBCASE("one deleted spike spreads through the network") {
    SnnConfig c = short_config(1600, 10, 10);
    c.chaos.after_ms = 500;
    const auto rep = chaos_experiment(c);
    CHECK(rep.baseline.spikes[0] == rep.perturbed.spikes[0]);
    CHECK(rep.identical_before_deletion);
    REQUIRE(rep.first_divergence_step.has_value());
    CHECK(*rep.first_divergence_step > rep.deletion_step);
    CHECK(rep.diverged);
    for (std::size_t k = 0; k + 200 < rep.deletion_step; ++k) REQUIRE(rep.dpop[k] == 0.0);
    // The deleted spike still resets its neuron, so both runs record it.
    const SpikeRecord deleted{rep.neuron, rep.deletion_step};
    CHECK(std::count(rep.perturbed.spikes.begin(), rep.perturbed.spikes.end(), deleted) == 1);
  }
  SUBCASE("a neuron without targets cannot perturb anything") {
    SnnConfig c = short_config(300, 50, 50);
    c.network.n = 32;
    c.network.density_exc = c.network.density_inh = 0.02;
    c.chaos.after_ms = 0;
    std::optional<ChaosReport> rep;
    for (std::uint64_t seed = 0; seed < 50 && !rep; ++seed) {
      c.network.seed = seed;
      const auto net = build_network(c.network);
      for (std::uint32_t j = 0; j < net.n && !rep; ++j) {
        if (!net.targets[j].empty()) continue;
        c.chaos.neuron = j;
        try {
          rep = chaos_experiment(c);
        } catch (const std::runtime_error&) {
          // This neuron never fires; try another.
        }
      }
    }
    REQUIRE(rep.has_value());
    CHECK_FALSE(rep->first_divergence_step.has_value());
    CHECK_FALSE(rep->diverged);
    CHECK(*std::max_element(rep->dv0.begin(), rep->dv0.end()) == 0.0);
    CHECK(rep->baseline.spikes == rep->perturbed.spikes);
  }
  SUBCASE("missing spike") {
    SnnConfig c = short_config(100, 10, 10);
    c.chaos.after_ms = 119;
    c.network.density_exc = c.network.density_inh = 0;
    c.neuron.bias = 0;
    c.network.Q = 0;
    CHECK_THROWS_AS(chaos_experiment(c), std::runtime_error);
  }
}

TEST_CASE("parameter file") {
  const SnnConfig defaults;
  const auto j = config_to_json(defaults);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);

  SUBCASE("the shipped default file matches the built-in defaults") {
    CHECK(config_to_json(load_config(LUTCOUNT_SOURCE_DIR "/configs/snn_default.json")) == j);
  }
  SUBCASE("missing keys are listed") {
    auto partial = j;
    partial["neuron"].erase("tau_s");
    partial.erase("chaos");
    try {
      config_from_json(partial);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::find(e.missing.begin(), e.missing.end(), "neuron.tau_s") != e.missing.end());
      CHECK(std::find(e.missing.begin(), e.missing.end(), "chaos.horizon_ms") != e.missing.end());
      CHECK(e.missing.size() == 5);
    }
  }
  SUBCASE("unknown keys and bad values are rejected") {
    auto extra = j;
    extra["network"]["gain"] = 1.0;
    CHECK_THROWS_AS(config_from_json(extra), ConfigError);
    auto bad = j;
    bad["network"]["compressor"] = "Z";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["neuron"]["dt"] = "fast";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  }
}

TEST_CASE("run files round-trip the spike train") {
  SnnConfig c = short_config(100, 50, 50);
  c.network.compressor = preset("D");
  const auto run = run_experiment(c);
  const auto dir = std::filesystem::temp_directory_path() / "lutcount_test_snn_run";
  std::filesystem::remove_all(dir);
  write_run(dir, c, run);
  for (const char* f : {"spikes.csv", "voltage0.csv", "population.csv", "readout.csv", "metrics.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(read_spikes_csv(dir / "spikes.csv", c.neuron.dt) == run.spikes);
  std::ifstream m(dir / "metrics.json");
  const auto metrics = nlohmann::json::parse(m);
  CHECK(metrics["mfr"].get<double>() == run.metrics.mfr);
  CHECK(metrics["config"]["network"]["compressor"] == "D");
  std::filesystem::remove_all(dir);
}
