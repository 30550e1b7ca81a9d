#include "lutcount/snn_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lutcount::snn {

using nlohmann::json;

namespace {

// Pulls typed values out of a json object while recording missing and unexpected keys.
class Reader {
 public:
  Reader(const json& root, std::vector<std::string>& missing, std::vector<std::string>& unknown)
      : missing_(missing), unknown_(unknown) {
    check_object(root, "");
    stack_.push_back({&root, ""});
  }

  template <typename T>
  void get(const char* key, T& out) {
    const json* obj = stack_.back().node;
    const std::string path = stack_.back().prefix + key;
    seen_[stack_.back().prefix].insert(key);
    if (obj == nullptr || !obj->contains(key)) {
      missing_.push_back(path);
      return;
    }
    try {
      out = (*obj)[key].template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: key '" + path + "' has the wrong type");
    }
  }

  void enter(const char* key) {
    const json* obj = stack_.back().node;
    const std::string prefix = stack_.back().prefix + key + ".";
    seen_[stack_.back().prefix].insert(key);
    const json* child = nullptr;
    if (obj != nullptr && obj->contains(key)) {
      child = &(*obj)[key];
      check_object(*child, prefix);
    }
    stack_.push_back({child, prefix});
  }

  void leave() {
    finish_level();
    stack_.pop_back();
  }

  void finish() { finish_level(); }

 private:
  struct Level {
    const json* node;
    std::string prefix;
  };

  static void check_object(const json& j, const std::string& prefix) {
    if (!j.is_object()) throw ConfigError("config: '" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  }

  void finish_level() {
    const Level& level = stack_.back();
    if (level.node == nullptr) return;
    for (const auto& [key, value] : level.node->items()) {
      if (!seen_[level.prefix].contains(key)) unknown_.push_back(level.prefix + key);
    }
  }

  std::vector<std::string>& missing_;
  std::vector<std::string>& unknown_;
  std::vector<Level> stack_;
  std::map<std::string, std::set<std::string>> seen_;
};

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

void write_series(const std::filesystem::path& path, const char* header, const SnnResult& res,
                  const std::vector<double>& values) {
  auto f = open_out(path);
  f << header << '\n';
  for (std::size_t k = 0; k < values.size(); ++k) f << num(res.time_ms(k)) << ',' << num(values[k]) << '\n';
}

}  // namespace

json config_to_json(const SnnConfig& c) {
  if (c.network.compressor.name().empty()) {
    throw ConfigError("config: only named compressor presets can be written to a parameter file");
  }
  const NeuronParams& np = c.neuron;
  const NetworkConfig& nc = c.network;
  return json{
      {"neuron",
       {{"C", np.C}, {"k", np.k}, {"v_r", np.v_r}, {"v_t", np.v_t}, {"v_peak", np.v_peak}, {"v_reset", np.v_reset},
        {"a", np.a}, {"b", np.b}, {"jump_d", np.jump_d}, {"bias", np.bias}, {"tau_s", np.tau_s}, {"dt", np.dt}}},
      {"network",
       {{"n", nc.n}, {"frac_exc", nc.frac_exc}, {"density_exc", nc.density_exc}, {"density_inh", nc.density_inh},
        {"w_exc", nc.w_exc}, {"w_inh", nc.w_inh}, {"G", nc.G}, {"Q", nc.Q}, {"compressor", nc.compressor.name()},
        {"seed", nc.seed}}},
      {"learning",
       {{"target_hz", c.learning.target_hz}, {"target_amplitude", c.learning.target_amplitude},
        {"p0", c.learning.p0}, {"rls_interval", c.learning.rls_interval}}},
      {"schedule",
       {{"init_ms", c.schedule.init_ms}, {"train_ms", c.schedule.train_ms}, {"generate_ms", c.schedule.generate_ms}}},
      {"population_window_ms", c.population_window_ms},
      {"chaos",
       {{"neuron", c.chaos.neuron}, {"after_ms", c.chaos.after_ms}, {"threshold_frac", c.chaos.threshold_frac},
        {"horizon_ms", c.chaos.horizon_ms}}},
  };
}

SnnConfig config_from_json(const json& j) {
  SnnConfig c;
  std::vector<std::string> missing, unknown;
  Reader rd(j, missing, unknown);
  rd.enter("neuron");
  NeuronParams& np = c.neuron;
  rd.get("C", np.C);
  rd.get("k", np.k);
  rd.get("v_r", np.v_r);
  rd.get("v_t", np.v_t);
  rd.get("v_peak", np.v_peak);
  rd.get("v_reset", np.v_reset);
  rd.get("a", np.a);
  rd.get("b", np.b);
  rd.get("jump_d", np.jump_d);
  rd.get("bias", np.bias);
  rd.get("tau_s", np.tau_s);
  rd.get("dt", np.dt);
  rd.leave();
  rd.enter("network");
  NetworkConfig& nc = c.network;
  std::string compressor = "EXACT";
  rd.get("n", nc.n);
  rd.get("frac_exc", nc.frac_exc);
  rd.get("density_exc", nc.density_exc);
  rd.get("density_inh", nc.density_inh);
  rd.get("w_exc", nc.w_exc);
  rd.get("w_inh", nc.w_inh);
  rd.get("G", nc.G);
  rd.get("Q", nc.Q);
  rd.get("compressor", compressor);
  rd.get("seed", nc.seed);
  rd.leave();
  rd.enter("learning");
  rd.get("target_hz", c.learning.target_hz);
  rd.get("target_amplitude", c.learning.target_amplitude);
  rd.get("p0", c.learning.p0);
  rd.get("rls_interval", c.learning.rls_interval);
  rd.leave();
  rd.enter("schedule");
  rd.get("init_ms", c.schedule.init_ms);
  rd.get("train_ms", c.schedule.train_ms);
  rd.get("generate_ms", c.schedule.generate_ms);
  rd.leave();
  rd.get("population_window_ms", c.population_window_ms);
  rd.enter("chaos");
  rd.get("neuron", c.chaos.neuron);
  rd.get("after_ms", c.chaos.after_ms);
  rd.get("threshold_frac", c.chaos.threshold_frac);
  rd.get("horizon_ms", c.chaos.horizon_ms);
  rd.leave();
  rd.finish();

  if (!missing.empty()) throw ConfigError("config: missing keys: " + join(missing), missing);
  if (!unknown.empty()) throw ConfigError("config: unknown keys: " + join(unknown));
  try {
    nc.compressor = preset(compressor);
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

SnnConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

json metrics_json(const SnnConfig& config, const SnnResult& res) {
  const Metrics& m = res.metrics;
  return json{{"mfr", m.mfr},
              {"mse", m.mse},
              {"failure_max_pct", m.failure_max_pct},
              {"failure_mean_pct", m.failure_mean_pct},
              {"failure_pairs", m.failure_pairs},
              {"total_spikes", m.total_spikes},
              {"steps", res.steps},
              {"seed", config.network.seed},
              {"config", config_to_json(config)}};
}

void write_run(const std::filesystem::path& dir, const SnnConfig& config, const SnnResult& res) {
  std::filesystem::create_directories(dir);
  {
    auto f = open_out(dir / "spikes.csv");
    f << "neuron,time_ms\n";
    for (const auto& s : res.spikes) f << s.neuron << ',' << num(res.time_ms(s.step)) << '\n';
  }
  write_series(dir / "voltage0.csv", "time_ms,v_mV", res, res.v0);
  write_series(dir / "population.csv", "time_ms,rate_hz", res, res.population);
  {
    auto f = open_out(dir / "readout.csv");
    f << "time_ms,zhat,target\n";
    for (std::size_t k = 0; k < res.steps; ++k) {
      f << num(res.time_ms(k)) << ',' << num(res.zhat[k]) << ',' << num(res.target[k]) << '\n';
    }
  }
  open_out(dir / "metrics.json") << metrics_json(config, res).dump(2) << '\n';
}

std::vector<SpikeRecord> read_spikes_csv(const std::filesystem::path& path, double dt_ms) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "neuron,time_ms") throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<SpikeRecord> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream in(line);
    long long neuron = -1;
    double t = 0;
    char comma = 0;
    if (!(in >> neuron >> comma >> t) || comma != ',' || neuron < 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    out.push_back({static_cast<std::uint32_t>(neuron), static_cast<std::uint64_t>(std::llround(t / dt_ms))});
  }
  return out;
}

void write_chaos(const std::filesystem::path& dir, const SnnConfig& config, const ChaosReport& rep) {
  write_run(dir / "baseline", config, rep.baseline);
  write_run(dir / "perturbed", config, rep.perturbed);
  {
    auto f = open_out(dir / "divergence.csv");
    f << "time_ms,dv0_mV,dpop_hz\n";
    for (std::size_t k = 0; k < rep.dv0.size(); ++k) {
      f << num(rep.baseline.time_ms(k)) << ',' << num(rep.dv0[k]) << ',' << num(rep.dpop[k]) << '\n';
    }
  }
  const double dt = config.neuron.dt;
  json j{{"neuron", rep.neuron},
         {"deletion_time_ms", static_cast<double>(rep.deletion_step) * dt},
         {"first_divergence_ms", rep.first_divergence_step ? json(static_cast<double>(*rep.first_divergence_step) * dt) : json(nullptr)},
         {"identical_before_deletion", rep.identical_before_deletion},
         {"baseline_mean_rate_hz", rep.baseline_mean_rate},
         {"max_dpop_in_horizon_hz", rep.max_dpop_in_horizon},
         {"threshold_hz", config.chaos.threshold_frac * rep.baseline_mean_rate},
         {"diverged", rep.diverged},
         {"seed", config.network.seed},
         {"config", config_to_json(config)}};
  open_out(dir / "chaos.json") << j.dump(2) << '\n';
}

}  // namespace lutcount::snn
