#include "lutcount/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lutcount/analysis.hpp"
#include "lutcount/snn.hpp"
#include "lutcount/snn_io.hpp"

namespace lutcount::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double x, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Failure("cannot write " + path.string());
  return f;
}

// Shared flags and the run manifest.
struct Run {
  std::vector<std::string> args;
  std::string out_dir;
  bool overwrite = false;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> presets;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  mutable bool prepared = false;

  fs::path dir() const { return fs::path(out_dir); }

  void prepare() const {
    const fs::path d = dir();
    if (fs::exists(d / "manifest.json") && !overwrite) {
      throw Failure("output directory " + d.string() + " already holds a run; pass --overwrite to replace it");
    }
    fs::create_directories(d);
    prepared = true;
  }

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return dir() / name;
  }

  void write_manifest(int exit_code) const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m{{"tool", "lutcount"},
           {"version", tool_version},
           {"command", args},
           {"seeds", seeds},
           {"presets", presets},
           {"outputs", outputs},
           {"overwrite", overwrite},
           {"exit_code", exit_code},
           {"wall_clock_s", seconds}};
    const fs::path tmp = dir() / "manifest.json.tmp";
    open_out(tmp) << m.dump(2) << '\n';
    fs::rename(tmp, dir() / "manifest.json");
  }
};

void add_common(CLI::App* app, Run& run, const std::string& default_out) {
  run.out_dir = default_out;
  app->add_option("--out", run.out_dir, "Output directory")->capture_default_str();
  app->add_flag("--overwrite", run.overwrite, "Replace the contents of an existing output directory");
}

std::vector<std::string> resolve_presets(const std::string& list) {
  std::vector<std::string> labels;
  for (const auto& item : split_list(list)) labels.push_back(preset(item).name());
  if (labels.empty()) throw Failure("--configs is empty");
  return labels;
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : sep) + s;
  return out;
}

// accuracy ------------------------------------------------------------------

struct AccuracyOptions {
  std::string configs = join(shallow_preset_labels());
  std::string method = "combinatorial";
  bool audit = false;
  std::size_t exhaustive_limit = default_exhaustive_limit;
};

int cmd_accuracy(Run& run, const AccuracyOptions& o, std::ostream& out, std::ostream& err) {
  run.presets = resolve_presets(o.configs);
  run.prepare();
  const bool exhaustive = o.method != "combinatorial";
  const bool combinatorial = o.method != "exhaustive";
  auto csv = open_out(run.output("accuracy.csv"));
  csv << "config,block_width,method,correct_count,total_inputs,percent_correct,percent_exact";
  if (o.method == "both") csv << ",methods_agree";
  if (o.audit) csv << ",reference_pct,ratio,flagged";
  csv << ",note\n";

  int code = 0;
  for (const auto& label : run.presets) {
    const CompressorConfig config = preset(label);
    std::optional<AccuracyReport> comb, exh;
    std::string note;
    if (combinatorial) comb = enumerate_accuracy_combinatorial(config);
    if (exhaustive) {
      try {
        exh = enumerate_accuracy_exhaustive(config, o.exhaustive_limit);
      } catch (const std::invalid_argument& e) {
        note = e.what();
      }
    }
    const std::optional<AccuracyReport>& rep = comb ? comb : exh;
    csv << label << ',' << config.block_width() << ',' << o.method << ',';
    if (rep) {
      csv << rep->correct_count << ',' << rep->total_inputs << ',' << rep->percent_string() << ','
          << rep->percent_exact();
    } else {
      csv << ",,,";
    }
    if (o.method == "both") {
      csv << ',';
      if (comb && exh) {
        const bool agree = comb->correct_count == exh->correct_count;
        csv << (agree ? "true" : "false");
        if (!agree) note = "exhaustive and combinatorial counts differ";
      }
    }
    std::optional<double> ref = reference_percent_correct(label);
    if (o.audit) {
      csv << ',';
      if (ref && rep) {
        const double ratio = rep->percent_correct() / *ref;
        const bool flagged = ratio > 2.0 || ratio < 0.5;
        csv << fmt(*ref, "%.3g") << ',' << fmt(ratio, "%.6g") << ',' << (flagged ? "true" : "false");
      } else {
        csv << ",,";
      }
    }
    csv << ',' << csv_field(note) << '\n';
    if (!note.empty()) {
      err << label << ": " << note << '\n';
      code = 1;
    }
    out << label << '\t' << (rep ? rep->percent_string() + " %" : std::string("-"));
    if (o.audit && ref && rep) out << "\treference " << fmt(*ref, "%.3g") << " %";
    out << '\n';
  }
  return code;
}

// sweep ---------------------------------------------------------------------

struct SweepOptions {
  std::string configs = join(shallow_preset_labels());
  std::size_t n = 1024;
  std::string densities = "1,2,3,4,5,6,7,8,9,10,20,30,40,50,60,70,80,90,100";
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 0;
};

int cmd_sweep(Run& run, const SweepOptions& o, std::ostream& out) {
  run.presets = resolve_presets(o.configs);
  run.seeds = {o.seed};
  std::vector<double> pct;
  for (const auto& s : split_list(o.densities)) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Failure("bad density '" + s + "'");
    pct.push_back(v);
  }
  std::vector<double> densities;
  for (double p : pct) densities.push_back(p / 100.0);
  run.prepare();
  auto csv = open_out(run.output("sweep.csv"));
  csv << "config,n,density_pct,trials,mean_err_pct,std_err_pct\n";
  for (const auto& label : run.presets) {
    const auto report = density_sweep(preset(label), o.n, densities, o.trials, o.seed, o.workers);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const SweepRow& row = report.rows[i];
      csv << label << ',' << o.n << ',' << fmt(pct[i], "%g") << ',' << o.trials << ',' << fmt(row.mean_err_pct) << ','
          << fmt(row.std_err_pct) << '\n';
    }
    out << label << ": " << report.rows.size() << " densities\n";
  }
  return 0;
}

// resources -----------------------------------------------------------------

int cmd_resources(Run& run, const std::string& configs, std::size_t n, std::ostream& out) {
  run.presets = resolve_presets(configs);
  run.prepare();
  auto csv = open_out(run.output("resources.csv"));
  csv << "config,lut_kind,count\n";
  for (const auto& label : run.presets) {
    for (const auto& [kind, count] : resource_estimate(preset(label), n)) {
      csv << label << ',' << to_string(kind) << ',' << count << '\n';
      out << label << '\t' << to_string(kind) << '\t' << count << '\n';
    }
  }
  return 0;
}

// snn -----------------------------------------------------------------------

struct SnnOptions {
  std::string compressor = "exact";
  std::string config_file;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string from;
};

snn::SnnConfig snn_config(Run& run, const SnnOptions& o) {
  snn::SnnConfig c = o.config_file.empty() ? snn::SnnConfig{} : snn::load_config(o.config_file);
  c.network.compressor = preset(o.compressor);
  if (o.seed_given) c.network.seed = o.seed;
  run.presets = {c.network.compressor.name()};
  run.seeds = {c.network.seed};
  return c;
}

void print_metrics(std::ostream& out, const snn::Metrics& m) {
  out << "mfr " << fmt(m.mfr, "%.4f") << " spikes/s, mse " << fmt(m.mse, "%.4g") << ", failure max "
      << fmt(m.failure_max_pct, "%.2f") << " %, mean " << fmt(m.failure_mean_pct, "%.4f") << " %\n";
}

int cmd_snn_run(Run& run, const SnnOptions& o, std::ostream& out, std::ostream& err) {
  const auto config = snn_config(run, o);
  run.prepare();
  for (const char* f : {"spikes.csv", "voltage0.csv", "population.csv", "readout.csv", "metrics.json"}) run.outputs.push_back(f);
  try {
    const auto result = snn::run_experiment(config);
    snn::write_run(run.dir(), config, result);
    print_metrics(out, result.metrics);
    return 0;
  } catch (const snn::SimulationDiverged& e) {
    if (e.partial) snn::write_run(run.dir(), config, *e.partial);
    err << e.what() << "; partial traces kept in " << run.dir().string() << '\n';
    return 1;
  }
}

int cmd_snn_chaos(Run& run, const SnnOptions& o, std::ostream& out) {
  const auto config = snn_config(run, o);
  run.prepare();
  for (const char* f : {"baseline", "perturbed", "divergence.csv", "chaos.json"}) run.outputs.push_back(f);
  const auto rep = snn::chaos_experiment(config);
  snn::write_chaos(run.dir(), config, rep);
  const double dt = config.neuron.dt;
  out << "deleted spike of neuron " << rep.neuron << " at " << fmt(static_cast<double>(rep.deletion_step) * dt, "%.2f")
      << " ms; first divergence "
      << (rep.first_divergence_step ? fmt(static_cast<double>(*rep.first_divergence_step) * dt, "%.2f") + " ms" : "none")
      << "; max |d pop| " << fmt(rep.max_dpop_in_horizon, "%.3f") << " Hz vs threshold "
      << fmt(config.chaos.threshold_frac * rep.baseline_mean_rate, "%.3f") << " Hz\n";
  return 0;
}

int cmd_snn_replay(Run& run, const SnnOptions& o, std::ostream& out) {
  const fs::path src(o.from);
  std::ifstream mf(src / "metrics.json");
  if (!mf) throw Failure("no metrics.json in " + src.string());
  const json metrics = json::parse(mf);
  const snn::SnnConfig recorded = snn::config_from_json(metrics.at("config"));
  const CompressorConfig compressor = preset(o.compressor);
  run.presets = {compressor.name()};
  run.seeds = {recorded.network.seed};
  const auto spikes = snn::read_spikes_csv(src / "spikes.csv", recorded.neuron.dt);
  const auto steps = metrics.at("steps").get<std::size_t>();
  run.prepare();
  const auto net = snn::build_network(recorded.network);
  const auto stats = snn::replay_failure(spikes, steps, net, compressor);
  json j{{"source", src.string()},
         {"source_compressor", recorded.network.compressor.name()},
         {"compressor", compressor.name()},
         {"failure_max_pct", stats.max_pct},
         {"failure_mean_pct", stats.mean_pct()},
         {"failure_pairs", stats.pairs},
         {"seed", recorded.network.seed}};
  open_out(run.output("replay.json")) << j.dump(2) << '\n';
  out << compressor.name() << ": failure max " << fmt(stats.max_pct, "%.2f") << " %, mean " << fmt(stats.mean_pct(), "%.4f")
      << " % over " << stats.pairs << " pairs\n";
  return 0;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int cmd_rerun(const std::string& manifest_path, std::ostream& out, std::ostream& err, int depth) {
  std::ifstream f(manifest_path);
  if (!f) throw Failure("cannot open " + manifest_path);
  const json m = json::parse(f);
  auto args = m.at("command").get<std::vector<std::string>>();
  if (std::find(args.begin(), args.end(), "--overwrite") == args.end()) args.push_back("--overwrite");
  return dispatch(args, out, err, depth + 1);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
  if (depth > 1) {
    err << "rerun: a manifest may not point at another rerun\n";
    return 2;
  }
  CLI::App app{"Approximate LUT Hamming-weight compressors: accuracy, sweeps, resources and spiking-network experiments",
               "lutcount"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("lutcount ") + tool_version);

  Run run;
  run.args = args;
  std::uint64_t echo_seed = 0;

  AccuracyOptions acc;
  auto* accuracy = app.add_subcommand("accuracy", "Fraction of block inputs counted exactly");
  accuracy->add_option("--configs", acc.configs, "Comma-separated preset labels")->capture_default_str();
  accuracy->add_option("--method", acc.method, "exhaustive, combinatorial or both")
      ->check(CLI::IsMember({"exhaustive", "combinatorial", "both"}))
      ->capture_default_str();
  accuracy->add_flag("--audit", acc.audit, "Add published reference values, ratios and >2x flags");
  accuracy->add_option("--seed", echo_seed, "Echoed in the manifest; accuracy is deterministic");
  accuracy->add_option("--exhaustive-limit", acc.exhaustive_limit, "Widest block scanned exhaustively")->capture_default_str();
  add_common(accuracy, run, "results/accuracy");

  SweepOptions sw;
  auto* sweep = app.add_subcommand("sweep", "Mean relative error against input density");
  sweep->add_option("--configs", sw.configs, "Comma-separated preset labels")->capture_default_str();
  sweep->add_option("--n", sw.n, "Vector length")->capture_default_str();
  sweep->add_option("--densities", sw.densities, "Comma-separated densities in percent")->capture_default_str();
  sweep->add_option("--trials", sw.trials, "Vectors per density")->capture_default_str();
  sweep->add_option("--seed", sw.seed, "RNG seed")->capture_default_str();
  sweep->add_option("--workers", sw.workers, "Worker threads, 0 = hardware concurrency")->capture_default_str();
  add_common(sweep, run, "results/sweep");

  std::string res_configs = join(all_preset_labels());
  std::size_t res_n = 1024;
  auto* resources = app.add_subcommand("resources", "LUT counts per compressor stage");
  resources->add_option("--configs", res_configs, "Comma-separated preset labels")->capture_default_str();
  resources->add_option("--n", res_n, "Vector length")->capture_default_str();
  resources->add_option("--seed", echo_seed, "Echoed in the manifest; estimates are deterministic");
  add_common(resources, run, "results/resources");

  SnnOptions so;
  auto* snn_cmd = app.add_subcommand("snn", "Spiking-network experiments");
  snn_cmd->require_subcommand(1);
  const auto add_snn = [&](const char* name, const char* help) {
    auto* sub = snn_cmd->add_subcommand(name, help);
    sub->add_option("--compressor", so.compressor, "exact, A, D, 216, 540, 1024 or any preset label")->capture_default_str();
    sub->add_option("--configs", so.compressor, "Alias of --compressor");
    sub->add_option("--config", so.config_file, "Parameter file (JSON); built-in defaults when omitted");
    sub->add_option("--seed", so.seed, "Overrides the parameter file's seed");
    add_common(sub, run, std::string("results/snn_") + name);
    return sub;
  };
  auto* snn_run = add_snn("run", "Full init/train/generate run");
  auto* snn_chaos = add_snn("chaos", "Baseline and single-spike-deletion rerun");
  auto* snn_replay = add_snn("replay", "Replay a recorded spike train through another compressor");
  snn_replay->add_option("--from", so.from, "Run directory holding spikes.csv and metrics.json")->required();

  std::string manifest;
  auto* rerun = app.add_subcommand("rerun", "Re-invoke the command recorded in a manifest");
  rerun->add_option("manifest", manifest, "manifest.json of a previous run")->required();

  std::vector<const char*> argv{"lutcount"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  for (auto* sub : {snn_run, snn_chaos, snn_replay}) {
    if (sub->parsed() && sub->count("--seed") > 0) so.seed_given = true;
  }

  if (rerun->parsed()) return cmd_rerun(manifest, out, err, depth);

  int code = 0;
  try {
    if (accuracy->parsed() || resources->parsed()) run.seeds = {echo_seed};
    if (accuracy->parsed()) code = cmd_accuracy(run, acc, out, err);
    else if (sweep->parsed()) code = cmd_sweep(run, sw, out);
    else if (resources->parsed()) code = cmd_resources(run, res_configs, res_n, out);
    else if (snn_run->parsed()) code = cmd_snn_run(run, so, out, err);
    else if (snn_chaos->parsed()) code = cmd_snn_chaos(run, so, out);
    else if (snn_replay->parsed()) code = cmd_snn_replay(run, so, out);
  } catch (const Failure& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = 1;
  }
  if (run.prepared) run.write_manifest(code);
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return dispatch(args, out, err, 0);
}

}  // namespace lutcount::cli
