#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lutcount/cli.hpp"
#include "lutcount/snn_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = lutcount::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream in(line);
    std::string cell;
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lutcount_cli_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& sub) const { return (path / sub).string(); }
};

}  // namespace

TEST_CASE("accuracy") {
  TempDir tmp("accuracy");
  auto r = cli({"accuracy", "--configs", "A,B,C", "--out", tmp / "abc"});
  REQUIRE(r.code == 0);
  auto rows = read_csv(tmp.path / "abc" / "accuracy.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0][0] == "config");
  CHECK(rows[1][5] == "1.09375e+01");
  CHECK(rows[2][5] == "5.00000e+01");
  CHECK(rows[3][5] == "8.12500e+01");
  CHECK(rows[1][6] == "175/16");

  r = cli({"accuracy", "--configs", "D", "--method", "combinatorial", "--out", tmp / "d"});
  REQUIRE(r.code == 0);
  rows = read_csv(tmp.path / "d" / "accuracy.csv");
  CHECK(rows[1][3] == "37");
  CHECK(rows[1][5] == "5.38421e-08");

  r = cli({"accuracy", "--configs", "C", "--method", "both", "--out", tmp / "both"});
  REQUIRE(r.code == 0);
  rows = read_csv(tmp.path / "both" / "accuracy.csv");
  CHECK(rows[0][7] == "methods_agree");
  CHECK(rows[1][7] == "true");

  SUBCASE("exhaustive on a wide block fails that row only") {
    r = cli({"accuracy", "--configs", "C,D", "--method", "exhaustive", "--out", tmp / "wide"});
    CHECK(r.code == 1);
    rows = read_csv(tmp.path / "wide" / "accuracy.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][3] == "26");
    CHECK(rows[2][3].empty());
    CHECK(rows[2].back().find("combinatorial") != std::string::npos);
  }
  SUBCASE("audit flags the rows that disagree") {
    r = cli({"accuracy", "--configs", "A,E", "--audit", "--out", tmp / "audit"});
    REQUIRE(r.code == 0);
    rows = read_csv(tmp.path / "audit" / "accuracy.csv");
    CHECK(rows[0][9] == "flagged");
    CHECK(rows[1][9] == "false");
    CHECK(rows[2][9] == "true");
  }
  SUBCASE("unknown preset") {
    CHECK(cli({"accuracy", "--configs", "Q", "--out", tmp / "bad"}).code == 1);
  }
}

TEST_CASE("sweep") {
  TempDir tmp("sweep");
  auto r = cli({"sweep", "--configs", "exact", "--trials", "20", "--out", tmp / "exact"});
  REQUIRE(r.code == 0);
  auto rows = read_csv(tmp.path / "exact" / "sweep.csv");
  CHECK(rows[0] == std::vector<std::string>{"config", "n", "density_pct", "trials", "mean_err_pct", "std_err_pct"});
  REQUIRE(rows.size() == 20);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][4] == "0");
    CHECK(rows[i][5] == "0");
  }
  CHECK(rows[1][2] == "1");
  CHECK(rows.back()[2] == "100");

  const std::vector<std::string> args{"sweep", "--configs", "A,K", "--densities", "1,5,50", "--trials", "40",
                                      "--seed", "7", "--out", tmp / "k"};
  REQUIRE(cli(args).code == 0);
  const auto first = slurp(tmp.path / "k" / "sweep.csv");
  auto again = args;
  again.push_back("--overwrite");
  REQUIRE(cli(again).code == 0);
  CHECK(slurp(tmp.path / "k" / "sweep.csv") == first);

  SUBCASE("rerun from the manifest reproduces the output") {
    fs::remove(tmp.path / "k" / "sweep.csv");
    REQUIRE(cli({"rerun", (tmp.path / "k" / "manifest.json").string()}).code == 0);
    CHECK(slurp(tmp.path / "k" / "sweep.csv") == first);
    const auto manifest = json::parse(slurp(tmp.path / "k" / "manifest.json"));
    CHECK(manifest["seeds"] == json::array({7}));
    CHECK(manifest["presets"] == json::array({"A", "K"}));
    CHECK(manifest["overwrite"] == true);
    CHECK(manifest["version"] == lutcount::cli::tool_version);
  }
  SUBCASE("existing output is not reused silently") {
    CHECK(cli(args).code == 1);
  }
}

TEST_CASE("resources") {
  TempDir tmp("resources");
  REQUIRE(cli({"resources", "--configs", "A,D,EXACT", "--out", tmp / "r"}).code == 0);
  const auto rows = read_csv(tmp.path / "r" / "resources.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == std::vector<std::string>{"A", "Or6", "171"});
  CHECK(rows[2] == std::vector<std::string>{"D", "Or6", "203"});
  CHECK(json::parse(slurp(tmp.path / "r" / "manifest.json"))["seeds"] == json::array({0}));
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code != 0);
  CHECK(cli({"accuracy", "--method", "guess"}).code == 2);
  CHECK(cli({"snn", "replay"}).code == 2);
}

TEST_CASE("snn commands") {
  TempDir tmp("snn");
  fs::create_directories(tmp.path);
  lutcount::snn::SnnConfig c;
  c.schedule = {600, 300, 100};
  c.chaos.after_ms = 300;
  c.chaos.horizon_ms = 290;
  const std::string config_path = tmp / "params.json";
  std::ofstream(config_path) << lutcount::snn::config_to_json(c).dump(2);

  auto r = cli({"snn", "run", "--compressor", "exact", "--config", config_path, "--out", tmp / "run"});
  REQUIRE(r.code == 0);
  auto metrics = json::parse(slurp(tmp.path / "run" / "metrics.json"));
  CHECK(metrics["failure_max_pct"] == 0.0);
  CHECK(metrics["failure_mean_pct"] == 0.0);
  CHECK(metrics["seed"] == 0);
  for (const char* f : {"spikes.csv", "voltage0.csv", "population.csv", "readout.csv", "manifest.json"}) {
    CHECK(fs::exists(tmp.path / "run" / f));
  }
  CHECK(read_csv(tmp.path / "run" / "readout.csv")[0] == std::vector<std::string>{"time_ms", "zhat", "target"});

  SUBCASE("replay orders the deep compressors") {
    REQUIRE(cli({"snn", "replay", "--from", tmp / "run", "--compressor", "216", "--out", tmp / "r216"}).code == 0);
    REQUIRE(cli({"snn", "replay", "--from", tmp / "run", "--compressor", "1024", "--out", tmp / "r1024"}).code == 0);
    const auto a = json::parse(slurp(tmp.path / "r216" / "replay.json"));
    const auto b = json::parse(slurp(tmp.path / "r1024" / "replay.json"));
    CHECK(b["failure_mean_pct"].get<double>() >= a["failure_mean_pct"].get<double>());
    CHECK(b["failure_mean_pct"].get<double>() > 0.0);
  }
  SUBCASE("seed override is echoed") {
    REQUIRE(cli({"snn", "run", "--config", config_path, "--seed", "5", "--compressor", "A", "--out", tmp / "s5"}).code == 0);
    metrics = json::parse(slurp(tmp.path / "s5" / "metrics.json"));
    CHECK(metrics["seed"] == 5);
    CHECK(metrics["config"]["network"]["compressor"] == "A");
  }
  SUBCASE("chaos writes both runs and a nonzero divergence") {
    REQUIRE(cli({"snn", "chaos", "--config", config_path, "--out", tmp / "chaos"}).code == 0);
    CHECK(fs::exists(tmp.path / "chaos" / "baseline" / "spikes.csv"));
    CHECK(fs::exists(tmp.path / "chaos" / "perturbed" / "spikes.csv"));
    const auto rows = read_csv(tmp.path / "chaos" / "divergence.csv");
    double max_dpop = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) max_dpop = std::max(max_dpop, std::stod(rows[i][2]));
    CHECK(max_dpop > 0);
  }
  SUBCASE("missing parameter keys are listed") {
    auto j = lutcount::snn::config_to_json(c);
    j["neuron"].erase("dt");
    j["learning"].erase("p0");
    std::ofstream(tmp / "partial.json") << j.dump();
    r = cli({"snn", "run", "--config", tmp / "partial.json", "--out", tmp / "partial"});
    CHECK(r.code == 1);
    CHECK(r.err.find("neuron.dt") != std::string::npos);
    CHECK(r.err.find("learning.p0") != std::string::npos);
  }
}
