#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lutcount/snn.hpp"

namespace lutcount::snn {

/// Bad or incomplete parameter file. `missing` lists absent keys as dotted paths.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::vector<std::string> missing = {})
      : std::runtime_error(what), missing(std::move(missing)) {}
  std::vector<std::string> missing;
};

nlohmann::json config_to_json(const SnnConfig& config);

/// Every key must be present and no unknown key is accepted.
SnnConfig config_from_json(const nlohmann::json& j);

SnnConfig load_config(const std::filesystem::path& path);

/// Writes spikes.csv, voltage0.csv, population.csv, readout.csv and metrics.json into `dir`.
void write_run(const std::filesystem::path& dir, const SnnConfig& config, const SnnResult& result);

nlohmann::json metrics_json(const SnnConfig& config, const SnnResult& result);

/// Reads a spikes.csv written by write_run; times are mapped back to steps of `dt_ms`.
std::vector<SpikeRecord> read_spikes_csv(const std::filesystem::path& path, double dt_ms);

/// Writes chaos traces: baseline/ and perturbed/ run directories plus divergence.csv and chaos.json.
void write_chaos(const std::filesystem::path& dir, const SnnConfig& config, const ChaosReport& report);

}  // namespace lutcount::snn
