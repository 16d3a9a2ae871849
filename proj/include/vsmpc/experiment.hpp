#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsmpc/simulator.hpp"

namespace vsmpc {

/// Parse or validation failure; path is the JSON key path, e.g. "scenario.wind.mode".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& msg)
      : std::runtime_error(path.empty() ? msg : path + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WindSettings {
  bess::WindMode mode = bess::WindMode::perfect;
  double noise_sigma_mw = 40.0;
  std::string trace_file;  // replay mode, relative to the experiment file
};

struct SolverSettings {
  double tol_feas = 1e-6;
  double tol_stat = 1e-5;
  int max_outer = 50;
  int max_inner = 200;
};

/// Every ScenarioConfig field by name, in documented units.
struct ScenarioSettings {
  double capacity_mwh = 400.0;
  double nameplate_mw = 400.0;
  double soc_min = 0.3;
  double soc_max = 0.9;
  double x0 = 0.4;
  bess::Prices prices;
  int horizon_steps = 10;
  double horizon_hours = 1.0;
  double alpha_lo = 1.0;
  double alpha_hi = 4.0;
  double dt_mpc_hours = 0.1;
  double dt_sim_hours = 0.1;
  double sim_hours = 24.0;
  Strategy strategy = Strategy::vsmpc;
  std::uint64_t seed = 1;
  WindSettings wind;
  SolverSettings solver;
};

/**
 * Experiment document. Empty sweep lists fall back to the scenario's single
 * value, so a file without a sweep block describes one run. The sweep is the
 * product capacities x strategies x seeds; every strategy sees the same wind
 * realization for a given seed.
 */
struct ExperimentFile {
  ScenarioSettings scenario;
  std::vector<double> capacities_mwh;
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
};

/// Strict JSON parse: unknown keys and type mismatches raise ConfigError.
/// Missing keys keep their defaults.
ExperimentFile parse_experiment(const std::string& text);

/// Complete JSON document with every key spelled out.
std::string echo_experiment(const ExperimentFile& exp);

/// Loads an experiment or a run manifest (which embeds one). Throws IoError
/// when the file cannot be read.
ExperimentFile load_experiment(const std::filesystem::path& path);

struct SweepCell {
  double capacity_mwh;
  Strategy strategy;
  std::uint64_t seed;
};

std::vector<SweepCell> sweep_cells(const ExperimentFile& exp);

/// Scenario for one sweep cell; replay traces resolve against base_dir.
ScenarioConfig make_scenario(const ExperimentFile& exp, const SweepCell& cell,
                             const std::filesystem::path& base_dir);

/// Output file name of a cell's SimLog.
std::string simlog_name(const SweepCell& cell);

}  // namespace vsmpc
