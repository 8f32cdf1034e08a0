#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wws/mpc.hpp"
#include "wws/plant.hpp"
#include "wws/predictor.hpp"

namespace wws::exp {

struct FitSettings {
  DatasetConfig data;
  /// Emit the local-linearisation baseline instead of the EDMD predictor.
  bool local = false;
  double target_y = 40.0;
  /// Linearise at the equilibrium for this input instead of solving for target_y.
  std::optional<double> u_star;
};

struct SweepSettings {
  std::vector<double> initial_temps{5, 10, 15, 20, 25, 30, 35};
  std::vector<double> start_times{240, 300, 360, 420, 480, 540};
};

struct BenchSettings {
  std::size_t samples = 20;
  int steps = 10;
  double state_lo = 10.0;
  double state_hi = 40.0;
  /// Also roll out the local-linearisation baseline for comparison.
  bool compare_local = true;
};

/// Everything a subcommand needs. Units: seconds, kW, degC.
struct ExperimentConfig {
  std::optional<std::filesystem::path> plant_path;
  std::optional<std::filesystem::path> predictor_path;
  std::optional<std::filesystem::path> spec_path;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  /// Uniform initial temperature of the closed loop.
  double x0 = 15.0;
  /// Start of the window reported as min/max y in the run summary.
  double summary_from = 420.0;
  bool svg = false;
  std::optional<std::filesystem::path> dump_lp;
  FitSettings fit;
  ControllerConfig controller;
  SweepSettings sweep;
  BenchSettings bench;
  IntegratorOptions integrator;

  nlohmann::json to_json() const;
  /// Keys absent from `doc` keep the defaults. Throws ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  /// Referenced files exist and values lie in their declared ranges.
  void validate() const;
};

/// Applies `WWS_<PATH>=<value>` overrides. PATH segments are separated by "__" and
/// matched case-insensitively against existing keys; values are parsed as JSON when
/// possible and taken as strings otherwise. WWS_SEED=3 sets "seed",
/// WWS_CONTROLLER__NP=12 sets controller.Np.
nlohmann::json apply_env_overrides(nlohmann::json doc, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> environment();

/// Defaults, merged with the optional JSON file, then environment overrides.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::map<std::string, std::string>& env);

PlantModel load_plant(const ExperimentConfig& cfg);

struct FitOutput {
  LinearPredictor predictor;
  nlohmann::json report;
};
FitOutput fit_predictor(const ExperimentConfig& cfg, const PlantModel& plant);
/// Loads predictor_path when set, otherwise fits.
LinearPredictor obtain_predictor(const ExperimentConfig& cfg, const PlantModel& plant);

enum ExitCode : int { kSuccess = 0, kFailure = 1, kInfeasible = 2 };

/// Subcommands. Each writes into cfg.out_dir and returns an exit code; errors propagate as exceptions.
/// Wall-clock timings go to timing.json so every other file is reproducible byte for byte.
int cmd_fit(const ExperimentConfig& cfg, std::ostream& log);
int cmd_run(const ExperimentConfig& cfg, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);
int cmd_bench(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace wws::exp
