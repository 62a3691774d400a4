#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "plapf/plap.hpp"
#include "plapf/report.hpp"

namespace plapf {

struct DatasetParams {
  std::string path;
  bool directed = false;
  bool symmetrize = false;
  std::array<double, 3> split_ratios{0.2, 0.1, 0.7};
};

struct FrameletParams {
  std::string bank = "linear";  // builtin name or path to a custom JSON spec
  nlohmann::json custom;        // inline custom spec (overrides `bank`)
  int level = 1;
  double dilation = 2.0;
  std::string mode = "chebyshev";  // "chebyshev" | "exact"
  int degree = 3;
  int dense_cap = 3000;
};

struct PenaltyParams {
  std::string kind = "power";  // "power" | "reg_tv"
  double p = 2.0;
  double epsilon = 0.1;
};

/// Hyperparameter lists; empty lists fall back to the scalar settings.
struct GridSpec {
  std::vector<double> p;
  std::vector<double> mu;
  std::vector<double> s;
  std::vector<int> degree;
  std::vector<int> iterations;
  std::vector<double> sigma;  // denoise noise levels
  std::vector<double> lr;     // head learning rates
};

struct ExperimentConfig {
  std::string task;  // verify | denoise | classify | stats
  DatasetParams dataset;
  FrameletParams framelet;
  PenaltyParams penalty;
  SolverConfig solver;
  GridSpec grids;
  std::vector<std::string> variants{"pl_ufg", "pl_ufg_per_band", "pl_fufg"};
  std::vector<std::string> routes{"spreading", "head"};
  std::vector<double> theta_gains;  // optional per-block gains, default all 1
  int epochs = 200;
  int repeats = 1;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir = "out";
  int verify_graphs = 20;
};

/// Strict parse: unknown keys are configuration errors.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Filter identity, tight frame, Chebyshev round trip and the p = 2 solver
/// oracle; any failed check clears report.passed.
RunReport cmd_verify(const ExperimentConfig& cfg);
/// Seeded Gaussian noise on the features, every model variant against the
/// noisy-input baseline, MSE to the clean features per noise level.
RunReport cmd_denoise(const ExperimentConfig& cfg);
/// Label spreading and model-features-plus-linear-head over the config grids.
RunReport cmd_classify(const ExperimentConfig& cfg);
/// Node/edge/class/feature counts and the homophily level.
RunReport cmd_stats(const ExperimentConfig& cfg);

RunReport run_task(const ExperimentConfig& cfg);

}  // namespace plapf
