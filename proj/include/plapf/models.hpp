#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plapf/framelet.hpp"
#include "plapf/graph.hpp"
#include "plapf/plap.hpp"

namespace plapf {

enum class ModelVariant { PlUfg, PlUfgPerBand, PlFufg };

ModelVariant model_variant_from_string(const std::string& s);
std::string to_string(ModelVariant v);

struct ModelConfig {
  ModelVariant variant = ModelVariant::PlUfg;
  const FrameletSystem* system = nullptr;  // non-owning
  std::vector<Eigen::VectorXd> theta;      // one diagonal per block
  PenaltySpec penalty;
  SolverConfig solver;
  /// Optional per-block overrides for the band-wise variants; empty means
  /// the shared solver config applies to every block.
  std::vector<SolverConfig> band_solver;
};

std::vector<Eigen::VectorXd> uniform_theta(const FrameletSystem& sys, double gain = 1.0);
std::vector<Eigen::VectorXd> scalar_theta(const FrameletSystem& sys,
                                          const std::vector<double>& gains);

struct ModelOutput {
  Eigen::MatrixXd F;
  std::vector<SolverTrace> traces;  // one per solve (one, or one per block)
};

/// Smooth the framelet-filtered reconstruction:
/// Y = W^T diag(theta) W X, then F = argmin S(F) + mu ||F - Y||^2.
ModelOutput forward_pl_ufg(const ModelConfig& cfg, const Graph& g,
                           const Eigen::MatrixXd& X);

/// Smooth each band's reconstruction separately and sum:
/// Y_b = W_b^T diag(theta_b) W_b X, F = sum_b solve(Y_b).
ModelOutput forward_pl_ufg_per_band(const ModelConfig& cfg, const Graph& g,
                                    const Eigen::MatrixXd& X);

/// Smooth coefficient blocks before reconstruction:
/// F_b = solve(diag(theta_b) W_b X), F = sum_b W_b^T F_b.
ModelOutput forward_pl_fufg(const ModelConfig& cfg, const Graph& g,
                            const Eigen::MatrixXd& X);

ModelOutput forward(const ModelConfig& cfg, const Graph& g, const Eigen::MatrixXd& X);

struct HeadMetrics {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Multinomial logistic head on model output features, plus the per-block
/// scalar gains selected by validation accuracy.
struct TrainedHead {
  std::vector<double> gains;
  Eigen::MatrixXd weights;  // n_features x n_classes
  Eigen::VectorXd bias;     // n_classes
  HeadMetrics metrics;
};

/// Coordinate search over per-block scalar gains (grid {0, 0.5, 1, 2}),
/// each candidate scored by a zero-initialized logistic head trained with
/// full-batch gradient descent. Deterministic given the seed.
TrainedHead fit_theta_and_head(const ModelConfig& cfg, const Dataset& ds,
                               int epochs, double lr, std::uint64_t seed);

/// Weight matrix and bias as CSV plus a JSON manifest.
void save_head(const TrainedHead& head, const std::filesystem::path& dir);

}  // namespace plapf
