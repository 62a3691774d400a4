#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "plapf/graph.hpp"

namespace plapf {

enum class PenaltyKind { Power, RegTV };

/// Penalty phi applied to per-node gradient norms.
///
/// Power: phi(xi) = xi^p with p > 1 (the p = 1 energy is non-smooth; use
/// RegTV instead). RegTV: phi(xi) = sqrt(xi^2 + eps^2) - eps, the smooth
/// total-variation surrogate, paired with norm exponent p = 1 by default.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Power;
  double p = 2.0;        // gradient-norm exponent
  double epsilon = 0.1;  // RegTV smoothing width

  static PenaltySpec power(double p);
  static PenaltySpec reg_tv(double epsilon, double p = 1.0);

  double phi(double xi) const;
  double phi_prime(double xi) const;
  void validate() const;
};

struct SolverConfig {
  double mu = 1.0;
  int iterations = 5;  // counted steps after warm-up
  int warmup = 10;
  double tol = 1e-6;
  double grad_floor = 1e-8;

  void validate() const;
};

struct SolverTrace {
  std::vector<double> objective;  // objective after each completed step
  std::vector<double> delta;      // ||F_{t+1} - F_t||_F per step
  int warmup = 0;                 // leading entries that are warm-up steps
  bool converged = false;         // final weighted delta below tol
};

/// Delta_ij = sqrt(w_ij / d_j) f_j - sqrt(w_ij / d_i) f_i (rows of F as
/// column vectors). Antisymmetric under i <-> j for symmetric weights.
Eigen::VectorXd edge_difference(const Graph& g, const DegreeVector& d,
                                const Eigen::MatrixXd& F, int i, int j);

/// p-norm of (||Delta_ij||_2)_j over i's out-neighbors; 0 for isolated nodes.
double node_gradient_norm(const Graph& g, const DegreeVector& d,
                          const Eigen::MatrixXd& F, int i, double p);

/// S(F) = 1/2 sum_i phi(||grad F(v_i)||_p).
double regularizer(const Graph& g, const DegreeVector& d,
                   const Eigen::MatrixXd& F, const PenaltySpec& penalty);

/// S(F) + mu ||F - Y||_F^2.
double objective(const Graph& g, const DegreeVector& d, const Eigen::MatrixXd& F,
                 const Eigen::MatrixXd& Y, const PenaltySpec& penalty, double mu);

struct MessageMatrices {
  Eigen::SparseMatrix<double> M;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
};

/// M_ij = w_ij/2 [phi'(g_i)/g_i^{p-1} + phi'(g_j)/g_j^{p-1}] ||Delta_ij||^{p-2}
/// with g_i the node gradient norms; alpha_i = 1/(sum_j M_ij/d_i + 2 mu),
/// beta_i = 2 mu alpha_i. Gradient and edge norms are floored at grad_floor
/// before any negative power, so degenerate inputs stay finite.
MessageMatrices message_matrices(const Graph& g, const DegreeVector& d,
                                 const Eigen::MatrixXd& F, const PenaltySpec& penalty,
                                 double mu, double grad_floor = 1e-8);

struct SolveResult {
  Eigen::MatrixXd F;
  SolverTrace trace;
};

/// Fixed-point iteration F <- alpha D^{-1/2} M D^{-1/2} F + beta Y starting
/// from F = Y, recomputing M, alpha, beta from the current iterate each step.
/// Always runs warmup + iterations steps; convergence is reported, not used
/// to stop early.
SolveResult solve(const Graph& g, const DegreeVector& d, const Eigen::MatrixXd& Y,
                  const PenaltySpec& penalty, const SolverConfig& cfg);

/// Dense oracle for the p = 2 power penalty: F = mu (mu I + L)^{-1} Y.
Eigen::MatrixXd closed_form_p2(const Graph& g, const DegreeVector& d,
                               const Eigen::MatrixXd& Y, double mu,
                               int dense_cap = 3000);

/// Columns: iteration, objective, delta (with a warm-up marker).
void save_trace_csv(const SolverTrace& trace, const std::filesystem::path& file);

}  // namespace plapf
