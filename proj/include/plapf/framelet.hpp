#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "plapf/filters.hpp"
#include "plapf/graph.hpp"

namespace plapf {

enum class TransformMode { Exact, Chebyshev };

TransformMode transform_mode_from_string(const std::string& s);
std::string to_string(TransformMode mode);

struct BlockIndex {
  int k = 0;      // 0 = low pass, 1..K = high pass
  int level = 0;  // scale level
};

/// Multi-scale tight-frame transform on a graph.
///
/// Blocks are ordered (0, L), then (k, l) for l = 0..L with k = 1..K inner,
/// giving 1 + K(L+1) operators. The coarsest scale m is the smallest integer
/// with s^-m * lambda_max <= pi, so every filter argument stays in [0, pi].
///
/// Exact mode materializes the spectral filters through a dense
/// eigendecomposition; Chebyshev mode applies fitted polynomials of the
/// normalized Laplacian factor by factor and never forms dense matrices.
class FrameletSystem {
 public:
  const FilterBank& bank() const { return bank_; }
  int levels() const { return levels_; }
  double dilation() const { return dilation_; }
  int coarsest_scale() const { return coarsest_; }
  double lambda_max() const { return lambda_max_; }
  TransformMode mode() const { return mode_; }
  int chebyshev_degree() const { return degree_; }
  bool directed() const { return directed_; }

  int n_nodes() const { return n_; }
  int n_blocks() const { return static_cast<int>(blocks_.size()); }
  BlockIndex block_index(int b) const { return blocks_[b]; }

  /// W_b X.
  Eigen::MatrixXd apply(int b, const Eigen::MatrixXd& X) const;
  /// W_b^T X.
  Eigen::MatrixXd apply_adjoint(int b, const Eigen::MatrixXd& X) const;
  /// Materialized W_b (exact mode only).
  Eigen::MatrixXd dense_operator(int b) const;

  /// Identity for provenance checks on coefficients.
  std::uint64_t id() const { return id_; }

  friend FrameletSystem build_system(const Graph& g, FilterBank bank, int L,
                                     double s, TransformMode mode, int degree,
                                     int dense_cap);

 private:
  FrameletSystem(FilterBank bank, int L, double s)
      : bank_(std::move(bank)), levels_(L), dilation_(s) {}

  Eigen::MatrixXd apply_impl(int b, const Eigen::MatrixXd& X, bool adjoint) const;

  FilterBank bank_;
  int levels_ = 0;
  double dilation_ = 2.0;
  int coarsest_ = 0;
  double lambda_max_ = 0.0;
  TransformMode mode_ = TransformMode::Chebyshev;
  int degree_ = 3;
  int n_ = 0;
  bool directed_ = false;
  std::uint64_t id_ = 0;
  std::vector<BlockIndex> blocks_;
  // factor lists in application order: (bank function index, scale offset j)
  std::vector<std::vector<std::pair<int, int>>> factors_;
  // exact mode
  Eigen::MatrixXd eigvecs_;
  Eigen::VectorXd eigvals_;
  std::vector<Eigen::VectorXd> spectral_filters_;
  // chebyshev mode
  NormalizedLaplacian laplacian_;
  std::vector<ChebyshevApprox> approx_;
};

/// Largest eigenvalue of the normalized Laplacian by power iteration
/// (undirected graphs; relative tolerance on the Rayleigh quotient).
double estimate_lambda_max(const NormalizedLaplacian& lap,
                           double rel_tol = 1e-6, int max_iters = 10000);

FrameletSystem build_system(const Graph& g, FilterBank bank, int L, double s,
                            TransformMode mode, int degree = 3,
                            int dense_cap = 3000);

struct FrameletCoefficients {
  std::vector<Eigen::MatrixXd> blocks;
  std::uint64_t system_id = 0;
};

FrameletCoefficients decompose(const FrameletSystem& sys, const Eigen::MatrixXd& X);
Eigen::MatrixXd reconstruct(const FrameletSystem& sys, const FrameletCoefficients& coeffs);

/// W^T diag(theta) W X with one per-node diagonal per block.
Eigen::MatrixXd framelet_conv(const FrameletSystem& sys,
                              const std::vector<Eigen::VectorXd>& theta,
                              const Eigen::MatrixXd& X);

/// CSV matrices plus a JSON manifest recording the system parameters and
/// block order.
void save_coefficients(const FrameletSystem& sys, const FrameletCoefficients& coeffs,
                       const std::filesystem::path& dir);
FrameletCoefficients load_coefficients(const std::filesystem::path& dir);

}  // namespace plapf
