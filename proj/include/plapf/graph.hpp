#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "plapf/errors.hpp"

namespace plapf {

/// Row sums of the weight matrix; out-degrees for directed graphs.
using DegreeVector = Eigen::VectorXd;

struct Edge {
  int src = 0;
  int dst = 0;
  double weight = 1.0;
};

struct Neighbor {
  int node = 0;
  double weight = 0.0;
};

/// Weighted graph, immutable after construction.
///
/// Undirected graphs store each edge once and expose it symmetrically
/// through the adjacency view. At most one edge per (ordered, or unordered
/// when undirected) node pair; all weights must be nonnegative.
class Graph {
 public:
  Graph(int n_nodes, std::vector<Edge> edges, bool directed);

  int n_nodes() const { return n_; }
  bool directed() const { return directed_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const DegreeVector& degrees() const { return degrees_; }
  /// d_i^{-1/2}, with 0 substituted for isolated nodes.
  const Eigen::VectorXd& inv_sqrt_degrees() const { return inv_sqrt_deg_; }

  /// Out-neighbors of node i (all neighbors when undirected).
  std::span<const Neighbor> out_neighbors(int i) const;

  /// n x n weight matrix; symmetric iff the graph is undirected.
  Eigen::SparseMatrix<double> weight_matrix() const;

  /// Undirected copy with w'_ij = w'_ji = (w_ij + w_ji) / 2.
  Graph symmetrized() const;

 private:
  int n_ = 0;
  bool directed_ = false;
  std::vector<Edge> edges_;
  std::vector<int> adj_offsets_;
  std::vector<Neighbor> adj_;
  DegreeVector degrees_;
  Eigen::VectorXd inv_sqrt_deg_;
};

/// Matrix-free application of the normalized Laplacian.
///
/// Rows/columns of isolated nodes are identically zero (including the
/// diagonal), so a graph with no edges maps to the zero operator.
class NormalizedLaplacian {
 public:
  NormalizedLaplacian() = default;  // empty operator
  explicit NormalizedLaplacian(const Graph& g);

  int size() const { return n_; }
  bool symmetric() const { return symmetric_; }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd dense() const;

  /// D^{-1/2} W D^{-1/2}.
  const Eigen::SparseMatrix<double>& normalized_adjacency() const { return adj_; }

 private:
  int n_ = 0;
  bool symmetric_ = true;
  Eigen::SparseMatrix<double> adj_;
  Eigen::SparseMatrix<double> adj_t_;
  Eigen::VectorXd diag_mask_;  // 1 where d_i > 0, else 0
};

NormalizedLaplacian normalized_laplacian(const Graph& g);

/// Mean over nodes with at least one out-neighbor of the fraction of
/// neighbors sharing the node's label. NaN when no node has neighbors.
double homophily(const Graph& g, const Eigen::VectorXi& labels);

struct Dataset {
  Graph graph;
  Eigen::MatrixXd features;
  Eigen::VectorXi labels;
  std::vector<std::uint8_t> train_mask;  // empty or length n_nodes
  std::vector<std::uint8_t> val_mask;
  std::vector<std::uint8_t> test_mask;

  int n_classes() const;
  bool has_masks() const { return !train_mask.empty(); }
  void validate() const;
};

/// Loads a dataset directory: edges.csv, features.csv, labels.csv and an
/// optional splits.json. The format does not encode directedness, so the
/// caller states it.
Dataset load_dataset(const std::filesystem::path& dir, bool directed = false);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Per-class stratified split. Per class: train = floor(r_train * n_c),
/// train+val = floor((r_train + r_val) * n_c), remainder to test.
Dataset random_split(const Dataset& ds, std::array<double, 3> ratios,
                     std::uint64_t seed);

}  // namespace plapf
