#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "plapf/graph.hpp"

namespace plapf {

Graph path_graph(int n);
Graph cycle_graph(int n);
Graph triangle_graph();
Graph complete_graph(int n);

/// G(n, p) with unit weights, or weights uniform in [0.5, 1.5].
Graph erdos_renyi(int n, double edge_prob, std::uint64_t seed,
                  bool random_weights = false);

/// Two disjoint complete graphs of the given size.
Graph two_cliques(int clique_size);

struct LabeledGraph {
  Graph graph;
  Eigen::VectorXi labels;
};

/// Two-block stochastic block model; nodes 0..n/2-1 get label 0.
LabeledGraph sbm_two_block(int n, double intra_prob, double inter_prob,
                           std::uint64_t seed);

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed,
                                double stddev = 1.0);

/// Eigenvector of the normalized Laplacian at the given position in the
/// ascending spectrum, scaled to unit mean square. A smooth test signal.
Eigen::VectorXd smooth_signal(const Graph& g, int component = 1);

/// Deterministic stream/index seed derivation (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                          std::uint64_t index);

}  // namespace plapf
