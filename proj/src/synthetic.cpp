#include "plapf/synthetic.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace plapf {

Graph path_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return Graph(n, std::move(edges), false);
}

Graph cycle_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  if (n > 2) edges.push_back({n - 1, 0, 1.0});
  return Graph(n, std::move(edges), false);
}

Graph triangle_graph() { return complete_graph(3); }

Graph complete_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({i, j, 1.0});
  return Graph(n, std::move(edges), false);
}

Graph erdos_renyi(int n, double edge_prob, std::uint64_t seed, bool random_weights) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(0.5, 1.5);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (unif(rng) < edge_prob)
        edges.push_back({i, j, random_weights ? wdist(rng) : 1.0});
  return Graph(n, std::move(edges), false);
}

Graph two_cliques(int clique_size) {
  std::vector<Edge> edges;
  for (int block = 0; block < 2; ++block) {
    int base = block * clique_size;
    for (int i = 0; i < clique_size; ++i)
      for (int j = i + 1; j < clique_size; ++j)
        edges.push_back({base + i, base + j, 1.0});
  }
  return Graph(2 * clique_size, std::move(edges), false);
}

LabeledGraph sbm_two_block(int n, double intra_prob, double inter_prob,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int half = n / 2;
  Eigen::VectorXi labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i < half ? 0 : 1;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double prob = labels[i] == labels[j] ? intra_prob : inter_prob;
      if (unif(rng) < prob) edges.push_back({i, j, 1.0});
    }
  return {Graph(n, std::move(edges), false), std::move(labels)};
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  Eigen::MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

Eigen::VectorXd smooth_signal(const Graph& g, int component) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(NormalizedLaplacian(g).dense());
  Eigen::VectorXd v = eig.eigenvectors().col(component);
  double rms = std::sqrt(v.squaredNorm() / v.size());
  return v / rms;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(base ^ mix(stream)) + index);
}

}  // namespace plapf
