#include "plapf/plap.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Cholesky>

namespace plapf {

PenaltySpec PenaltySpec::power(double p) {
  PenaltySpec spec{PenaltyKind::Power, p, 0.1};
  spec.validate();
  return spec;
}

PenaltySpec PenaltySpec::reg_tv(double epsilon, double p) {
  PenaltySpec spec{PenaltyKind::RegTV, p, epsilon};
  spec.validate();
  return spec;
}

double PenaltySpec::phi(double xi) const {
  if (kind == PenaltyKind::Power) return std::pow(xi, p);
  return std::sqrt(xi * xi + epsilon * epsilon) - epsilon;
}

double PenaltySpec::phi_prime(double xi) const {
  if (kind == PenaltyKind::Power) return p * std::pow(xi, p - 1.0);
  return xi / std::sqrt(xi * xi + epsilon * epsilon);
}

void PenaltySpec::validate() const {
  if (!std::isfinite(p) || p < 1.0)
    throw ConfigError("norm exponent p must be >= 1");
  if (kind == PenaltyKind::Power && p <= 1.0)
    throw ConfigError("power penalty requires p > 1; use reg_tv for p = 1");
  if (kind == PenaltyKind::RegTV && !(epsilon > 0.0 && std::isfinite(epsilon)))
    throw ConfigError("reg_tv requires epsilon > 0");
}

void SolverConfig::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be positive");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (warmup < 0) throw ConfigError("warmup must be >= 0");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(grad_floor > 0.0)) throw ConfigError("grad_floor must be positive");
}

Eigen::VectorXd edge_difference(const Graph& g, const DegreeVector& d,
                                const Eigen::MatrixXd& F, int i, int j) {
  if (i < 0 || i >= g.n_nodes() || j < 0 || j >= g.n_nodes())
    throw ShapeError("node index out of range");
  double w = -1.0;
  for (const Neighbor& nb : g.out_neighbors(i)) {
    if (nb.node == j) {
      w = nb.weight;
      break;
    }
  }
  if (w < 0.0)
    throw Error("(" + std::to_string(i) + ", " + std::to_string(j) + ") is not an edge");
  if (!(d[i] > 0.0) || !(d[j] > 0.0))
    throw DegenerateDegreeError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") touches a zero-degree node");
  return std::sqrt(w / d[j]) * F.row(j).transpose() -
         std::sqrt(w / d[i]) * F.row(i).transpose();
}

namespace {

/// Per-node gradient norms and, aligned with the out-adjacency order,
/// per-edge ||Delta_ij||_2. Zero-weight edges contribute zero; the scaling
/// uses the 0-for-isolated convention of inv_sqrt_degrees.
struct GradientData {
  Eigen::VectorXd node_norm;             // p-norm per node
  std::vector<std::vector<double>> edge; // edge norms per node, adjacency order
};

GradientData gradient_data(const Graph& g, const Eigen::MatrixXd& F, double p) {
  const Eigen::VectorXd& isd = g.inv_sqrt_degrees();
  GradientData out;
  out.node_norm.resize(g.n_nodes());
  out.edge.resize(g.n_nodes());
  for (int i = 0; i < g.n_nodes(); ++i) {
    auto nbs = g.out_neighbors(i);
    auto& edge_norms = out.edge[i];
    edge_norms.reserve(nbs.size());
    double acc = 0.0;
    for (const Neighbor& nb : nbs) {
      double norm = 0.0;
      if (nb.weight > 0.0) {
        norm = std::sqrt(nb.weight) *
               (isd[nb.node] * F.row(nb.node) - isd[i] * F.row(i)).norm();
      }
      edge_norms.push_back(norm);
      acc += std::pow(norm, p);
    }
    out.node_norm[i] = nbs.empty() ? 0.0 : std::pow(acc, 1.0 / p);
  }
  return out;
}

double regularizer_from(const GradientData& grad, const PenaltySpec& penalty) {
  double acc = 0.0;
  for (int i = 0; i < grad.node_norm.size(); ++i) acc += penalty.phi(grad.node_norm[i]);
  return 0.5 * acc;
}

Eigen::VectorXd phi_ratios(const GradientData& grad, const PenaltySpec& penalty,
                           double grad_floor) {
  Eigen::VectorXd ratio(grad.node_norm.size());
  for (int i = 0; i < ratio.size(); ++i) {
    double gnorm = std::max(grad.node_norm[i], grad_floor);
    ratio[i] = penalty.phi_prime(gnorm) / std::pow(gnorm, penalty.p - 1.0);
  }
  return ratio;
}

}  // namespace

double node_gradient_norm(const Graph& g, const DegreeVector& d,
                          const Eigen::MatrixXd& F, int i, double p) {
  if (p < 1.0) throw ConfigError("gradient norm exponent must be >= 1");
  if (i < 0 || i >= g.n_nodes()) throw ShapeError("node index out of range");
  (void)d;  // degrees enter through the graph's cached scaling
  const Eigen::VectorXd& isd = g.inv_sqrt_degrees();
  double acc = 0.0;
  auto nbs = g.out_neighbors(i);
  if (nbs.empty()) return 0.0;
  for (const Neighbor& nb : nbs) {
    if (nb.weight <= 0.0) continue;
    double norm = std::sqrt(nb.weight) *
                  (isd[nb.node] * F.row(nb.node) - isd[i] * F.row(i)).norm();
    acc += std::pow(norm, p);
  }
  return std::pow(acc, 1.0 / p);
}

double regularizer(const Graph& g, const DegreeVector& d, const Eigen::MatrixXd& F,
                   const PenaltySpec& penalty) {
  (void)d;
  if (F.rows() != g.n_nodes()) throw ShapeError("signal rows do not match node count");
  return regularizer_from(gradient_data(g, F, penalty.p), penalty);
}

double objective(const Graph& g, const DegreeVector& d, const Eigen::MatrixXd& F,
                 const Eigen::MatrixXd& Y, const PenaltySpec& penalty, double mu) {
  if (F.rows() != Y.rows() || F.cols() != Y.cols())
    throw ShapeError("F and Y must have identical shapes");
  return regularizer(g, d, F, penalty) + mu * (F - Y).squaredNorm();
}

MessageMatrices message_matrices(const Graph& g, const DegreeVector& d,
                                 const Eigen::MatrixXd& F, const PenaltySpec& penalty,
                                 double mu, double grad_floor) {
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (F.rows() != g.n_nodes()) throw ShapeError("signal rows do not match node count");

  GradientData grad = gradient_data(g, F, penalty.p);
  Eigen::VectorXd ratio = phi_ratios(grad, penalty, grad_floor);

  const int n = g.n_nodes();
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    auto nbs = g.out_neighbors(i);
    for (std::size_t e = 0; e < nbs.size(); ++e) {
      const Neighbor& nb = nbs[e];
      double delta = std::max(grad.edge[i][e], grad_floor);
      double m = 0.5 * nb.weight * (ratio[i] + ratio[nb.node]) *
                 std::pow(delta, penalty.p - 2.0);
      triplets.emplace_back(i, nb.node, m);
      if (d[i] > 0.0) rowsum[i] += m / d[i];
    }
  }

  MessageMatrices out;
  out.M.resize(n, n);
  out.M.setFromTriplets(triplets.begin(), triplets.end());
  out.alpha = (rowsum.array() + 2.0 * mu).inverse();
  out.beta = 2.0 * mu * out.alpha;
  return out;
}

SolveResult solve(const Graph& g, const DegreeVector& d, const Eigen::MatrixXd& Y,
                  const PenaltySpec& penalty, const SolverConfig& cfg) {
  penalty.validate();
  cfg.validate();
  if (Y.rows() != g.n_nodes()) throw ShapeError("Y rows do not match node count");

  const int n = g.n_nodes();
  const Eigen::VectorXd& isd = g.inv_sqrt_degrees();
  const int steps = cfg.warmup + cfg.iterations;

  SolveResult result;
  result.F = Y;
  result.trace.warmup = cfg.warmup;
  result.trace.objective.reserve(steps);
  result.trace.delta.reserve(steps);

  GradientData grad = gradient_data(g, result.F, penalty.p);
  Eigen::MatrixXd next(n, Y.cols());
  double last_weighted_delta = std::numeric_limits<double>::infinity();

  for (int t = 0; t < steps; ++t) {
    Eigen::VectorXd ratio = phi_ratios(grad, penalty, cfg.grad_floor);

    // next = alpha D^{-1/2} M D^{-1/2} F + beta Y, assembled row by row.
    for (int i = 0; i < n; ++i) {
      auto nbs = g.out_neighbors(i);
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(Y.cols());
      double rowsum = 0.0;
      for (std::size_t e = 0; e < nbs.size(); ++e) {
        const Neighbor& nb = nbs[e];
        double delta = std::max(grad.edge[i][e], cfg.grad_floor);
        double m = 0.5 * nb.weight * (ratio[i] + ratio[nb.node]) *
                   std::pow(delta, penalty.p - 2.0);
        if (d[i] > 0.0) rowsum += m / d[i];
        acc += m * isd[i] * isd[nb.node] * result.F.row(nb.node);
      }
      double alpha = 1.0 / (rowsum + 2.0 * cfg.mu);
      double beta = 2.0 * cfg.mu * alpha;
      next.row(i) = alpha * acc + beta * Y.row(i);
    }

    if (!next.allFinite())
      throw DivergenceError("solver diverged at iteration " + std::to_string(t));

    double delta = (next - result.F).norm();
    last_weighted_delta = delta / std::max(1.0, result.F.norm());
    result.F.swap(next);

    grad = gradient_data(g, result.F, penalty.p);
    result.trace.objective.push_back(regularizer_from(grad, penalty) +
                                     cfg.mu * (result.F - Y).squaredNorm());
    result.trace.delta.push_back(delta);
  }

  result.trace.converged = last_weighted_delta < cfg.tol;
  return result;
}

Eigen::MatrixXd closed_form_p2(const Graph& g, const DegreeVector& d,
                               const Eigen::MatrixXd& Y, double mu, int dense_cap) {
  (void)d;
  if (g.directed()) throw ConfigError("closed_form_p2 requires an undirected graph");
  if (g.n_nodes() > dense_cap)
    throw ConfigError("closed_form_p2 limited to " + std::to_string(dense_cap) + " nodes");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (Y.rows() != g.n_nodes()) throw ShapeError("Y rows do not match node count");

  Eigen::MatrixXd A = NormalizedLaplacian(g).dense();
  A.diagonal().array() += mu;
  Eigen::LDLT<Eigen::MatrixXd> fact(A);
  if (fact.info() != Eigen::Success || !fact.isPositive())
    throw SolveError("mu I + L is numerically singular");
  return fact.solve(mu * Y);
}

void save_trace_csv(const SolverTrace& trace, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(file.string() + ": cannot open for writing");
  out << "iteration,phase,objective,delta\n";
  char buf[64];
  for (std::size_t t = 0; t < trace.objective.size(); ++t) {
    out << t << ',' << (static_cast<int>(t) < trace.warmup ? "warmup" : "counted");
    std::snprintf(buf, sizeof buf, "%.17g", trace.objective[t]);
    out << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", trace.delta[t]);
    out << ',' << buf << '\n';
  }
}

}  // namespace plapf
