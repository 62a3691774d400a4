#include "plapf/framelet.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace plapf {

namespace fs = std::filesystem;

TransformMode transform_mode_from_string(const std::string& s) {
  if (s == "exact") return TransformMode::Exact;
  if (s == "chebyshev") return TransformMode::Chebyshev;
  throw ConfigError("unknown transform mode '" + s + "'");
}

std::string to_string(TransformMode mode) {
  return mode == TransformMode::Exact ? "exact" : "chebyshev";
}

double estimate_lambda_max(const NormalizedLaplacian& lap, double rel_tol,
                           int max_iters) {
  const int n = lap.size();
  std::mt19937_64 rng(0x1d872b41u);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = unif(rng);
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = lap.apply(v);
    double norm = w.norm();
    if (norm < 1e-300) return 0.0;  // zero operator (no edges)
    w /= norm;
    Eigen::VectorXd lw = lap.apply(w);
    double next = w.dot(lw);
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::max(std::abs(next), 1e-12)) {
      return next;
    }
    lambda = next;
    v = std::move(w);
  }
  return lambda;
}

namespace {

/// Smallest integer m with s^-m * lambda_max <= pi; exact boundaries
/// resolve downward. May be negative.
int coarsest_scale_for(double lambda_max, double s) {
  if (lambda_max <= 1e-12) return 0;
  int m = static_cast<int>(std::ceil(std::log(lambda_max / kPi) / std::log(s)));
  while (std::pow(s, -(m - 1)) * lambda_max <= kPi) --m;
  while (std::pow(s, -m) * lambda_max > kPi) ++m;
  return m;
}

std::atomic<std::uint64_t> next_system_id{1};

}  // namespace

FrameletSystem build_system(const Graph& g, FilterBank bank, int L, double s,
                            TransformMode mode, int degree, int dense_cap) {
  if (s <= 1.0) throw ConfigError("dilation scale must satisfy s > 1");
  if (L < 0) throw ConfigError("level must be nonnegative");
  if (mode == TransformMode::Exact) {
    if (g.directed()) throw ConfigError("exact mode requires an undirected graph");
    if (g.n_nodes() > dense_cap)
      throw ConfigError("exact mode limited to " + std::to_string(dense_cap) +
                        " nodes, got " + std::to_string(g.n_nodes()));
  }
  if (mode == TransformMode::Chebyshev && degree < 0)
    throw ConfigError("chebyshev degree must be nonnegative");

  FrameletSystem sys(std::move(bank), L, s);
  sys.mode_ = mode;
  sys.degree_ = mode == TransformMode::Chebyshev ? degree : 0;
  sys.n_ = g.n_nodes();
  sys.directed_ = g.directed();
  sys.id_ = next_system_id.fetch_add(1);

  NormalizedLaplacian lap(g);
  sys.lambda_max_ = g.directed() ? 2.0 : estimate_lambda_max(lap);
  sys.coarsest_ = coarsest_scale_for(sys.lambda_max_, s);

  const int K = sys.bank_.K();
  // Block order: (0, L) first, then k = 1..K within each level 0..L.
  sys.blocks_.push_back({0, L});
  for (int l = 0; l <= L; ++l)
    for (int k = 1; k <= K; ++k) sys.blocks_.push_back({k, l});

  // Factors in application order. W_{k,l} = g_k(A/s^{m+l}) g_0(A/s^{m+l-1})
  // ... g_0(A/s^m), so g_0 at scale offset 0 comes first.
  for (const BlockIndex& blk : sys.blocks_) {
    std::vector<std::pair<int, int>> factors;
    if (blk.k == 0) {
      for (int j = 0; j <= L; ++j) factors.emplace_back(0, j);
    } else {
      for (int j = 0; j < blk.level; ++j) factors.emplace_back(0, j);
      factors.emplace_back(blk.k, blk.level);
    }
    sys.factors_.push_back(std::move(factors));
  }

  if (mode == TransformMode::Exact) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap.dense());
    if (eig.info() != Eigen::Success)
      throw Error("eigendecomposition of the normalized Laplacian failed");
    sys.eigvecs_ = eig.eigenvectors();
    sys.eigvals_ = eig.eigenvalues();
    for (const auto& factors : sys.factors_) {
      Eigen::VectorXd filt = Eigen::VectorXd::Ones(sys.n_);
      for (const auto& [k, j] : factors) {
        double scale = std::pow(s, sys.coarsest_ + j);
        for (int i = 0; i < sys.n_; ++i) filt[i] *= sys.bank_(k, sys.eigvals_[i] / scale);
      }
      sys.spectral_filters_.push_back(std::move(filt));
    }
  } else {
    sys.laplacian_ = std::move(lap);
    for (int k = 0; k <= K; ++k) {
      const FilterBank& bk = sys.bank_;
      sys.approx_.push_back(
          chebyshev_fit([&bk, k](double xi) { return bk(k, xi); }, degree));
    }
  }
  return sys;
}

Eigen::MatrixXd FrameletSystem::apply_impl(int b, const Eigen::MatrixXd& X,
                                           bool adjoint) const {
  if (b < 0 || b >= n_blocks()) throw ShapeError("block index out of range");
  if (X.rows() != n_)
    throw ShapeError("matrix with " + std::to_string(X.rows()) +
                     " rows applied to a system on " + std::to_string(n_) + " nodes");

  if (mode_ == TransformMode::Exact) {
    // Operators are symmetric in exact mode.
    return eigvecs_ *
           (spectral_filters_[b].asDiagonal() * (eigvecs_.transpose() * X));
  }

  const auto& factors = factors_[b];
  Eigen::MatrixXd Y = X;
  auto apply_factor = [&](int k, int j, const Eigen::MatrixXd& V) {
    double scale = std::pow(dilation_, coarsest_ + j);
    LinearOperator op{n_, [this, scale, adjoint](const Eigen::MatrixXd& M) {
                        return adjoint ? Eigen::MatrixXd(laplacian_.apply_transpose(M) / scale)
                                       : Eigen::MatrixXd(laplacian_.apply(M) / scale);
                      }};
    return chebyshev_apply(approx_[k], op, V);
  };
  if (!adjoint) {
    for (const auto& [k, j] : factors) Y = apply_factor(k, j, Y);
  } else {
    for (auto it = factors.rbegin(); it != factors.rend(); ++it)
      Y = apply_factor(it->first, it->second, Y);
  }
  return Y;
}

Eigen::MatrixXd FrameletSystem::apply(int b, const Eigen::MatrixXd& X) const {
  return apply_impl(b, X, false);
}

Eigen::MatrixXd FrameletSystem::apply_adjoint(int b, const Eigen::MatrixXd& X) const {
  return apply_impl(b, X, true);
}

Eigen::MatrixXd FrameletSystem::dense_operator(int b) const {
  if (mode_ != TransformMode::Exact)
    throw ConfigError("dense_operator is available in exact mode only");
  if (b < 0 || b >= n_blocks()) throw ShapeError("block index out of range");
  return eigvecs_ * spectral_filters_[b].asDiagonal() * eigvecs_.transpose();
}

FrameletCoefficients decompose(const FrameletSystem& sys, const Eigen::MatrixXd& X) {
  FrameletCoefficients coeffs;
  coeffs.system_id = sys.id();
  coeffs.blocks.reserve(sys.n_blocks());
  for (int b = 0; b < sys.n_blocks(); ++b) coeffs.blocks.push_back(sys.apply(b, X));
  return coeffs;
}

Eigen::MatrixXd reconstruct(const FrameletSystem& sys, const FrameletCoefficients& coeffs) {
  if (coeffs.system_id != sys.id())
    throw ShapeError("coefficients do not originate from this framelet system");
  if (static_cast<int>(coeffs.blocks.size()) != sys.n_blocks())
    throw ShapeError("coefficient block count does not match the system");
  Eigen::MatrixXd out;
  for (int b = 0; b < sys.n_blocks(); ++b) {
    Eigen::MatrixXd term = sys.apply_adjoint(b, coeffs.blocks[b]);
    if (b == 0)
      out = std::move(term);
    else
      out += term;
  }
  return out;
}

Eigen::MatrixXd framelet_conv(const FrameletSystem& sys,
                              const std::vector<Eigen::VectorXd>& theta,
                              const Eigen::MatrixXd& X) {
  if (static_cast<int>(theta.size()) != sys.n_blocks())
    throw ShapeError("theta must provide one diagonal per block (" +
                     std::to_string(sys.n_blocks()) + "), got " +
                     std::to_string(theta.size()));
  for (const auto& t : theta)
    if (t.size() != sys.n_nodes())
      throw ShapeError("theta diagonal length does not match node count");

  Eigen::MatrixXd out;
  for (int b = 0; b < sys.n_blocks(); ++b) {
    Eigen::MatrixXd block = sys.apply(b, X);
    block = theta[b].asDiagonal() * block;
    Eigen::MatrixXd term = sys.apply_adjoint(b, block);
    if (b == 0)
      out = std::move(term);
    else
      out += term;
  }
  return out;
}

void save_coefficients(const FrameletSystem& sys, const FrameletCoefficients& coeffs,
                       const fs::path& dir) {
  if (coeffs.system_id != sys.id())
    throw ShapeError("coefficients do not originate from this framelet system");
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["bank"] = sys.bank().name();
  manifest["K"] = sys.bank().K();
  manifest["level"] = sys.levels();
  manifest["dilation"] = sys.dilation();
  manifest["coarsest_scale"] = sys.coarsest_scale();
  manifest["lambda_max"] = sys.lambda_max();
  manifest["mode"] = to_string(sys.mode());
  manifest["degree"] = sys.chebyshev_degree();
  manifest["system_id"] = sys.id();
  auto order = nlohmann::json::array();
  for (int b = 0; b < sys.n_blocks(); ++b)
    order.push_back({{"k", sys.block_index(b).k}, {"level", sys.block_index(b).level}});
  manifest["blocks"] = std::move(order);
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

  char buf[64];
  for (std::size_t b = 0; b < coeffs.blocks.size(); ++b) {
    std::snprintf(buf, sizeof buf, "block_%03zu.csv", b);
    std::ofstream out(dir / buf);
    const Eigen::MatrixXd& m = coeffs.blocks[b];
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        out << (j ? "," : "") << buf;
      }
      out << '\n';
    }
  }
}

FrameletCoefficients load_coefficients(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw LoadError((dir / "manifest.json").string() + ": cannot open");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError((dir / "manifest.json").string() + ": " + e.what());
  }
  FrameletCoefficients coeffs;
  coeffs.system_id = manifest.value("system_id", 0ull);
  const auto n_blocks = manifest.at("blocks").size();
  char name[64];
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::snprintf(name, sizeof name, "block_%03zu.csv", b);
    std::ifstream block_in(dir / name);
    if (!block_in) throw LoadError((dir / name).string() + ": cannot open");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(block_in, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::size_t start = 0;
      while (start <= line.size()) {
        std::size_t comma = line.find(',', start);
        std::string tok = line.substr(start, comma == std::string::npos
                                                 ? std::string::npos
                                                 : comma - start);
        row.push_back(std::stod(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    coeffs.blocks.push_back(std::move(m));
  }
  return coeffs;
}

}  // namespace plapf
