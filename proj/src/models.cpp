#include "plapf/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

namespace plapf {

ModelVariant model_variant_from_string(const std::string& s) {
  if (s == "pl_ufg") return ModelVariant::PlUfg;
  if (s == "pl_ufg_per_band") return ModelVariant::PlUfgPerBand;
  if (s == "pl_fufg") return ModelVariant::PlFufg;
  throw ConfigError("unknown model variant '" + s + "'");
}

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::PlUfg: return "pl_ufg";
    case ModelVariant::PlUfgPerBand: return "pl_ufg_per_band";
    case ModelVariant::PlFufg: return "pl_fufg";
  }
  return "?";
}

std::vector<Eigen::VectorXd> uniform_theta(const FrameletSystem& sys, double gain) {
  std::vector<Eigen::VectorXd> theta;
  theta.reserve(sys.n_blocks());
  for (int b = 0; b < sys.n_blocks(); ++b)
    theta.push_back(Eigen::VectorXd::Constant(sys.n_nodes(), gain));
  return theta;
}

std::vector<Eigen::VectorXd> scalar_theta(const FrameletSystem& sys,
                                          const std::vector<double>& gains) {
  if (static_cast<int>(gains.size()) != sys.n_blocks())
    throw ShapeError("expected " + std::to_string(sys.n_blocks()) + " gains, got " +
                     std::to_string(gains.size()));
  std::vector<Eigen::VectorXd> theta;
  theta.reserve(gains.size());
  for (double gain : gains)
    theta.push_back(Eigen::VectorXd::Constant(sys.n_nodes(), gain));
  return theta;
}

namespace {

void check_config(const ModelConfig& cfg, const Graph& g, const Eigen::MatrixXd& X) {
  if (cfg.system == nullptr) throw ConfigError("model config has no framelet system");
  if (cfg.system->n_nodes() != g.n_nodes())
    throw ShapeError("framelet system and graph disagree on node count");
  if (X.rows() != g.n_nodes()) throw ShapeError("X rows do not match node count");
  if (static_cast<int>(cfg.theta.size()) != cfg.system->n_blocks())
    throw ShapeError("theta block count does not match the system");
  if (!cfg.band_solver.empty() &&
      static_cast<int>(cfg.band_solver.size()) != cfg.system->n_blocks())
    throw ShapeError("band_solver must be empty or provide one config per block");
}

const SolverConfig& band_config(const ModelConfig& cfg, int b) {
  return cfg.band_solver.empty() ? cfg.solver : cfg.band_solver[b];
}

}  // namespace

ModelOutput forward_pl_ufg(const ModelConfig& cfg, const Graph& g,
                           const Eigen::MatrixXd& X) {
  check_config(cfg, g, X);
  Eigen::MatrixXd Y = framelet_conv(*cfg.system, cfg.theta, X);
  SolveResult res = solve(g, g.degrees(), Y, cfg.penalty, cfg.solver);
  return {std::move(res.F), {std::move(res.trace)}};
}

ModelOutput forward_pl_ufg_per_band(const ModelConfig& cfg, const Graph& g,
                                    const Eigen::MatrixXd& X) {
  check_config(cfg, g, X);
  const FrameletSystem& sys = *cfg.system;
  ModelOutput out;
  for (int b = 0; b < sys.n_blocks(); ++b) {
    Eigen::MatrixXd Yb =
        sys.apply_adjoint(b, cfg.theta[b].asDiagonal() * sys.apply(b, X));
    SolveResult res = solve(g, g.degrees(), Yb, cfg.penalty, band_config(cfg, b));
    if (b == 0)
      out.F = std::move(res.F);
    else
      out.F += res.F;
    out.traces.push_back(std::move(res.trace));
  }
  return out;
}

ModelOutput forward_pl_fufg(const ModelConfig& cfg, const Graph& g,
                            const Eigen::MatrixXd& X) {
  check_config(cfg, g, X);
  const FrameletSystem& sys = *cfg.system;
  ModelOutput out;
  for (int b = 0; b < sys.n_blocks(); ++b) {
    Eigen::MatrixXd Yb = cfg.theta[b].asDiagonal() * sys.apply(b, X);
    SolveResult res = solve(g, g.degrees(), Yb, cfg.penalty, band_config(cfg, b));
    Eigen::MatrixXd term = sys.apply_adjoint(b, res.F);
    if (b == 0)
      out.F = std::move(term);
    else
      out.F += term;
    out.traces.push_back(std::move(res.trace));
  }
  return out;
}

ModelOutput forward(const ModelConfig& cfg, const Graph& g, const Eigen::MatrixXd& X) {
  switch (cfg.variant) {
    case ModelVariant::PlUfg: return forward_pl_ufg(cfg, g, X);
    case ModelVariant::PlUfgPerBand: return forward_pl_ufg_per_band(cfg, g, X);
    case ModelVariant::PlFufg: return forward_pl_fufg(cfg, g, X);
  }
  throw ConfigError("unknown model variant");
}

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits;
  for (int i = 0; i < out.rows(); ++i) {
    Eigen::RowVectorXd row = out.row(i);
    double m = row.maxCoeff();
    row = (row.array() - m).exp();
    out.row(i) = row / row.sum();
  }
  return out;
}

double mask_accuracy(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                     const std::vector<std::uint8_t>& mask) {
  int correct = 0, total = 0;
  for (int i = 0; i < scores.rows(); ++i) {
    if (!mask[i]) continue;
    Eigen::Index pred;
    scores.row(i).maxCoeff(&pred);
    correct += (static_cast<int>(pred) == labels[i]);
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

struct HeadFit {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  HeadMetrics metrics;
};

/// Full-batch gradient descent on softmax cross-entropy, zero-initialized.
HeadFit train_head(const Eigen::MatrixXd& features, const Dataset& ds, int epochs,
                   double lr) {
  const int n_classes = ds.n_classes();
  const int dim = static_cast<int>(features.cols());

  std::vector<int> train_ids;
  for (int i = 0; i < ds.graph.n_nodes(); ++i)
    if (ds.train_mask[i]) train_ids.push_back(i);

  Eigen::MatrixXd Xtr(train_ids.size(), dim);
  Eigen::MatrixXd Ytr = Eigen::MatrixXd::Zero(train_ids.size(), n_classes);
  for (std::size_t r = 0; r < train_ids.size(); ++r) {
    Xtr.row(r) = features.row(train_ids[r]);
    Ytr(r, ds.labels[train_ids[r]]) = 1.0;
  }

  HeadFit fit;
  fit.W = Eigen::MatrixXd::Zero(dim, n_classes);
  fit.b = Eigen::VectorXd::Zero(n_classes);
  const double inv_n = 1.0 / static_cast<double>(train_ids.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Eigen::MatrixXd logits = (Xtr * fit.W).rowwise() + fit.b.transpose();
    Eigen::MatrixXd G = (softmax_rows(logits) - Ytr) * inv_n;
    fit.W -= lr * (Xtr.transpose() * G);
    fit.b -= lr * G.colwise().sum().transpose();
  }

  Eigen::MatrixXd scores = (features * fit.W).rowwise() + fit.b.transpose();
  fit.metrics.train_accuracy = mask_accuracy(scores, ds.labels, ds.train_mask);
  fit.metrics.val_accuracy = mask_accuracy(scores, ds.labels, ds.val_mask);
  fit.metrics.test_accuracy = mask_accuracy(scores, ds.labels, ds.test_mask);
  return fit;
}

}  // namespace

TrainedHead fit_theta_and_head(const ModelConfig& cfg, const Dataset& ds, int epochs,
                               double lr, std::uint64_t seed) {
  (void)seed;  // the procedure is deterministic; the seed is part of the contract
  if (epochs < 1) throw TrainingError("epochs must be >= 1");
  if (!ds.has_masks()) throw TrainingError("dataset has no train/val/test masks");
  check_config(cfg, ds.graph, ds.features);

  std::set<int> train_classes;
  for (int i = 0; i < ds.graph.n_nodes(); ++i)
    if (ds.train_mask[i]) train_classes.insert(ds.labels[i]);
  if (train_classes.empty()) throw TrainingError("training set is empty");
  if (train_classes.size() < 2)
    throw TrainingError("training set is degenerate: a single class");

  static const std::vector<double> kGainGrid{0.0, 0.5, 1.0, 2.0};
  const int n_blocks = cfg.system->n_blocks();

  auto evaluate = [&](const std::vector<double>& gains) {
    ModelConfig trial = cfg;
    trial.theta = scalar_theta(*cfg.system, gains);
    Eigen::MatrixXd features = forward(trial, ds.graph, ds.features).F;
    return train_head(features, ds, epochs, lr);
  };

  std::vector<double> gains(n_blocks, 1.0);
  HeadFit best = evaluate(gains);

  // One coordinate-descent sweep over the blocks; ties keep the incumbent.
  for (int b = 0; b < n_blocks; ++b) {
    for (double candidate : kGainGrid) {
      if (candidate == gains[b]) continue;
      std::vector<double> trial_gains = gains;
      trial_gains[b] = candidate;
      HeadFit fit = evaluate(trial_gains);
      if (fit.metrics.val_accuracy > best.metrics.val_accuracy) {
        best = std::move(fit);
        gains = std::move(trial_gains);
      }
    }
  }

  return TrainedHead{std::move(gains), std::move(best.W), std::move(best.b),
                     best.metrics};
}

void save_head(const TrainedHead& head, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char buf[64];
  {
    std::ofstream out(dir / "weights.csv");
    for (int i = 0; i < head.weights.rows(); ++i) {
      for (int j = 0; j < head.weights.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", head.weights(i, j));
        out << (j ? "," : "") << buf;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "bias.csv");
    for (int j = 0; j < head.bias.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", head.bias[j]);
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  nlohmann::json manifest;
  manifest["gains"] = head.gains;
  manifest["n_features"] = head.weights.rows();
  manifest["n_classes"] = head.weights.cols();
  manifest["metrics"] = {{"train_accuracy", head.metrics.train_accuracy},
                         {"val_accuracy", head.metrics.val_accuracy},
                         {"test_accuracy", head.metrics.test_accuracy}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

}  // namespace plapf
