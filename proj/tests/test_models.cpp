#include <doctest.h>

#include <cmath>

#include "plapf/models.hpp"
#include "plapf/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace plapf;

namespace {

ModelConfig make_config(const FrameletSystem& sys, ModelVariant variant, double p,
                        double mu, int iterations = 200) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.system = &sys;
  cfg.theta = uniform_theta(sys);
  cfg.penalty = PenaltySpec::power(p);
  cfg.solver.mu = mu;
  cfg.solver.iterations = iterations;
  cfg.solver.warmup = 10;
  return cfg;
}

}  // namespace

TEST_CASE("pl_ufg forward pass") {
  Graph g = path_graph(2);
  FrameletSystem sys =
      build_system(g, FilterBank::builtin("haar"), 0, 2.0, TransformMode::Exact);
  Eigen::MatrixXd X(2, 1);
  X << 1.0, 0.0;

  SUBCASE("theta = ones, p = 2, mu = 1 matches the closed form of the conv output") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlUfg, 2.0, 1.0, 400);
    ModelOutput out = forward_pl_ufg(cfg, g, X);
    CHECK(out.F(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(out.F(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(out.traces.size() == 1);
  }
  SUBCASE("large mu reproduces the input") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlUfg, 2.0, 1e6, 30);
    ModelOutput out = forward_pl_ufg(cfg, g, X);
    CHECK((out.F - X).norm() / X.norm() < 1e-3);
  }
  SUBCASE("zero input, zero output") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlUfg, 2.0, 1.0, 30);
    CHECK(forward_pl_ufg(cfg, g, Eigen::MatrixXd::Zero(2, 3)).F.norm() == 0.0);
  }
}

TEST_CASE("per-band variant sums the band solutions") {
  Graph g = erdos_renyi(14, 0.3, 121);
  FrameletSystem sys =
      build_system(g, FilterBank::builtin("haar"), 0, 2.0, TransformMode::Exact);
  Eigen::MatrixXd X = gaussian_matrix(14, 2, 122);

  SUBCASE("large mu recovers the input through the tight frame") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlUfgPerBand, 2.0, 1e6, 30);
    ModelOutput out = forward_pl_ufg_per_band(cfg, g, X);
    CHECK(out.traces.size() == static_cast<std::size_t>(sys.n_blocks()));
    CHECK((out.F - X).norm() / X.norm() < 1e-3);
  }
  SUBCASE("with the high-pass band masked it matches pl_ufg at large mu") {
    std::vector<Eigen::VectorXd> masked = {Eigen::VectorXd::Ones(14),
                                           Eigen::VectorXd::Zero(14)};
    ModelConfig a = make_config(sys, ModelVariant::PlUfgPerBand, 2.0, 1e6, 30);
    a.theta = masked;
    ModelConfig b = make_config(sys, ModelVariant::PlUfg, 2.0, 1e6, 30);
    b.theta = masked;
    Eigen::MatrixXd Fa = forward_pl_ufg_per_band(a, g, X).F;
    Eigen::MatrixXd Fb = forward_pl_ufg(b, g, X).F;
    CHECK((Fa - Fb).norm() / Fb.norm() < 1e-4);
  }
  SUBCASE("zero input, zero output") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlUfgPerBand, 1.5, 1.0, 20);
    CHECK(forward_pl_ufg_per_band(cfg, g, Eigen::MatrixXd::Zero(14, 2)).F.norm() ==
          0.0);
  }
  SUBCASE("per-band solver overrides are honored") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlUfgPerBand, 2.0, 1.0, 20);
    cfg.band_solver.assign(sys.n_blocks(), cfg.solver);
    cfg.band_solver[1].iterations = 3;
    ModelOutput out = forward_pl_ufg_per_band(cfg, g, X);
    CHECK(out.traces[0].delta.size() == 30);
    CHECK(out.traces[1].delta.size() == 13);
    cfg.band_solver.pop_back();
    CHECK_THROWS_AS(forward_pl_ufg_per_band(cfg, g, X), ShapeError);
  }
}

TEST_CASE("fourier-domain variant smooths the coefficients") {
  Graph g = erdos_renyi(12, 0.35, 131);
  FrameletSystem sys =
      build_system(g, FilterBank::builtin("linear"), 1, 2.0, TransformMode::Exact);
  Eigen::MatrixXd X = gaussian_matrix(12, 2, 132);

  SUBCASE("large mu recovers the input") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlFufg, 2.0, 1e6, 30);
    ModelOutput out = forward_pl_fufg(cfg, g, X);
    CHECK((out.F - X).norm() / X.norm() < 1e-3);
  }
  SUBCASE("p = 2 equals the band-wise closed-form composition") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlFufg, 2.0, 2.0, 500);
    ModelOutput out = forward_pl_fufg(cfg, g, X);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(12, 2);
    for (int b = 0; b < sys.n_blocks(); ++b) {
      Eigen::MatrixXd Yb = sys.apply(b, X);
      expected += sys.apply_adjoint(
          b, closed_form_p2(g, g.degrees(), Yb, cfg.solver.mu));
    }
    CHECK((out.F - expected).norm() / expected.norm() < 1e-6);
  }
  SUBCASE("zero input, zero output") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlFufg, 1.5, 1.0, 20);
    CHECK(forward_pl_fufg(cfg, g, Eigen::MatrixXd::Zero(12, 2)).F.norm() == 0.0);
  }
}

TEST_CASE("model-level invariants") {
  Graph g = erdos_renyi(16, 0.3, 141);
  FrameletSystem sys =
      build_system(g, FilterBank::builtin("linear"), 1, 2.0, TransformMode::Exact);
  Eigen::MatrixXd X = gaussian_matrix(16, 3, 142);

  SUBCASE("large-mu limit holds for all three variants") {
    for (ModelVariant v :
         {ModelVariant::PlUfg, ModelVariant::PlUfgPerBand, ModelVariant::PlFufg}) {
      ModelConfig cfg = make_config(sys, v, 2.0, 1e6, 30);
      ModelOutput out = forward(cfg, g, X);
      CHECK((out.F - X).norm() / X.norm() < 1e-2);
    }
  }
  SUBCASE("forwards are linear in X when p = 2") {
    Eigen::MatrixXd Y = gaussian_matrix(16, 3, 143);
    for (ModelVariant v :
         {ModelVariant::PlUfg, ModelVariant::PlUfgPerBand, ModelVariant::PlFufg}) {
      ModelConfig cfg = make_config(sys, v, 2.0, 1.0, 40);
      Eigen::MatrixXd mix = forward(cfg, g, 2.0 * X - 3.0 * Y).F;
      Eigen::MatrixXd parts =
          2.0 * forward(cfg, g, X).F - 3.0 * forward(cfg, g, Y).F;
      CHECK((mix - parts).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("outputs stay finite across penalties, degenerate inputs included") {
    Eigen::MatrixXd C = Eigen::MatrixXd::Constant(16, 2, 1.0);
    for (ModelVariant v :
         {ModelVariant::PlUfg, ModelVariant::PlUfgPerBand, ModelVariant::PlFufg}) {
      for (double p : {1.2, 1.5, 2.0, 2.5}) {
        ModelConfig cfg = make_config(sys, v, p, 1.0, 25);
        CHECK(forward(cfg, g, C).F.allFinite());
        CHECK(forward(cfg, g, X).F.allFinite());
      }
      ModelConfig cfg = make_config(sys, v, 2.0, 1.0, 25);
      cfg.penalty = PenaltySpec::reg_tv(0.5);
      CHECK(forward(cfg, g, C).F.allFinite());
    }
  }
  SUBCASE("config validation") {
    ModelConfig cfg = make_config(sys, ModelVariant::PlUfg, 2.0, 1.0);
    cfg.theta.pop_back();
    CHECK_THROWS_AS(forward(cfg, g, X), ShapeError);
    cfg.system = nullptr;
    CHECK_THROWS_AS(forward(cfg, g, X), ConfigError);
  }
}

TEST_CASE("fit_theta_and_head trains gains and a linear head") {
  auto [g, labels] = sbm_two_block(60, 0.35, 0.03, 151);
  Dataset ds{g, gaussian_matrix(60, 4, 152), labels, {}, {}, {}};
  // Make the features mildly informative: shift class 1 rows.
  for (int i = 0; i < 60; ++i)
    if (labels[i] == 1) ds.features.row(i).array() += 1.0;
  ds = random_split(ds, {0.3, 0.3, 0.4}, 153);

  FrameletSystem sys =
      build_system(ds.graph, FilterBank::builtin("haar"), 0, 2.0, TransformMode::Exact);
  ModelConfig cfg = make_config(sys, ModelVariant::PlUfg, 2.0, 1.0, 15);

  SUBCASE("beats the majority-class baseline on a homophilic SBM") {
    TrainedHead head = fit_theta_and_head(cfg, ds, 60, 0.5, 1);
    int majority = 0;
    for (int i = 0; i < 60; ++i) majority += ds.train_mask[i] && labels[i] == 0;
    // Balanced classes: the baseline validation accuracy is about 0.5.
    CHECK(head.metrics.val_accuracy >= 0.5);
    CHECK(head.gains.size() == static_cast<std::size_t>(sys.n_blocks()));
  }
  SUBCASE("zero learning rate leaves the zero-initialized head untouched") {
    TrainedHead head = fit_theta_and_head(cfg, ds, 1, 0.0, 2);
    CHECK(head.weights.norm() == 0.0);
    CHECK(head.bias.norm() == 0.0);
  }
  SUBCASE("fixed seed reproduces identical metrics") {
    TrainedHead a = fit_theta_and_head(cfg, ds, 20, 0.2, 7);
    TrainedHead b = fit_theta_and_head(cfg, ds, 20, 0.2, 7);
    CHECK(a.metrics.val_accuracy == b.metrics.val_accuracy);
    CHECK(a.metrics.test_accuracy == b.metrics.test_accuracy);
    CHECK(a.gains == b.gains);
    CHECK((a.weights - b.weights).norm() == 0.0);
  }
  SUBCASE("single-class training sets are rejected") {
    Dataset degenerate = ds;
    for (int i = 0; i < 60; ++i)
      if (degenerate.labels[i] == 1) degenerate.train_mask[i] = 0;
    CHECK_THROWS_AS(fit_theta_and_head(cfg, degenerate, 5, 0.1, 0), TrainingError);
  }
  SUBCASE("heads serialize with a manifest") {
    testing::TempDir tmp;
    TrainedHead head = fit_theta_and_head(cfg, ds, 5, 0.1, 0);
    save_head(head, tmp.path());
    CHECK(std::filesystem::exists(tmp.path() / "weights.csv"));
    CHECK(std::filesystem::exists(tmp.path() / "bias.csv"));
    CHECK(std::filesystem::exists(tmp.path() / "manifest.json"));
  }
}
