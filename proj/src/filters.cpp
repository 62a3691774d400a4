#include "plapf/filters.hpp"

#include <cmath>
#include <utility>

namespace plapf {

FilterBank::FilterBank(std::string name, std::vector<std::function<double(double)>> funcs)
    : name_(std::move(name)), funcs_(std::move(funcs)) {
  if (funcs_.size() < 2)
    throw ConfigError("filter bank '" + name_ + "' needs at least two functions");
}

FilterBank FilterBank::builtin(const std::string& name) {
  if (name == "haar") {
    return FilterBank("haar", {[](double xi) { return std::cos(xi / 2.0); },
                               [](double xi) { return std::sin(xi / 2.0); }});
  }
  if (name == "linear") {
    return FilterBank("linear",
                      {[](double xi) {
                         double c = std::cos(xi / 2.0);
                         return c * c;
                       },
                       [](double xi) { return std::sin(xi) / std::sqrt(2.0); },
                       [](double xi) {
                         double s = std::sin(xi / 2.0);
                         return s * s;
                       }});
  }
  throw ConfigError("unknown filter bank '" + name + "'");
}

namespace {

using Primitive = double (*)(double);

double prim_cos_half(double xi) { return std::cos(xi / 2.0); }
double prim_sin_half(double xi) { return std::sin(xi / 2.0); }
double prim_cos_sq_half(double xi) {
  double c = std::cos(xi / 2.0);
  return c * c;
}
double prim_sin_sq_half(double xi) {
  double s = std::sin(xi / 2.0);
  return s * s;
}
double prim_sin_scaled(double xi) { return std::sin(xi) / std::sqrt(2.0); }

Primitive primitive_by_name(const std::string& name) {
  if (name == "cos_half") return prim_cos_half;
  if (name == "sin_half") return prim_sin_half;
  if (name == "cos_sq_half") return prim_cos_sq_half;
  if (name == "sin_sq_half") return prim_sin_sq_half;
  if (name == "sin_scaled") return prim_sin_scaled;
  throw ConfigError("unknown filter primitive '" + name + "'");
}

FilterBank parse_bank(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("functions") || !spec["functions"].is_array())
    throw ConfigError("custom bank spec needs a 'functions' array");
  std::string name = spec.value("name", "custom");
  std::vector<std::function<double(double)>> funcs;
  for (const auto& fn : spec["functions"]) {
    if (!fn.is_array() || fn.empty())
      throw ConfigError("each bank function must be a nonempty array of terms");
    std::vector<std::pair<Primitive, double>> terms;
    for (const auto& term : fn) {
      if (!term.is_object() || !term.contains("primitive"))
        throw ConfigError("bank term needs a 'primitive' name");
      Primitive prim = primitive_by_name(term["primitive"].get<std::string>());
      double coeff = term.value("coeff", 1.0);
      if (!std::isfinite(coeff)) throw ConfigError("bank term coefficient must be finite");
      terms.emplace_back(prim, coeff);
    }
    funcs.push_back([terms](double xi) {
      double v = 0.0;
      for (const auto& [prim, coeff] : terms) v += coeff * prim(xi);
      return v;
    });
  }
  if (funcs.size() < 2) throw ConfigError("custom bank needs at least two functions");
  return FilterBank(std::move(name), std::move(funcs));
}

}  // namespace

FilterBank FilterBank::from_json_unchecked(const nlohmann::json& spec) {
  return parse_bank(spec);
}

FilterBank FilterBank::from_json(const nlohmann::json& spec) {
  FilterBank bank = parse_bank(spec);
  double residual = verify_identity(bank, 4096);
  if (!(residual < 1e-9))
    throw ConfigError("custom bank '" + bank.name() +
                      "' violates the identity condition (residual " +
                      std::to_string(residual) + ")");
  // g_0 must descend from 1 to 0 and g_K ascend from 0 to 1.
  constexpr int kGrid = 4096;
  const int K = bank.K();
  if (std::abs(bank(0, 0.0) - 1.0) > 1e-9 || std::abs(bank(0, kPi)) > 1e-9 ||
      std::abs(bank(K, 0.0)) > 1e-9 || std::abs(bank(K, kPi) - 1.0) > 1e-9)
    throw ConfigError("custom bank '" + bank.name() +
                      "' must have g0 going 1 -> 0 and gK going 0 -> 1");
  double prev0 = bank(0, 0.0), prevK = bank(K, 0.0);
  for (int i = 1; i < kGrid; ++i) {
    double xi = kPi * static_cast<double>(i) / (kGrid - 1);
    double g0 = bank(0, xi), gK = bank(K, xi);
    if (g0 > prev0 + 1e-12 || gK < prevK - 1e-12)
      throw ConfigError("custom bank '" + bank.name() +
                        "' must have monotone g0 (descending) and gK (ascending)");
    prev0 = g0;
    prevK = gK;
  }
  return bank;
}

double verify_identity(const FilterBank& bank, int grid_size) {
  if (grid_size < 2) throw ConfigError("identity grid needs at least 2 points");
  double worst = 0.0;
  for (int i = 0; i < grid_size; ++i) {
    double xi = kPi * static_cast<double>(i) / static_cast<double>(grid_size - 1);
    double sum = 0.0;
    for (int k = 0; k < bank.size(); ++k) {
      double g = bank(k, xi);
      sum += g * g;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

ChebyshevApprox chebyshev_fit(const std::function<double(double)>& f, int degree) {
  if (degree < 0) throw FitError("chebyshev degree must be nonnegative");
  const int m = degree + 1;

  // Interpolation at the Chebyshev points of [-1, 1], mapped onto [0, pi].
  std::vector<double> values(m);
  std::vector<double> nodes(m);
  for (int j = 0; j < m; ++j) {
    nodes[j] = std::cos(kPi * (j + 0.5) / m);
    double xi = (nodes[j] + 1.0) * kPi / 2.0;
    values[j] = f(xi);
    if (!std::isfinite(values[j]))
      throw FitError("target function is not finite at xi = " + std::to_string(xi));
  }

  ChebyshevApprox out;
  out.coeffs_.assign(m, 0.0);
  for (int k = 0; k < m; ++k) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += values[j] * std::cos(k * kPi * (j + 0.5) / m);
    out.coeffs_[k] = 2.0 * acc / m;
  }
  out.coeffs_[0] *= 0.5;

  constexpr int kResidualGrid = 1024;
  double worst = 0.0;
  for (int i = 0; i < kResidualGrid; ++i) {
    double xi = kPi * static_cast<double>(i) / (kResidualGrid - 1);
    worst = std::max(worst, std::abs(out.evaluate(xi) - f(xi)));
  }
  out.residual_ = worst;
  return out;
}

double ChebyshevApprox::evaluate(double xi) const {
  // Clenshaw recurrence on the mapped argument.
  const double x = 2.0 * xi / kPi - 1.0;
  double b1 = 0.0, b2 = 0.0;
  for (int k = degree(); k >= 1; --k) {
    double b0 = 2.0 * x * b1 - b2 + coeffs_[k];
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + coeffs_[0];
}

Eigen::MatrixXd chebyshev_apply(const ChebyshevApprox& approx, const LinearOperator& A,
                                const Eigen::MatrixXd& X) {
  if (X.rows() != A.dim)
    throw ShapeError("operator of dimension " + std::to_string(A.dim) +
                     " applied to " + std::to_string(X.rows()) + " rows");
  const auto& c = approx.coefficients();
  auto mapped = [&](const Eigen::MatrixXd& V) {
    return Eigen::MatrixXd((2.0 / kPi) * A.apply(V) - V);
  };

  Eigen::MatrixXd acc = c[0] * X;
  if (approx.degree() == 0) return acc;
  Eigen::MatrixXd t_prev = X;
  Eigen::MatrixXd t_cur = mapped(X);
  acc += c[1] * t_cur;
  for (int k = 2; k <= approx.degree(); ++k) {
    Eigen::MatrixXd t_next = 2.0 * mapped(t_cur) - t_prev;
    acc += c[k] * t_next;
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
  }
  return acc;
}

}  // namespace plapf
