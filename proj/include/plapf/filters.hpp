#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "plapf/errors.hpp"

namespace plapf {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Anything that can multiply a matrix from the left.
struct LinearOperator {
  int dim = 0;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> apply;
};

/// A bank of K+1 scalar scaling functions g_0..g_K on [0, pi].
///
/// Valid banks satisfy sum_k g_k(xi)^2 = 1 on [0, pi]; builtin() and
/// from_json() enforce that, the raw constructor does not (tests and the
/// verification harness build deliberately broken banks).
class FilterBank {
 public:
  FilterBank(std::string name, std::vector<std::function<double(double)>> funcs);

  /// "haar": K = 1, g0 = cos(xi/2), g1 = sin(xi/2).
  /// "linear": K = 2, g0 = cos^2(xi/2), g1 = sin(xi)/sqrt(2), g2 = sin^2(xi/2).
  static FilterBank builtin(const std::string& name);

  /// Custom bank from a JSON spec; rejected unless the identity residual
  /// on a 4096-point grid is below 1e-9.
  static FilterBank from_json(const nlohmann::json& spec);
  /// Same parsing without the identity gate (verification harness only).
  static FilterBank from_json_unchecked(const nlohmann::json& spec);

  const std::string& name() const { return name_; }
  int K() const { return static_cast<int>(funcs_.size()) - 1; }
  int size() const { return static_cast<int>(funcs_.size()); }
  double operator()(int k, double xi) const { return funcs_[k](xi); }

 private:
  std::string name_;
  std::vector<std::function<double(double)>> funcs_;
};

/// Max over a uniform grid on [0, pi] of |sum_k g_k(xi)^2 - 1|.
double verify_identity(const FilterBank& bank, int grid_size);

/// Degree-n Chebyshev interpolant of a scalar function on [0, pi],
/// under the affine map xi -> 2 xi / pi - 1.
class ChebyshevApprox {
 public:
  ChebyshevApprox() = default;

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  /// Max abs fit error over a 1024-point grid, recorded at construction.
  double fit_residual() const { return residual_; }

  double evaluate(double xi) const;

  friend ChebyshevApprox chebyshev_fit(const std::function<double(double)>& f,
                                       int degree);

 private:
  std::vector<double> coeffs_;
  double residual_ = 0.0;
};

ChebyshevApprox chebyshev_fit(const std::function<double(double)>& f, int degree);

/// sum_k c_k T_k(Ahat) X via the three-term recurrence, where Ahat is A
/// affinely mapped from [0, pi] to [-1, 1]. Never materializes powers of A.
Eigen::MatrixXd chebyshev_apply(const ChebyshevApprox& approx,
                                const LinearOperator& A,
                                const Eigen::MatrixXd& X);

}  // namespace plapf
