#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "stochparam/rng.hpp"

namespace stochparam {

/// M_n = phi1 M_{n-1} + phi2 M_{n-2} + eps_n, eps_n ~ N(0, sigma_eps2).
struct Ar2Spec {
  double phi1 = 0.45;
  double phi2 = 0.5;
  double sigma_eps2 = 1.425e-5;

  bool stationary() const;
  /// Throws std::invalid_argument unless stationary with sigma_eps2 >= 0.
  void validate() const;
};

/// M_n = phi M_{n-1} + eps_n, eps_n ~ N(0, innovation_var).
struct Ar1Spec {
  double phi = 0.0;
  double innovation_var = 0.0;

  void validate() const;
  double stationary_variance() const { return innovation_var / (1.0 - phi * phi); }
};

/// Vector AR(1) with scalar coefficient and full innovation covariance. The
/// lower Cholesky factor is computed at construction, which fails unless the
/// covariance is symmetric positive-definite.
class Var1Spec {
 public:
  Var1Spec(double phi, Eigen::MatrixXd covariance);

  /// kappa * (unit diagonal, off-diagonal alpha) in `dim` dimensions.
  static Var1Spec equicorrelated(std::size_t dim, double phi, double alpha, double kappa);

  double phi() const { return phi_; }
  std::size_t dim() const { return static_cast<std::size_t>(covariance_.rows()); }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& factor() const { return factor_; }
  /// Per-component stationary variance, diag(Sigma) / (1 - phi^2).
  Eigen::VectorXd stationary_variance() const;

 private:
  double phi_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd factor_;
};

/// Lagged values and RNG of a scalar AR process. lag1 = M_{n-1}, lag2 = M_{n-2}.
struct ArState {
  double lag1 = 0.0;
  double lag2 = 0.0;
  RngStream rng;
};

struct Var1State {
  std::vector<double> lag;
  RngStream rng;
};

double ar2_step(ArState& state, const Ar2Spec& spec);
double ar1_step(ArState& state, const Ar1Spec& spec);
/// Writes the next M~_n into `out` (length dim) and updates the lag.
void var1_step(Var1State& state, const Var1Spec& spec, std::span<double> out);
std::vector<double> var1_step(Var1State& state, const Var1Spec& spec);

/// Real roots phi_plus >= phi_minus of z^2 - phi1 z - phi2.
struct YuleWalkerRoots {
  double plus;
  double minus;
};
/// Throws std::domain_error if the roots are complex.
YuleWalkerRoots ar2_roots(const Ar2Spec& spec);

double ar2_stationary_variance(const Ar2Spec& spec);

/// gamma(m) = A phi_+^m + B phi_-^m with A, B fixed by gamma(0) and gamma(1).
/// Complex-conjugate roots are handled; repeated roots throw std::domain_error.
double ar2_autocov_closed_form(const Ar2Spec& spec, std::size_t m);

/// AR(1) with the AR(2)'s one-step transition density and stationary law.
Ar1Spec derive_ar1_natural(const Ar2Spec& spec);

/// AR(1) with coefficient phi_+ and the AR(2)'s stationary variance.
Ar1Spec derive_ar1_plus(const Ar2Spec& spec);

/// M_n = M~_n (elementwise) X_n.
std::vector<double> multiplicative_error(std::span<const double> m_tilde, std::span<const double> x);

ArState sample_stationary_init(const Ar1Spec& spec, RngStream rng);
ArState sample_stationary_init(const Ar2Spec& spec, RngStream rng);
Var1State sample_stationary_init(const Var1Spec& spec, RngStream rng);

}  // namespace stochparam
