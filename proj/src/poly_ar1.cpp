#include "stochparam/poly_ar1.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace stochparam {

double PolyAr1Model::mean(double x) const {
  double acc = 0.0;
  for (std::size_t k = coefficients.size(); k-- > 0;) acc = acc * x + coefficients[k];
  return acc;
}

PolyAr1Model fit_poly_ar1(const PairDataset& data, std::size_t degree) {
  const std::size_t n = data.size(), d = data.dim;
  if (n < degree + 2) throw std::invalid_argument("fit_poly_ar1: not enough pairs");
  const auto p = static_cast<Eigen::Index>(degree + 1);

  // Normal equations in the scaled variable u = x / s for conditioning.
  double s = 0.0;
  for (double v : data.x) s += v * v;
  s = std::sqrt(s / static_cast<double>(data.x.size()));
  if (!(s > 0.0)) s = 1.0;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd basis(p);
  for (std::size_t k = 0; k < n * d; ++k) {
    const double u = data.x[k] / s;
    double pw = 1.0;
    for (Eigen::Index j = 0; j < p; ++j, pw *= u) basis(j) = pw;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(basis);
    rhs += data.m[k] * basis;
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(1e-12);
  if (qr.rank() < p) throw std::domain_error("fit_poly_ar1: rank-deficient design matrix");
  const Eigen::VectorXd c = qr.solve(rhs);

  PolyAr1Model model;
  model.coefficients.resize(degree + 1);
  for (std::size_t j = 0; j <= degree; ++j) {
    model.coefficients[j] = c(static_cast<Eigen::Index>(j)) / std::pow(s, static_cast<double>(j));
  }

  double ss = 0.0, lag = 0.0, target_ss = 0.0;
  for (double v : data.m) target_ss += v * v;
  for (std::size_t i = 0; i < d; ++i) {
    double prev = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = data.m[k * d + i] - model.mean(data.x[k * d + i]);
      ss += r * r;
      if (k > 0) lag += prev * r;
      prev = r;
    }
  }
  model.residual_var = ss / static_cast<double>(n * d);
  // Residuals at round-off level carry no autocorrelation information.
  model.phi = ss > 1e-20 * target_ss ? lag / ss : 0.0;
  model.innovation_var = model.residual_var * (1.0 - model.phi * model.phi);
  return model;
}

}  // namespace stochparam
