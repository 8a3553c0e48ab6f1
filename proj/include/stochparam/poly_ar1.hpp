#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stochparam/dataset.hpp"

namespace stochparam {

/// Strongly local Gaussian baseline: per-site polynomial conditional mean
/// (shared across sites) with AR(1) residuals.
struct PolyAr1Model {
  /// Power-basis coefficients c_0..c_p of E[M_i | X_i] = sum_k c_k X_i^k.
  std::vector<double> coefficients;
  double phi = 0.0;
  double innovation_var = 0.0;
  double residual_var = 0.0;

  std::size_t degree() const { return coefficients.size() - 1; }
  double mean(double x) const;
};

/// Least-squares polynomial fit on pooled site pairs, then the lag-1
/// autocorrelation of each site's residual series (pooled over sites).
/// Throws std::domain_error if the design matrix is rank deficient.
PolyAr1Model fit_poly_ar1(const PairDataset& data, std::size_t degree = 3);

}  // namespace stochparam
