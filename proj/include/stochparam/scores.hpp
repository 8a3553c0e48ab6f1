#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stochparam {

/// Gaussian kernel density estimate tabulated on a uniform grid.
struct DensityEstimate {
  double lo = 0.0;
  double step = 0.0;
  double bandwidth = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double grid(std::size_t i) const { return lo + static_cast<double>(i) * step; }
  double hi() const { return grid(values.size() - 1); }
  /// Linear interpolation; zero outside the grid.
  double at(double x) const;
  /// Trapezoidal integral over the grid.
  double integral() const;
};

/// Silverman's rule: 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

/// KDE via linear binning and a truncated discrete Gaussian convolution
/// (OpenMP over grid points). The grid spans [min - 3h, max + 3h].
DensityEstimate kde_fit(std::span<const double> samples, std::size_t grid_size = 2048);
/// Exact direct-summation KDE on the same grid; serial reference.
DensityEstimate kde_fit_direct(std::span<const double> samples, std::size_t grid_size = 2048);

/// KL(p || q) = int p log(p / q), q interpolated onto p's grid and floored at 1e-12.
/// Throws std::domain_error if q has no mass where p does.
double kl_divergence(const DensityEstimate& p, const DensityEstimate& q);

/// sqrt(1 - int sqrt(p q)), evaluated on p's grid, clipped to [0, 1].
double hellinger_distance(const DensityEstimate& p, const DensityEstimate& q);

struct AutocovCurve {
  double lag_step = 0.0;
  std::vector<double> values;

  double lag(std::size_t m) const { return static_cast<double>(m) * lag_step; }
  std::size_t size() const { return values.size(); }
};

/// Biased autocovariance of the mean-removed series subsampled every `stride`
/// samples, for lags 0, dt*stride, ... up to max_lag. Computed by FFT; the
/// serial variant sums lag products directly.
AutocovCurve empirical_autocov(std::span<const double> series, double dt, double max_lag,
                               std::size_t stride = 1);
AutocovCurve empirical_autocov_serial(std::span<const double> series, double dt, double max_lag,
                                      std::size_t stride = 1);

/// Relative L2 error ||r - r'|| / ||r||.
double d_r(const AutocovCurve& r_true, const AutocovCurve& r_model);

/// Energy score of an ensemble stored row-major (n members x dim) against `truth`.
double energy_score(std::span<const double> members, std::size_t dim, std::span<const double> truth);
double energy_score(const std::vector<std::vector<double>>& members, std::span<const double> truth);
double energy_score_serial(std::span<const double> members, std::size_t dim, std::span<const double> truth);

/// An ensemble and its verifying truth at one lead time.
struct EnsembleSnapshot {
  std::size_t dim = 0;
  std::vector<double> members;
  std::vector<double> truth;
};

struct ScoreCurve {
  std::vector<double> lead_times;
  std::vector<double> mean;
  std::vector<double> std_error;
};

/// Mean (and standard error) of the energy score over instances, per lead time.
/// instances[k][l] is instance k at lead_times[l].
ScoreCurve energy_score_curve(const std::vector<std::vector<EnsembleSnapshot>>& instances,
                              const std::vector<double>& lead_times);

}  // namespace stochparam
