#include "stochparam/scores.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <mutex>
#include <string>

namespace stochparam {

namespace {

constexpr double kKlFloor = 1e-12;

double sample_variance(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size() - 1);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DensityEstimate make_grid(std::span<const double> samples, std::size_t grid_size) {
  if (samples.size() < 100) throw std::invalid_argument("kde_fit: need at least 100 samples");
  if (grid_size < 2) throw std::invalid_argument("kde_fit: grid_size must be >= 2");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  DensityEstimate est;
  est.bandwidth = silverman_bandwidth(samples);
  est.lo = *mn - 3.0 * est.bandwidth;
  const double hi = *mx + 3.0 * est.bandwidth;
  est.step = (hi - est.lo) / static_cast<double>(grid_size - 1);
  est.values.assign(grid_size, 0.0);
  return est;
}

void normalise(DensityEstimate& est) {
  const double total = est.integral();
  for (auto& v : est.values) v /= total;
}

void check_comparable(const DensityEstimate& p, const DensityEstimate& q, const char* what) {
  if (p.values.size() < 2 || q.values.size() < 2) {
    throw std::invalid_argument(std::string(what) + ": empty density estimate");
  }
}

double trapezoid(const std::vector<double>& f, double step) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) s += 0.5 * (f[i] + f[i + 1]);
  return s * step;
}

}  // namespace

double DensityEstimate::at(double x) const {
  if (values.empty() || x < lo || x > hi()) return 0.0;
  const double u = (x - lo) / step;
  const auto i = std::min(static_cast<std::size_t>(u), values.size() - 2);
  const double w = u - static_cast<double>(i);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

double DensityEstimate::integral() const { return trapezoid(values, step); }

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("silverman_bandwidth: need at least 2 samples");
  const double sd = std::sqrt(sample_variance(samples));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) throw std::domain_error("kde_fit: samples have zero variance");
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityEstimate kde_fit(std::span<const double> samples, std::size_t grid_size) {
  DensityEstimate est = make_grid(samples, grid_size);
  const std::size_t g = grid_size;
  std::vector<double> counts(g, 0.0);
  for (double x : samples) {
    const double u = (x - est.lo) / est.step;
    const auto i = std::min(static_cast<std::size_t>(u), g - 2);
    const double w = u - static_cast<double>(i);
    counts[i] += 1.0 - w;
    counts[i + 1] += w;
  }
  const double h = est.bandwidth;
  const auto width = std::min<std::size_t>(g - 1, static_cast<std::size_t>(std::ceil(8.0 * h / est.step)));
  std::vector<double> kernel(width + 1);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t k = 0; k <= width; ++k) {
    const double z = static_cast<double>(k) * est.step / h;
    kernel[k] = norm * std::exp(-0.5 * z * z);
  }
  const auto n = static_cast<std::ptrdiff_t>(g);
  const auto w = static_cast<std::ptrdiff_t>(width);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, i - w);
    const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(n - 1, i + w);
    double acc = 0.0;
    for (std::ptrdiff_t j = j0; j <= j1; ++j) acc += counts[static_cast<std::size_t>(j)] * kernel[static_cast<std::size_t>(std::abs(i - j))];
    est.values[static_cast<std::size_t>(i)] = acc;
  }
  normalise(est);
  return est;
}

DensityEstimate kde_fit_direct(std::span<const double> samples, std::size_t grid_size) {
  DensityEstimate est = make_grid(samples, grid_size);
  const double h = est.bandwidth;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double x = est.grid(i);
    double acc = 0.0;
    for (double s : samples) {
      const double z = (x - s) / h;
      acc += std::exp(-0.5 * z * z);
    }
    est.values[i] = norm * acc;
  }
  normalise(est);
  return est;
}

double kl_divergence(const DensityEstimate& p, const DensityEstimate& q) {
  check_comparable(p, q, "kl_divergence");
  std::vector<double> f(p.size(), 0.0);
  double q_mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pv = p.values[i];
    if (pv <= 0.0) continue;
    const double qv = q.at(p.grid(i));
    q_mass += qv;
    f[i] = pv * std::log(pv / std::max(qv, kKlFloor));
  }
  if (q_mass <= 0.0) throw std::domain_error("kl_divergence: densities have disjoint supports");
  return std::max(0.0, trapezoid(f, p.step));
}

double hellinger_distance(const DensityEstimate& p, const DensityEstimate& q) {
  check_comparable(p, q, "hellinger_distance");
  std::vector<double> f(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) f[i] = std::sqrt(p.values[i] * q.at(p.grid(i)));
  const double bc = trapezoid(f, p.step);
  return std::clamp(std::sqrt(std::max(0.0, 1.0 - bc)), 0.0, 1.0);
}

namespace {

struct AutocovSetup {
  std::vector<double> centred;
  std::size_t n_lags;
  double lag_step;
};

AutocovSetup autocov_setup(std::span<const double> series, double dt, double max_lag, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("empirical_autocov: stride must be >= 1");
  if (!(dt > 0.0) || max_lag < 0.0) throw std::invalid_argument("empirical_autocov: invalid dt or max_lag");
  if (!(static_cast<double>(series.size()) * dt > max_lag)) {
    throw std::invalid_argument("empirical_autocov: series too short for requested max_lag");
  }
  AutocovSetup s;
  s.lag_step = dt * static_cast<double>(stride);
  for (std::size_t i = 0; i < series.size(); i += stride) s.centred.push_back(series[i]);
  s.n_lags = static_cast<std::size_t>(std::floor(max_lag / s.lag_step + 1e-9)) + 1;
  if (s.n_lags >= s.centred.size()) {
    throw std::invalid_argument("empirical_autocov: series too short for requested max_lag");
  }
  const double mean = std::accumulate(s.centred.begin(), s.centred.end(), 0.0) / static_cast<double>(s.centred.size());
  for (auto& v : s.centred) v -= mean;
  return s;
}

double lagged_sum(const std::vector<double>& x, std::size_t m) {
  double acc = 0.0;
  for (std::size_t n = 0; n + m < x.size(); ++n) acc += x[n] * x[n + m];
  return acc;
}

}  // namespace

AutocovCurve empirical_autocov(std::span<const double> series, double dt, double max_lag, std::size_t stride) {
  const auto s = autocov_setup(series, dt, max_lag, stride);
  // Zero-padded FFT correlation: r(m) = IFFT(|FFT(x)|^2)(m) / (N * n_fft).
  const std::size_t n = s.centred.size();
  std::size_t n_fft = 1;
  while (n_fft < n + s.n_lags) n_fft <<= 1;
  const std::size_t n_freq = n_fft / 2 + 1;
  double* buf = fftw_alloc_real(n_fft);
  fftw_complex* spec = fftw_alloc_complex(n_freq);
  AutocovCurve out{s.lag_step, std::vector<double>(s.n_lags)};
  {
    // FFTW planning is not thread-safe.
    static std::mutex plan_mutex;
    fftw_plan forward, backward;
    {
      std::lock_guard<std::mutex> lock(plan_mutex);
      forward = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), buf, spec, FFTW_ESTIMATE);
      backward = fftw_plan_dft_c2r_1d(static_cast<int>(n_fft), spec, buf, FFTW_ESTIMATE);
    }
    std::copy(s.centred.begin(), s.centred.end(), buf);
    std::fill(buf + n, buf + n_fft, 0.0);
    fftw_execute(forward);
    for (std::size_t k = 0; k < n_freq; ++k) {
      spec[k][0] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
      spec[k][1] = 0.0;
    }
    fftw_execute(backward);
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n_fft));
    for (std::size_t m = 0; m < s.n_lags; ++m) out.values[m] = buf[m] * scale;
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  fftw_free(buf);
  fftw_free(spec);
  return out;
}

AutocovCurve empirical_autocov_serial(std::span<const double> series, double dt, double max_lag,
                                      std::size_t stride) {
  const auto s = autocov_setup(series, dt, max_lag, stride);
  AutocovCurve out{s.lag_step, std::vector<double>(s.n_lags)};
  const double inv_n = 1.0 / static_cast<double>(s.centred.size());
  for (std::size_t m = 0; m < s.n_lags; ++m) out.values[m] = lagged_sum(s.centred, m) * inv_n;
  return out;
}

double d_r(const AutocovCurve& r_true, const AutocovCurve& r_model) {
  if (r_true.size() != r_model.size() || std::abs(r_true.lag_step - r_model.lag_step) > 1e-12 * r_true.lag_step) {
    throw std::invalid_argument("d_r: lag grids differ");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < r_true.size(); ++i) {
    const double diff = r_true.values[i] - r_model.values[i];
    num += diff * diff;
    den += r_true.values[i] * r_true.values[i];
  }
  if (den == 0.0) throw std::domain_error("d_r: reference autocovariance has zero norm");
  return std::sqrt(num / den);
}

namespace {

void check_ensemble(std::span<const double> members, std::size_t dim, std::span<const double> truth) {
  if (dim == 0 || truth.size() != dim || members.empty() || members.size() % dim != 0) {
    throw std::invalid_argument("energy_score: dimension mismatch");
  }
}

double distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace

double energy_score(std::span<const double> members, std::size_t dim, std::span<const double> truth) {
  check_ensemble(members, dim, truth);
  const std::size_t n = members.size() / dim;
  const double* z = members.data();
  std::vector<double> to_truth(n), spread(n);
  const auto nn = static_cast<std::ptrdiff_t>(n);
  // Per-member partial sums in parallel, reduced serially so the result is thread-count independent.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < nn; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    to_truth[i] = distance(z + i * dim, truth.data(), dim);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += distance(z + i * dim, z + j * dim, dim);
    spread[i] = s;
  }
  const double nd = static_cast<double>(n);
  return std::accumulate(to_truth.begin(), to_truth.end(), 0.0) / nd -
         std::accumulate(spread.begin(), spread.end(), 0.0) / (2.0 * nd * nd);
}

double energy_score_serial(std::span<const double> members, std::size_t dim, std::span<const double> truth) {
  check_ensemble(members, dim, truth);
  const std::size_t n = members.size() / dim;
  const double* z = members.data();
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a += distance(z + i * dim, truth.data(), dim);
    for (std::size_t j = 0; j < n; ++j) b += distance(z + i * dim, z + j * dim, dim);
  }
  const double nd = static_cast<double>(n);
  return a / nd - b / (2.0 * nd * nd);
}

double energy_score(const std::vector<std::vector<double>>& members, std::span<const double> truth) {
  std::vector<double> flat;
  flat.reserve(members.size() * truth.size());
  for (const auto& m : members) {
    if (m.size() != truth.size()) throw std::invalid_argument("energy_score: dimension mismatch");
    flat.insert(flat.end(), m.begin(), m.end());
  }
  return energy_score(flat, truth.size(), truth);
}

ScoreCurve energy_score_curve(const std::vector<std::vector<EnsembleSnapshot>>& instances,
                              const std::vector<double>& lead_times) {
  if (instances.empty()) throw std::invalid_argument("energy_score_curve: no instances");
  const std::size_t n_leads = lead_times.size();
  for (const auto& inst : instances) {
    if (inst.size() != n_leads) throw std::invalid_argument("energy_score_curve: inconsistent lead-time structure");
  }
  const std::size_t n_inst = instances.size();
  std::vector<double> scores(n_inst * n_leads);
  for (std::size_t k = 0; k < n_inst; ++k) {
    for (std::size_t l = 0; l < n_leads; ++l) {
      const auto& s = instances[k][l];
      scores[k * n_leads + l] = energy_score(s.members, s.dim, s.truth);
    }
  }
  ScoreCurve curve{lead_times, std::vector<double>(n_leads, 0.0), std::vector<double>(n_leads, 0.0)};
  for (std::size_t l = 0; l < n_leads; ++l) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < n_inst; ++k) sum += scores[k * n_leads + l];
    const double mean = sum / static_cast<double>(n_inst);
    for (std::size_t k = 0; k < n_inst; ++k) sq += (scores[k * n_leads + l] - mean) * (scores[k * n_leads + l] - mean);
    curve.mean[l] = mean;
    curve.std_error[l] = n_inst > 1 ? std::sqrt(sq / static_cast<double>(n_inst - 1) / static_cast<double>(n_inst)) : 0.0;
  }
  return curve;
}

}  // namespace stochparam
