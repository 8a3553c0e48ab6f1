#include "stochparam/forcing.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace stochparam {

bool Ar2Spec::stationary() const {
  return phi2 + phi1 < 1.0 && phi2 - phi1 < 1.0 && std::abs(phi2) < 1.0;
}

void Ar2Spec::validate() const {
  if (!stationary()) throw std::invalid_argument("Ar2Spec: coefficients outside the stationarity triangle");
  if (!(sigma_eps2 >= 0.0)) throw std::invalid_argument("Ar2Spec: innovation variance must be >= 0");
}

void Ar1Spec::validate() const {
  if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("Ar1Spec: |phi| must be < 1");
  if (!(innovation_var >= 0.0)) throw std::invalid_argument("Ar1Spec: innovation variance must be >= 0");
}

Var1Spec::Var1Spec(double phi, Eigen::MatrixXd covariance) : phi_(phi), covariance_(std::move(covariance)) {
  if (!(std::abs(phi_) < 1.0)) throw std::invalid_argument("Var1Spec: |phi| must be < 1");
  if (covariance_.rows() == 0 || covariance_.rows() != covariance_.cols()) {
    throw std::invalid_argument("Var1Spec: covariance must be square and non-empty");
  }
  if (!covariance_.isApprox(covariance_.transpose(), 1e-12)) {
    throw std::invalid_argument("Var1Spec: covariance must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("Var1Spec: covariance is not positive-definite");
  factor_ = llt.matrixL();
}

Var1Spec Var1Spec::equicorrelated(std::size_t dim, double phi, double alpha, double kappa) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(dim),
                                                  static_cast<Eigen::Index>(dim), alpha);
  cov.diagonal().setOnes();
  return Var1Spec(phi, kappa * cov);
}

Eigen::VectorXd Var1Spec::stationary_variance() const {
  return covariance_.diagonal() / (1.0 - phi_ * phi_);
}

double ar2_step(ArState& state, const Ar2Spec& spec) {
  const double eps = std::sqrt(spec.sigma_eps2) * state.rng.normal();
  const double next = spec.phi1 * state.lag1 + spec.phi2 * state.lag2 + eps;
  state.lag2 = state.lag1;
  state.lag1 = next;
  return next;
}

double ar1_step(ArState& state, const Ar1Spec& spec) {
  const double next = spec.phi * state.lag1 + std::sqrt(spec.innovation_var) * state.rng.normal();
  state.lag2 = state.lag1;
  state.lag1 = next;
  return next;
}

void var1_step(Var1State& state, const Var1Spec& spec, std::span<double> out) {
  const std::size_t d = spec.dim();
  if (state.lag.size() != d || out.size() != d) throw std::invalid_argument("var1_step: dimension mismatch");
  // Draw all normals first so the stream order does not depend on the factor's sparsity.
  double z[16];
  std::vector<double> zbuf;
  double* zp = z;
  if (d > 16) {
    zbuf.resize(d);
    zp = zbuf.data();
  }
  for (std::size_t i = 0; i < d; ++i) zp[i] = state.rng.normal();
  const auto& L = spec.factor();
  for (std::size_t i = 0; i < d; ++i) {
    double eps = 0.0;
    for (std::size_t j = 0; j <= i; ++j) eps += L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * zp[j];
    state.lag[i] = spec.phi() * state.lag[i] + eps;
    out[i] = state.lag[i];
  }
}

std::vector<double> var1_step(Var1State& state, const Var1Spec& spec) {
  std::vector<double> out(spec.dim());
  var1_step(state, spec, out);
  return out;
}

YuleWalkerRoots ar2_roots(const Ar2Spec& spec) {
  const double disc = spec.phi1 * spec.phi1 + 4.0 * spec.phi2;
  if (disc < 0.0) throw std::domain_error("ar2_roots: complex Yule-Walker roots");
  const double s = std::sqrt(disc);
  return {0.5 * (spec.phi1 + s), 0.5 * (spec.phi1 - s)};
}

double ar2_stationary_variance(const Ar2Spec& spec) {
  spec.validate();
  const double p1 = spec.phi1, p2 = spec.phi2;
  return (1.0 - p2) * spec.sigma_eps2 / ((1.0 + p2) * (1.0 - p1 - p2) * (1.0 + p1 - p2));
}

double ar2_autocov_closed_form(const Ar2Spec& spec, std::size_t m) {
  const double g0 = ar2_stationary_variance(spec);
  const double g1 = spec.phi1 * g0 / (1.0 - spec.phi2);
  const std::complex<double> s = std::sqrt(std::complex<double>(spec.phi1 * spec.phi1 + 4.0 * spec.phi2, 0.0));
  const std::complex<double> plus = 0.5 * (spec.phi1 + s);
  const std::complex<double> minus = 0.5 * (spec.phi1 - s);
  if (std::abs(plus - minus) < 1e-12) {
    throw std::domain_error("ar2_autocov_closed_form: repeated Yule-Walker roots are not supported");
  }
  const std::complex<double> a = (g1 - minus * g0) / (plus - minus);
  const std::complex<double> b = g0 - a;
  // integer powers; std::pow(0, 0) on complex yields NaN
  auto ipow = [](std::complex<double> z, std::size_t e) {
    std::complex<double> r = 1.0;
    for (; e > 0; e >>= 1, z *= z)
      if (e & 1) r *= z;
    return r;
  };
  return std::real(a * ipow(plus, m) + b * ipow(minus, m));
}

Ar1Spec derive_ar1_natural(const Ar2Spec& spec) {
  if (spec.phi2 == 1.0) throw std::invalid_argument("derive_ar1_natural: phi2 == 1");
  spec.validate();
  Ar1Spec out{spec.phi1 / (1.0 - spec.phi2), spec.sigma_eps2 / (1.0 - spec.phi2 * spec.phi2)};
  out.validate();
  return out;
}

Ar1Spec derive_ar1_plus(const Ar2Spec& spec) {
  spec.validate();
  const auto roots = ar2_roots(spec);
  if (roots.plus == roots.minus) throw std::domain_error("derive_ar1_plus: repeated Yule-Walker roots");
  const double g0 = ar2_stationary_variance(spec);
  Ar1Spec out{roots.plus, g0 * (1.0 - roots.plus * roots.plus)};
  out.validate();
  return out;
}

std::vector<double> multiplicative_error(std::span<const double> m_tilde, std::span<const double> x) {
  if (m_tilde.size() != x.size()) throw std::invalid_argument("multiplicative_error: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = m_tilde[i] * x[i];
  return out;
}

ArState sample_stationary_init(const Ar1Spec& spec, RngStream rng) {
  spec.validate();
  const double sd = std::sqrt(spec.stationary_variance());
  ArState state{0.0, 0.0, std::move(rng)};
  state.lag1 = sd * state.rng.normal();
  // Gaussian AR(1) is time-reversible, so M_{n-2} | M_{n-1} has the forward transition law.
  state.lag2 = spec.phi * state.lag1 + std::sqrt(spec.innovation_var) * state.rng.normal();
  return state;
}

ArState sample_stationary_init(const Ar2Spec& spec, RngStream rng) {
  const double g0 = ar2_stationary_variance(spec);
  const double g1 = spec.phi1 * g0 / (1.0 - spec.phi2);
  ArState state{0.0, 0.0, std::move(rng)};
  if (g0 == 0.0) return state;
  const double rho = g1 / g0;
  const double sd = std::sqrt(g0);
  state.lag1 = sd * state.rng.normal();
  state.lag2 = rho * state.lag1 + sd * std::sqrt(1.0 - rho * rho) * state.rng.normal();
  return state;
}

Var1State sample_stationary_init(const Var1Spec& spec, RngStream rng) {
  Var1State state{std::vector<double>(spec.dim(), 0.0), std::move(rng)};
  const double scale = 1.0 / std::sqrt(1.0 - spec.phi() * spec.phi());
  std::vector<double> z(spec.dim());
  for (auto& v : z) v = state.rng.normal();
  const auto& L = spec.factor();
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
    state.lag[i] = scale * acc;
  }
  return state;
}

}  // namespace stochparam
