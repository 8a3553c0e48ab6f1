#include "stochparam/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stochparam/rng.hpp"

namespace stochparam {

namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " + std::to_string(got) +
                                ", expected " + std::to_string(want) + ")");
  }
}

// Cyclic index i + offset in [0, n), for |offset| < n.
inline std::size_t wrap(std::size_t i, std::ptrdiff_t offset, std::size_t n) {
  auto k = static_cast<std::ptrdiff_t>(i) + offset;
  const auto nn = static_cast<std::ptrdiff_t>(n);
  if (k < 0) k += nn;
  if (k >= nn) k -= nn;
  return static_cast<std::size_t>(k);
}

}  // namespace

BlowUpError::BlowUpError(std::size_t step, const std::string& what)
    : std::runtime_error(what + " (non-finite state at step " + std::to_string(step) + ")"), step_(step) {}

void L96Spec::validate() const {
  if (I < 4) throw std::invalid_argument("L96Spec: I must be >= 4");
  if (J < 1) throw std::invalid_argument("L96Spec: J must be >= 1");
}

void l63_rhs(const L63Spec& spec, std::span<const double> x, std::span<double> dxdt) {
  require_dim(x.size(), 3, "l63_rhs");
  require_dim(dxdt.size(), 3, "l63_rhs");
  const double a = x[0], b = x[1], c = x[2];
  dxdt[0] = spec.sigma * (b - a);
  dxdt[1] = a * (spec.rho - c) - b;
  dxdt[2] = a * b - spec.beta * c;
}

State l63_rhs(std::span<const double> x, const L63Spec& spec) {
  State out(3);
  l63_rhs(spec, x, out);
  return out;
}

void l96_reduced_rhs(const L96Spec& spec, std::span<const double> x, std::span<double> dxdt) {
  const std::size_t n = spec.I;
  require_dim(x.size(), n, "l96_reduced_rhs");
  require_dim(dxdt.size(), n, "l96_reduced_rhs");
  for (std::size_t i = 0; i < n; ++i) {
    dxdt[i] = -x[wrap(i, -1, n)] * (x[wrap(i, -2, n)] - x[wrap(i, 1, n)]) - x[i] + spec.F;
  }
}

State l96_reduced_rhs(std::span<const double> x, const L96Spec& spec) {
  State out(spec.I);
  l96_reduced_rhs(spec, x, out);
  return out;
}

void l96_full_rhs(const L96Spec& spec, std::span<const double> x, std::span<double> dxdt) {
  const std::size_t ni = spec.I;
  const std::size_t ny = spec.I * spec.J;
  require_dim(x.size(), ni + ny, "l96_full_rhs");
  require_dim(dxdt.size(), ni + ny, "l96_full_rhs");
  const double coupling = spec.h * spec.c / spec.b;
  const double cb = spec.c * spec.b;
  const double* X = x.data();
  const double* Y = x.data() + ni;
  double* dY = dxdt.data() + ni;

  for (std::size_t i = 0; i < ni; ++i) {
    double ysum = 0.0;
    for (std::size_t j = i * spec.J; j < (i + 1) * spec.J; ++j) ysum += Y[j];
    dxdt[i] = -X[wrap(i, -1, ni)] * (X[wrap(i, -2, ni)] - X[wrap(i, 1, ni)]) - X[i] + spec.F -
              coupling * ysum;
  }
  // Interior of the Y ring without wrap-around, then the three boundary sites.
  for (std::size_t j = 1; j + 2 < ny; ++j) {
    dY[j] = -cb * Y[j + 1] * (Y[j + 2] - Y[j - 1]) - spec.c * Y[j] - coupling * X[j / spec.J];
  }
  for (std::size_t j : {std::size_t{0}, ny - 2, ny - 1}) {
    dY[j] = -cb * Y[wrap(j, 1, ny)] * (Y[wrap(j, 2, ny)] - Y[wrap(j, -1, ny)]) - spec.c * Y[j] -
            coupling * X[j / spec.J];
  }
}

State l96_full_rhs(std::span<const double> x, const L96Spec& spec) {
  State out(spec.full_dim());
  l96_full_rhs(spec, x, out);
  return out;
}

Rhs make_l63_rhs(const L63Spec& spec) {
  return [spec](std::span<const double> x, std::span<double> dxdt) { l63_rhs(spec, x, dxdt); };
}

Rhs make_l96_full_rhs(const L96Spec& spec) {
  spec.validate();
  return [spec](std::span<const double> x, std::span<double> dxdt) { l96_full_rhs(spec, x, dxdt); };
}

Rhs make_l96_reduced_rhs(const L96Spec& spec) {
  spec.validate();
  return [spec](std::span<const double> x, std::span<double> dxdt) { l96_reduced_rhs(spec, x, dxdt); };
}

Rk4Stepper::Rk4Stepper(Rhs rhs, std::size_t dim)
    : rhs_(std::move(rhs)), dim_(dim), k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

void Rk4Stepper::step(std::span<double> x, double dt) { step(x, x, dt); }

void Rk4Stepper::step(std::span<const double> x, std::span<double> out, double dt) {
  require_dim(x.size(), dim_, "rk4_step");
  require_dim(out.size(), dim_, "rk4_step");
  const double half = 0.5 * dt;
  rhs_(x, k1_);
  for (std::size_t i = 0; i < dim_; ++i) tmp_[i] = x[i] + half * k1_[i];
  rhs_(tmp_, k2_);
  for (std::size_t i = 0; i < dim_; ++i) tmp_[i] = x[i] + half * k2_[i];
  rhs_(tmp_, k3_);
  for (std::size_t i = 0; i < dim_; ++i) tmp_[i] = x[i] + dt * k3_[i];
  rhs_(tmp_, k4_);
  const double sixth = dt / 6.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    out[i] = x[i] + sixth * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
  }
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

State rk4_step(const Rhs& rhs, std::span<const double> x, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  Rk4Stepper stepper(rhs, x.size());
  State out(x.size());
  stepper.step(x, out, dt);
  if (!all_finite(out)) throw BlowUpError(0, "rk4_step");
  return out;
}

Trajectory::Trajectory(std::size_t dim, double dt, double t0) : dim_(dim), dt_(dt), t0_(t0) {
  if (dim == 0) throw std::invalid_argument("Trajectory: dimension must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("Trajectory: dt must be positive");
}

void Trajectory::push_back(std::span<const double> x) {
  require_dim(x.size(), dim_, "Trajectory::push_back");
  data_.insert(data_.end(), x.begin(), x.end());
}

std::vector<double> Trajectory::component(std::size_t i) const {
  if (i >= dim_) throw std::out_of_range("Trajectory::component");
  std::vector<double> out(size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = data_[k * dim_ + i];
  return out;
}

Trajectory integrate(const Rhs& rhs, std::span<const double> x0, double dt, std::size_t n_steps,
                     double t0) {
  if (n_steps < 1) throw std::invalid_argument("integrate: n_steps must be >= 1");
  Trajectory traj(x0.size(), dt, t0);
  traj.reserve(n_steps + 1);
  traj.push_back(x0);
  Rk4Stepper stepper(rhs, x0.size());
  State x(x0.begin(), x0.end());
  for (std::size_t n = 0; n < n_steps; ++n) {
    stepper.step(x, dt);
    if (!all_finite(x)) throw BlowUpError(n + 1, "integrate");
    traj.push_back(x);
  }
  return traj;
}

LyapunovEstimate estimate_lyapunov_time(const Rhs& rhs, std::span<const double> x0,
                                        const LyapunovConfig& config) {
  if (config.renorm_interval == 0 || config.n_steps < config.renorm_interval) {
    throw std::invalid_argument("estimate_lyapunov_time: need n_steps >= renorm_interval > 0");
  }
  const std::size_t dim = x0.size();
  Rk4Stepper stepper(rhs, dim);
  State x(x0.begin(), x0.end());
  for (std::size_t n = 0; n < config.spinup_steps; ++n) {
    stepper.step(x, config.dt);
    if (!all_finite(x)) throw BlowUpError(n + 1, "estimate_lyapunov_time (spin-up)");
  }

  RngStream rng(config.seed, StreamComponent::Lyapunov);
  State dx(dim);
  for (auto& v : dx) v = rng.normal();
  auto rescale = [&](double target) {
    const double norm = std::sqrt(std::inner_product(dx.begin(), dx.end(), dx.begin(), 0.0));
    for (auto& v : dx) v *= target / norm;
    return norm;
  };
  rescale(config.perturbation);

  State y(dim);
  LyapunovEstimate est;
  const std::size_t n_renorm = config.n_steps / config.renorm_interval;
  est.running.reserve(n_renorm);
  double log_sum = 0.0;
  for (std::size_t r = 0; r < n_renorm; ++r) {
    for (std::size_t i = 0; i < dim; ++i) y[i] = x[i] + dx[i];
    for (std::size_t s = 0; s < config.renorm_interval; ++s) {
      stepper.step(x, config.dt);
      stepper.step(y, config.dt);
    }
    if (!all_finite(x) || !all_finite(y)) {
      throw BlowUpError((r + 1) * config.renorm_interval, "estimate_lyapunov_time");
    }
    for (std::size_t i = 0; i < dim; ++i) dx[i] = y[i] - x[i];
    const double growth = rescale(config.perturbation) / config.perturbation;
    log_sum += std::log(growth);
    const double elapsed = static_cast<double>((r + 1) * config.renorm_interval) * config.dt;
    est.running.push_back(log_sum / elapsed);
  }

  est.exponent = est.running.back();
  if (est.exponent > 0.0) est.lyapunov_time = 1.0 / est.exponent;
  const std::size_t tail_start = est.running.size() - std::max<std::size_t>(1, est.running.size() / 10);
  const double scale = std::abs(est.exponent);
  for (std::size_t r = tail_start; r < est.running.size(); ++r) {
    const double dev = scale > 0.0 ? std::abs(est.running[r] - est.exponent) / scale : 0.0;
    est.final_drift = std::max(est.final_drift, dev);
  }
  if (est.final_drift > config.tolerance) {
    throw ConvergenceError("estimate_lyapunov_time: running estimate drifted by " +
                           std::to_string(est.final_drift) + " over the final 10% of steps");
  }
  return est;
}

}  // namespace stochparam
