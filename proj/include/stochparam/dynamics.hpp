#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochparam {

using State = std::vector<double>;

/// Right-hand side of an autonomous ODE, written into `dxdt` (same length as `x`).
using Rhs = std::function<void(std::span<const double> x, std::span<double> dxdt)>;

/// Raised when an integration step produces a non-finite state.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::size_t step, const std::string& what);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct L63Spec {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

/// Two-scale Lorenz '96. Full state layout: X block (I values) followed by the
/// Y block (I*J values, j = 1..IJ in order).
struct L96Spec {
  double h = 1.0;
  double F = 20.0;
  double b = 10.0;
  double c = 10.0;
  std::size_t I = 8;
  std::size_t J = 32;

  void validate() const;
  std::size_t full_dim() const { return I + I * J; }
};

void l63_rhs(const L63Spec& spec, std::span<const double> x, std::span<double> dxdt);
State l63_rhs(std::span<const double> x, const L63Spec& spec = {});

void l96_full_rhs(const L96Spec& spec, std::span<const double> x, std::span<double> dxdt);
State l96_full_rhs(std::span<const double> x, const L96Spec& spec = {});

void l96_reduced_rhs(const L96Spec& spec, std::span<const double> x, std::span<double> dxdt);
State l96_reduced_rhs(std::span<const double> x, const L96Spec& spec = {});

Rhs make_l63_rhs(const L63Spec& spec = {});
Rhs make_l96_full_rhs(const L96Spec& spec = {});
Rhs make_l96_reduced_rhs(const L96Spec& spec = {});

/// Classical fourth-order Runge-Kutta stepper with reusable stage buffers.
class Rk4Stepper {
 public:
  Rk4Stepper(Rhs rhs, std::size_t dim);

  /// Advances `x` in place by one step of size dt.
  void step(std::span<double> x, double dt);
  /// Writes one step from `x` into `out` (which may alias `x`).
  void step(std::span<const double> x, std::span<double> out, double dt);

  std::size_t dim() const { return dim_; }

 private:
  Rhs rhs_;
  std::size_t dim_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

/// One RK4 step. Throws BlowUpError (step 0) if the result is non-finite.
State rk4_step(const Rhs& rhs, std::span<const double> x, double dt);

bool all_finite(std::span<const double> x);

/// Uniformly spaced sequence of states stored row-major.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t dim, double dt, double t0 = 0.0);

  std::size_t dim() const { return dim_; }
  double dt() const { return dt_; }
  double t0() const { return t0_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return data_.empty(); }

  std::span<const double> state(std::size_t k) const { return {data_.data() + k * dim_, dim_}; }
  std::span<const double> back() const { return state(size() - 1); }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) * dt_; }

  void reserve(std::size_t n_states) { data_.reserve(n_states * dim_); }
  void push_back(std::span<const double> x);

  /// Component `i` of every state.
  std::vector<double> component(std::size_t i) const;
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t dim_ = 0;
  double dt_ = 0.0;
  double t0_ = 0.0;
  std::vector<double> data_;
};

/// Integrates n_steps RK4 steps; the result holds n_steps + 1 states.
Trajectory integrate(const Rhs& rhs, std::span<const double> x0, double dt, std::size_t n_steps,
                     double t0 = 0.0);

struct LyapunovConfig {
  double dt = 1e-3;
  std::size_t spinup_steps = 10'000;
  std::size_t n_steps = 1'000'000;
  std::size_t renorm_interval = 10;
  double perturbation = 1e-8;
  double tolerance = 0.01;
  std::uint64_t seed = 0;
};

struct LyapunovEstimate {
  double exponent = 0.0;
  /// 1 / exponent; empty when the exponent is not positive.
  std::optional<double> lyapunov_time;
  /// Running exponent estimate after each renormalisation.
  std::vector<double> running;
  /// Largest relative deviation from the final estimate over the last 10% of the run.
  double final_drift = 0.0;
};

/// Raised when the running Lyapunov estimate has not settled.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest Lyapunov exponent by repeated renormalisation of a small separation
/// vector (Benettin). Throws ConvergenceError if the drift exceeds the tolerance.
LyapunovEstimate estimate_lyapunov_time(const Rhs& rhs, std::span<const double> x0,
                                        const LyapunovConfig& config);

}  // namespace stochparam
