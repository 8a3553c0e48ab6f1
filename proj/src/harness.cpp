#include "stochparam/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace stochparam {

ReducedModel l63_model(const L63Spec& spec, double dt) { return {"l63", 3, dt, make_l63_rhs(spec)}; }

ReducedModel l96_reduced_model(const L96Spec& spec, double dt) {
  return {"l96-reduced", spec.I, dt, make_l96_reduced_rhs(spec)};
}

StepMap rk4_map(const ReducedModel& model) {
  auto stepper = std::make_shared<Rk4Stepper>(model.rhs, model.dim);
  const double dt = model.dt;
  return [stepper, dt](std::span<const double> x, std::span<double> out) { stepper->step(x, out, dt); };
}

// ---------------------------------------------------------------------------
// Samplers

namespace {

class ZeroSampler final : public ErrorSampler {
 public:
  void sample(std::span<const double>, std::span<double> m) override { std::fill(m.begin(), m.end(), 0.0); }
};

class ScalarArSampler final : public ErrorSampler {
 public:
  ScalarArSampler(const std::variant<Ar1Spec, Ar2Spec>& spec, std::size_t dim, const RngStream& rng)
      : spec_(spec) {
    for (std::size_t c = 0; c < dim; ++c) {
      RngStream child = rng.derive(StreamComponent::Forcing, c);
      states_.push_back(std::visit([&](const auto& s) { return sample_stationary_init(s, child); }, spec_));
    }
  }
  void sample(std::span<const double>, std::span<double> m) override {
    for (std::size_t c = 0; c < states_.size(); ++c) {
      if (const auto* ar2 = std::get_if<Ar2Spec>(&spec_)) {
        m[c] = ar2_step(states_[c], *ar2);
      } else {
        m[c] = ar1_step(states_[c], std::get<Ar1Spec>(spec_));
      }
    }
  }

 private:
  std::variant<Ar1Spec, Ar2Spec> spec_;
  std::vector<ArState> states_;
};

class Var1Sampler final : public ErrorSampler {
 public:
  Var1Sampler(const Var1Spec& spec, const RngStream& rng)
      : spec_(spec), state_(sample_stationary_init(spec, rng.derive(StreamComponent::Forcing, 0))),
        m_tilde_(spec.dim()) {}
  void sample(std::span<const double> x, std::span<double> m) override {
    var1_step(state_, spec_, m_tilde_);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = m_tilde_[i] * x[i];
  }

 private:
  const Var1Spec& spec_;
  Var1State state_;
  std::vector<double> m_tilde_;
};

class MdnSampler final : public ErrorSampler {
 public:
  MdnSampler(const MdnModel& model, std::size_t dim, RngStream rng, std::atomic<std::size_t>& draws)
      : model_(model), dim_(dim), rng_(std::move(rng)), draws_(draws) {
    per_site_ = model.arch().mode == Locality::StronglyLocal;
    if (per_site_) {
      input_.resize(1, static_cast<Eigen::Index>(dim));
    } else {
      input_.resize(static_cast<Eigen::Index>(dim), 1);
    }
  }
  void sample(std::span<const double> x, std::span<double> m) override {
    for (std::size_t i = 0; i < dim_; ++i) input_.data()[i] = x[i];
    model_.forward_batch(input_, params_);
    if (per_site_) {
      for (std::size_t i = 0; i < dim_; ++i) sample_mixture(params_[i], rng_, m.subspan(i, 1));
    } else {
      sample_mixture(params_[0], rng_, m);
    }
    draws_.fetch_add(1, std::memory_order_relaxed);
  }

 private:
  const MdnModel& model_;
  std::size_t dim_;
  RngStream rng_;
  std::atomic<std::size_t>& draws_;
  bool per_site_ = false;
  Eigen::MatrixXd input_;
  std::vector<MixtureParams> params_;
};

class DeterministicSampler final : public ErrorSampler {
 public:
  explicit DeterministicSampler(const DeterministicModel& model) : model_(model) {}
  void sample(std::span<const double> x, std::span<double> m) override {
    const auto out = model_.predict(x);
    std::copy(out.begin(), out.end(), m.begin());
  }

 private:
  const DeterministicModel& model_;
};

class PolyAr1Sampler final : public ErrorSampler {
 public:
  PolyAr1Sampler(const PolyAr1Model& model, std::size_t dim, RngStream rng)
      : model_(model), rng_(std::move(rng)), residual_(dim) {
    const double sd = std::sqrt(model.residual_var);
    for (auto& r : residual_) r = sd * rng_.normal();
  }
  void sample(std::span<const double> x, std::span<double> m) override {
    const double sd = std::sqrt(model_.innovation_var);
    for (std::size_t i = 0; i < residual_.size(); ++i) {
      residual_[i] = model_.phi * residual_[i] + sd * rng_.normal();
      m[i] = model_.mean(x[i]) + residual_[i];
    }
  }

 private:
  const PolyAr1Model& model_;
  RngStream rng_;
  std::vector<double> residual_;
};

class ReplaySampler final : public ErrorSampler {
 public:
  ReplaySampler(std::shared_ptr<const std::vector<double>> errors, std::size_t dim)
      : errors_(std::move(errors)), dim_(dim) {}
  void sample(std::span<const double>, std::span<double> m) override {
    if ((next_ + 1) * dim_ > errors_->size()) throw std::out_of_range("replay: recorded errors exhausted");
    std::copy_n(errors_->begin() + static_cast<std::ptrdiff_t>(next_ * dim_), dim_, m.begin());
    ++next_;
  }

 private:
  std::shared_ptr<const std::vector<double>> errors_;
  std::size_t dim_;
  std::size_t next_ = 0;
};

}  // namespace

std::unique_ptr<ErrorSampler> ZeroParameterisation::make_sampler(RngStream) const {
  return std::make_unique<ZeroSampler>();
}

ScalarArForcing::ScalarArForcing(std::variant<Ar1Spec, Ar2Spec> spec, std::size_t dim)
    : spec_(std::move(spec)), dim_(dim) {
  std::visit([](const auto& s) { s.validate(); }, spec_);
}

std::string ScalarArForcing::kind() const { return std::holds_alternative<Ar2Spec>(spec_) ? "ar2" : "ar1"; }

std::unique_ptr<ErrorSampler> ScalarArForcing::make_sampler(RngStream rng) const {
  return std::make_unique<ScalarArSampler>(spec_, dim_, rng);
}

std::unique_ptr<ErrorSampler> Var1MultiplicativeForcing::make_sampler(RngStream rng) const {
  return std::make_unique<Var1Sampler>(spec_, rng);
}


MdnParameterisation::MdnParameterisation(std::shared_ptr<const MdnModel> model, std::size_t dim)
    : model_(std::move(model)), dim_(dim) {
  const auto& arch = model_->arch();
  if (arch.mode != Locality::StronglyLocal && (arch.input_dim != dim || arch.target_dim != dim)) {
    throw std::invalid_argument("MdnParameterisation: model dimension does not match the resolved state");
  }
}

std::unique_ptr<ErrorSampler> MdnParameterisation::make_sampler(RngStream rng) const {
  return std::make_unique<MdnSampler>(*model_, dim_, std::move(rng), *draws_);
}

std::size_t MdnParameterisation::draws() const { return draws_->load(); }

DeterministicParameterisation::DeterministicParameterisation(std::shared_ptr<const DeterministicModel> model)
    : model_(std::move(model)) {}

std::unique_ptr<ErrorSampler> DeterministicParameterisation::make_sampler(RngStream) const {
  return std::make_unique<DeterministicSampler>(*model_);
}

std::unique_ptr<ErrorSampler> PolyAr1Parameterisation::make_sampler(RngStream rng) const {
  return std::make_unique<PolyAr1Sampler>(model_, dim_, std::move(rng));
}

ReplayParameterisation::ReplayParameterisation(std::shared_ptr<const std::vector<double>> errors, std::size_t dim)
    : errors_(std::move(errors)), dim_(dim) {
  if (dim_ == 0 || errors_->size() % dim_ != 0) throw std::invalid_argument("ReplayParameterisation: bad shape");
}

std::unique_ptr<ErrorSampler> ReplayParameterisation::make_sampler(RngStream) const {
  return std::make_unique<ReplaySampler>(errors_, dim_);
}

void ParamSpec::validate(std::size_t dim) const {
  if (!model) throw std::invalid_argument("ParamSpec: no parameterisation");
  if (tp < 1) throw std::invalid_argument("ParamSpec: t_p must be >= 1");
  if (model->dim() != dim) throw std::invalid_argument("ParamSpec: parameterisation dimension mismatch");
}

// ---------------------------------------------------------------------------
// Simulation

SimulationResult simulate_parameterised(const ReducedModel& model, std::span<const double> x0,
                                        const ParamSpec& spec, std::size_t n_steps, RngStream rng,
                                        std::size_t save_stride) {
  spec.validate(model.dim);
  if (x0.size() != model.dim) throw std::invalid_argument("simulate_parameterised: x0 dimension mismatch");
  if (save_stride < 1) throw std::invalid_argument("simulate_parameterised: save_stride must be >= 1");
  SimulationResult result{Trajectory(model.dim, model.dt * static_cast<double>(save_stride)), 0};
  result.trajectory.reserve(n_steps / save_stride + 1);
  result.trajectory.push_back(x0);

  auto sampler = spec.model->make_sampler(std::move(rng));
  Rk4Stepper stepper(model.rhs, model.dim);
  State x(x0.begin(), x0.end());
  State m(model.dim, 0.0);
  for (std::size_t n = 0; n < n_steps; ++n) {
    if (n % spec.tp == 0) {
      sampler->sample(x, m);
      ++result.sampling_events;
    }
    stepper.step(x, model.dt);
    for (std::size_t i = 0; i < model.dim; ++i) x[i] += m[i];
    if (!all_finite(x)) throw BlowUpError(n + 1, "simulate_parameterised (" + spec.model->kind() + ")");
    if ((n + 1) % save_stride == 0) result.trajectory.push_back(x);
  }
  return result;
}

PairDataset diagnose_model_error(const Trajectory& full, std::size_t resolved_dim, const StepMap& psi0) {
  if (full.size() < 2) throw std::invalid_argument("diagnose_model_error: trajectory too short");
  if (resolved_dim == 0 || resolved_dim > full.dim()) throw std::invalid_argument("diagnose_model_error: bad resolved_dim");
  PairDataset out;
  out.dim = resolved_dim;
  out.dt = full.dt();
  const std::size_t n = full.size() - 1;
  out.x.resize(n * resolved_dim);
  out.m.resize(n * resolved_dim);
  State pred(resolved_dim);
  for (std::size_t k = 0; k < n; ++k) {
    const auto xk = full.state(k).first(resolved_dim);
    const auto xk1 = full.state(k + 1).first(resolved_dim);
    psi0(xk, pred);
    for (std::size_t i = 0; i < resolved_dim; ++i) {
      out.x[k * resolved_dim + i] = xk[i];
      out.m[k * resolved_dim + i] = xk1[i] - pred[i];
    }
  }
  return out;
}

PairDataset generate_climate_dataset(const ClimateDatasetRequest& request) {
  const auto& spec = request.system;
  spec.validate();
  if (!(request.dt > 0.0) || !(request.length > 0.0) || request.spinup < 0.0) {
    throw std::invalid_argument("generate_climate_dataset: invalid dt, length or spin-up");
  }
  const std::size_t dim = spec.full_dim();
  const std::size_t ni = spec.I;
  const auto n_pairs = static_cast<std::size_t>(std::llround(request.length / request.dt));
  const auto n_spin = static_cast<std::size_t>(std::llround(request.spinup / request.dt));

  RngStream rng(request.seed, StreamComponent::Dataset);
  State x(dim);
  for (auto& v : x) v = rng.normal();
  Rk4Stepper full(make_l96_full_rhs(spec), dim);
  for (std::size_t n = 0; n < n_spin; ++n) {
    full.step(x, request.dt);
    if (!all_finite(x)) throw BlowUpError(n + 1, "generate_climate_dataset (spin-up)");
  }

  PairDataset out;
  out.dim = ni;
  out.dt = request.dt;
  out.meta = {"l96", request.seed, request.spinup};
  out.x.resize(n_pairs * ni);
  out.m.resize(n_pairs * ni);
  Rk4Stepper reduced(make_l96_reduced_rhs(spec), ni);
  State pred(ni);
  for (std::size_t n = 0; n < n_pairs; ++n) {
    std::copy_n(x.begin(), ni, out.x.begin() + static_cast<std::ptrdiff_t>(n * ni));
    reduced.step(std::span<const double>(x.data(), ni), pred, request.dt);
    full.step(x, request.dt);
    if (!all_finite(x)) throw BlowUpError(n_spin + n + 1, "generate_climate_dataset");
    for (std::size_t i = 0; i < ni; ++i) out.m[n * ni + i] = x[i] - pred[i];
  }
  return out;
}

PairDataset generate_forced_dataset(const ReducedModel& model, const Parameterisation& truth,
                                    std::span<const double> x0, double length, double spinup,
                                    std::uint64_t seed) {
  if (x0.size() != model.dim || truth.dim() != model.dim) {
    throw std::invalid_argument("generate_forced_dataset: dimension mismatch");
  }
  const auto n_pairs = static_cast<std::size_t>(std::llround(length / model.dt));
  const auto n_spin = static_cast<std::size_t>(std::llround(spinup / model.dt));
  auto sampler = truth.make_sampler(RngStream(seed, StreamComponent::Dataset));
  Rk4Stepper stepper(model.rhs, model.dim);
  const std::size_t d = model.dim;
  State x(x0.begin(), x0.end()), m(d);
  PairDataset out;
  out.dim = d;
  out.dt = model.dt;
  out.meta = {model.name + "+" + truth.kind(), seed, spinup};
  out.x.resize(n_pairs * d);
  out.m.resize(n_pairs * d);
  for (std::size_t n = 0; n < n_spin + n_pairs; ++n) {
    sampler->sample(x, m);
    if (n >= n_spin) {
      std::copy(x.begin(), x.end(), out.x.begin() + static_cast<std::ptrdiff_t>((n - n_spin) * d));
      std::copy(m.begin(), m.end(), out.m.begin() + static_cast<std::ptrdiff_t>((n - n_spin) * d));
    }
    stepper.step(x, model.dt);
    for (std::size_t i = 0; i < d; ++i) x[i] += m[i];
    if (!all_finite(x)) throw BlowUpError(n + 1, "generate_forced_dataset");
  }
  return out;
}

WeatherSet partition_weather(const PairDataset& climate, std::size_t n_slices, std::size_t slice_len) {
  if (slice_len == 0) throw std::invalid_argument("partition_weather: slice length must be positive");
  if (n_slices * slice_len > climate.size()) {
    throw std::invalid_argument("partition_weather: insufficient data (" + std::to_string(climate.size()) +
                                " pairs for " + std::to_string(n_slices) + " x " + std::to_string(slice_len) + ")");
  }
  WeatherSet ws;
  ws.slice_len = slice_len;
  for (std::size_t k = 0; k < n_slices; ++k) ws.starts.push_back(k * slice_len);
  return ws;
}

WeatherSet separated_weather(const PairDataset& climate, std::size_t n_instances, std::size_t separation,
                             std::size_t slice_len) {
  if (slice_len == 0 || separation < slice_len) {
    throw std::invalid_argument("separated_weather: need 0 < slice_len <= separation");
  }
  if (n_instances == 0 || (n_instances - 1) * separation + slice_len > climate.size()) {
    throw std::invalid_argument("separated_weather: insufficient data");
  }
  WeatherSet ws;
  ws.slice_len = slice_len;
  for (std::size_t k = 0; k < n_instances; ++k) ws.starts.push_back(k * separation);
  return ws;
}

std::size_t EnsembleForecast::n_finite() const {
  return static_cast<std::size_t>(std::count(finite.begin(), finite.end(), true));
}

namespace {

EnsembleForecast ensemble_setup(const ReducedModel& model, const PairDataset& truth, std::size_t start,
                                std::size_t n_steps, const ParamSpec& spec, std::size_t n_ens) {
  spec.validate(model.dim);
  if (truth.dim != model.dim) throw std::invalid_argument("run_ensemble: truth dimension mismatch");
  if (start + n_steps >= truth.size() + 1 || start >= truth.size()) {
    throw std::invalid_argument("run_ensemble: truth slice too short");
  }
  if (n_ens == 0) throw std::invalid_argument("run_ensemble: n_ens must be positive");
  EnsembleForecast f;
  f.dim = model.dim;
  f.n_states = n_steps + 1;
  f.truth.resize(f.n_states * f.dim);
  for (std::size_t k = 0; k < f.n_states; ++k) {
    // The last truth state may lie one past the stored pairs; reconstruct it from the final pair.
    if (start + k < truth.size()) {
      std::copy_n(truth.state(start + k).begin(), f.dim, f.truth.begin() + static_cast<std::ptrdiff_t>(k * f.dim));
    }
  }
  f.members.assign(n_ens, {});
  f.finite.assign(n_ens, true);
  return f;
}

void run_member(const ReducedModel& model, const PairDataset& truth, std::size_t start, std::size_t n_steps,
                const ParamSpec& spec, const RngStream& rng, std::size_t j, EnsembleForecast& f) {
  try {
    auto sim = simulate_parameterised(model, truth.state(start), spec, n_steps, rng.derive(StreamComponent::Ensemble, j));
    f.members[j] = sim.trajectory.data();
  } catch (const BlowUpError&) {
    f.members[j].assign(f.n_states * f.dim, std::numeric_limits<double>::quiet_NaN());
    f.finite[j] = false;
  }
}

void ensemble_finish(EnsembleForecast& f, const PairDataset& truth, std::size_t start, const ReducedModel& model) {
  const std::size_t last = start + f.n_states - 1;
  if (last >= truth.size()) {
    // X_{n+1} = Psi0(X_n) + M_n from the final stored pair.
    State pred(f.dim);
    rk4_map(model)(truth.state(last - 1), pred);
    for (std::size_t i = 0; i < f.dim; ++i) f.truth[(f.n_states - 1) * f.dim + i] = pred[i] + truth.error(last - 1)[i];
  }
  const std::size_t blown = f.n_members() - f.n_finite();
  if (blown * 10 > f.n_members()) {
    throw BlowUpError(0, "run_ensemble: " + std::to_string(blown) + " of " + std::to_string(f.n_members()) +
                             " members blew up");
  }
}

}  // namespace

EnsembleForecast run_ensemble(const ReducedModel& model, const PairDataset& truth, std::size_t start,
                              std::size_t n_steps, const ParamSpec& spec, std::size_t n_ens, const RngStream& rng) {
  EnsembleForecast f = ensemble_setup(model, truth, start, n_steps, spec, n_ens);
  const auto n = static_cast<std::ptrdiff_t>(n_ens);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    run_member(model, truth, start, n_steps, spec, rng, static_cast<std::size_t>(j), f);
  }
  ensemble_finish(f, truth, start, model);
  return f;
}

EnsembleForecast run_ensemble_serial(const ReducedModel& model, const PairDataset& truth, std::size_t start,
                                     std::size_t n_steps, const ParamSpec& spec, std::size_t n_ens,
                                     const RngStream& rng) {
  EnsembleForecast f = ensemble_setup(model, truth, start, n_steps, spec, n_ens);
  for (std::size_t j = 0; j < n_ens; ++j) run_member(model, truth, start, n_steps, spec, rng, j, f);
  ensemble_finish(f, truth, start, model);
  return f;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::size_t steps_for(double time, double dt) {
  return static_cast<std::size_t>(std::llround(time / dt));
}

std::vector<double> strided(std::span<const double> series, std::size_t stride) {
  std::vector<double> out;
  out.reserve(series.size() / stride + 1);
  for (std::size_t i = 0; i < series.size(); i += stride) out.push_back(series[i]);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ClimateReference make_climate_reference(std::span<const double> series, double dt, const ClimateOptions& options) {
  const std::size_t kde_stride = std::max<std::size_t>(1, steps_for(options.kde_stride, dt));
  const auto sub = strided(series, kde_stride);
  return {kde_fit(sub, options.grid_size), empirical_autocov(series, dt, options.max_lag, options.autocov_stride)};
}

ClimateSeries climate_series(const ReducedModel& model, const ParamSpec& spec, std::span<const double> x0,
                             std::size_t n_steps, RngStream rng, const ClimateOptions& options) {
  if (options.component >= model.dim) throw std::invalid_argument("climate_series: component out of range");
  if (options.autocov_stride < 1) throw std::invalid_argument("climate_series: autocov stride must be >= 1");
  const std::size_t spin = steps_for(options.spinup, model.dt);
  const std::size_t save = options.autocov_stride;
  if (spin % save != 0) throw std::invalid_argument("climate_series: spin-up must be a multiple of the autocov stride");
  auto sim = simulate_parameterised(model, x0, spec, spin + n_steps, std::move(rng), save);
  const auto comp = sim.trajectory.component(options.component);
  return {std::vector<double>(comp.begin() + static_cast<std::ptrdiff_t>(spin / save), comp.end()),
          model.dt * static_cast<double>(save), sim.sampling_events};
}

namespace {

ClimateReference reference_from_saved(const ClimateSeries& series, const ClimateOptions& options) {
  const std::size_t kde_stride = std::max<std::size_t>(1, steps_for(options.kde_stride, series.dt));
  return {kde_fit(strided(series.values, kde_stride), options.grid_size),
          empirical_autocov(series.values, series.dt, options.max_lag, 1)};
}

}  // namespace

ClimateReference simulate_climate_reference(const ReducedModel& model, const ParamSpec& truth,
                                            std::span<const double> x0, std::size_t n_steps, std::uint64_t seed,
                                            const ClimateOptions& options) {
  return reference_from_saved(
      climate_series(model, truth, x0, n_steps, RngStream(seed, StreamComponent::Reference), options), options);
}

ScoreReport evaluate_climate(const ReducedModel& model, const ParamSpec& spec, const ClimateReference& reference,
                             std::span<const double> x0, std::size_t n_steps, std::uint64_t seed,
                             const ClimateOptions& options) {
  const auto series =
      climate_series(model, spec, x0, n_steps, RngStream(seed, StreamComponent::Parameterisation), options);
  const auto stats = reference_from_saved(series, options);

  ScoreReport report;
  report.kl = kl_divergence(reference.pdf, stats.pdf);
  report.hellinger = hellinger_distance(reference.pdf, stats.pdf);
  report.d_r = d_r(reference.autocov, stats.autocov);
  report.metadata = {{"kind", spec.model->kind()},
                     {"tp", std::to_string(spec.tp)},
                     {"seed", std::to_string(seed)},
                     {"steps", std::to_string(n_steps)},
                     {"spinup_steps", std::to_string(steps_for(options.spinup, model.dt))},
                     {"dt", fmt(model.dt)},
                     {"sampling_events", std::to_string(series.sampling_events)}};
  return report;
}

std::vector<std::size_t> lead_grid(double spacing, double max_lead, double time_unit, double dt) {
  if (!(spacing > 0.0) || max_lead < 0.0) throw std::invalid_argument("lead_grid: invalid spacing");
  std::vector<std::size_t> out;
  const auto n = static_cast<std::size_t>(std::floor(max_lead / spacing + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) out.push_back(steps_for(static_cast<double>(k) * spacing * time_unit, dt));
  return out;
}

ScoreCurve evaluate_weather(const ReducedModel& model, const ParamSpec& spec, const PairDataset& truth,
                            const WeatherSet& weather, std::uint64_t seed, const WeatherOptions& options) {
  if (options.lead_steps.empty()) throw std::invalid_argument("evaluate_weather: no lead times");
  if (weather.size() == 0) throw std::invalid_argument("evaluate_weather: empty instance set");
  const std::size_t horizon = *std::max_element(options.lead_steps.begin(), options.lead_steps.end());
  if (horizon > weather.slice_len) throw std::invalid_argument("evaluate_weather: lead time beyond slice length");
  std::vector<double> lead_times;
  for (auto s : options.lead_steps) lead_times.push_back(static_cast<double>(s) * model.dt / options.time_unit);

  const RngStream root(seed, StreamComponent::Ensemble);
  std::vector<std::vector<EnsembleSnapshot>> instances(weather.size());
  for (std::size_t k = 0; k < weather.size(); ++k) {
    const RngStream rng = root.derive(StreamComponent::Ensemble, k);
    const std::size_t steps = std::max<std::size_t>(horizon, 1);
    const auto f = options.parallel
                       ? run_ensemble(model, truth, weather.starts[k], steps, spec, options.n_ens, rng)
                       : run_ensemble_serial(model, truth, weather.starts[k], steps, spec, options.n_ens, rng);
    auto& snaps = instances[k];
    for (auto lead : options.lead_steps) {
      EnsembleSnapshot s;
      s.dim = f.dim;
      const auto t = f.truth_state(lead);
      s.truth.assign(t.begin(), t.end());
      for (std::size_t j = 0; j < f.n_members(); ++j) {
        if (!f.finite[j]) continue;
        const auto st = f.member_state(j, lead);
        s.members.insert(s.members.end(), st.begin(), st.end());
      }
      snaps.push_back(std::move(s));
    }
  }
  return energy_score_curve(instances, lead_times);
}

SweepTable sweep_tp(const ReducedModel& model, std::shared_ptr<const Parameterisation> family,
                    const std::vector<std::size_t>& tp_values, SweepMode mode, const SweepInputs& inputs) {
  if (tp_values.empty()) throw std::invalid_argument("sweep_tp: empty t_p grid");
  const bool climate = mode != SweepMode::Weather;
  const bool weather = mode != SweepMode::Climate;
  if (climate && !inputs.reference) throw std::invalid_argument("sweep_tp: climate mode needs a reference");
  if (weather && (!inputs.truth || !inputs.weather)) throw std::invalid_argument("sweep_tp: weather mode needs truth data");
  SweepTable table;
  for (auto tp : tp_values) {
    ParamSpec spec{family, tp};
    SweepRow row;
    row.tp = tp;
    if (climate) {
      row.report = evaluate_climate(model, spec, *inputs.reference, inputs.x0, inputs.climate_steps, inputs.seed,
                                    inputs.climate);
    }
    if (weather) {
      row.report.energy = evaluate_weather(model, spec, *inputs.truth, *inputs.weather, inputs.seed, inputs.weather_options);
      row.energy_at_horizon = row.report.energy.mean.back();
    }
    row.report.metadata["tp"] = std::to_string(tp);
    row.report.metadata["kind"] = family->kind();
    table.rows.push_back(std::move(row));
  }
  auto argmin = [&](auto key) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      if (key(table.rows[i]) < key(table.rows[best])) best = i;
    }
    return best;
  };
  if (climate) {
    table.argmin_kl = argmin([](const SweepRow& r) { return r.report.kl; });
    table.argmin_hellinger = argmin([](const SweepRow& r) { return r.report.hellinger; });
    table.argmin_d_r = argmin([](const SweepRow& r) { return r.report.d_r; });
  }
  if (weather) table.argmin_energy = argmin([](const SweepRow& r) { return r.energy_at_horizon; });
  return table;
}

}  // namespace stochparam
