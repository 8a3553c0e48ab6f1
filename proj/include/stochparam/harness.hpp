#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stochparam/dataset.hpp"
#include "stochparam/dynamics.hpp"
#include "stochparam/forcing.hpp"
#include "stochparam/mdn.hpp"
#include "stochparam/poly_ar1.hpp"
#include "stochparam/rng.hpp"
#include "stochparam/scores.hpp"

namespace stochparam {

/// The imperfect model: its tendency and the step size defining Psi0 (one RK4 step).
struct ReducedModel {
  std::string name;
  std::size_t dim = 0;
  double dt = 1e-3;
  Rhs rhs;
};

ReducedModel l63_model(const L63Spec& spec = {}, double dt = 1e-3);
ReducedModel l96_reduced_model(const L96Spec& spec = {}, double dt = 1e-3);

/// A one-step map x -> Psi(x).
using StepMap = std::function<void(std::span<const double> x, std::span<double> out)>;
StepMap rk4_map(const ReducedModel& model);

/// Per-trajectory error generator, called at each sampling event with the
/// current resolved state; writes M_n.
class ErrorSampler {
 public:
  virtual ~ErrorSampler() = default;
  virtual void sample(std::span<const double> x, std::span<double> m) = 0;
};

/// A (possibly stochastic) model of M_n | X_n. Immutable and shareable;
/// per-trajectory state lives in the samplers it creates.
class Parameterisation {
 public:
  virtual ~Parameterisation() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t dim() const = 0;
  /// New sampler whose stochastic state (lags, residuals) is drawn from `rng`.
  virtual std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const = 0;
};

class ZeroParameterisation final : public Parameterisation {
 public:
  explicit ZeroParameterisation(std::size_t dim) : dim_(dim) {}
  std::string kind() const override { return "none"; }
  std::size_t dim() const override { return dim_; }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override;

 private:
  std::size_t dim_;
};

/// Additive scalar AR(1)/AR(2) forcing applied independently to each component,
/// with lags initialised from the stationary law.
class ScalarArForcing final : public Parameterisation {
 public:
  ScalarArForcing(std::variant<Ar1Spec, Ar2Spec> spec, std::size_t dim);
  std::string kind() const override;
  std::size_t dim() const override { return dim_; }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override;
  const std::variant<Ar1Spec, Ar2Spec>& spec() const { return spec_; }

 private:
  std::variant<Ar1Spec, Ar2Spec> spec_;
  std::size_t dim_;
};

/// Multiplicative forcing M_n = M~_n * X_n with M~ a VAR(1) process.
class Var1MultiplicativeForcing final : public Parameterisation {
 public:
  explicit Var1MultiplicativeForcing(Var1Spec spec) : spec_(std::move(spec)) {}
  std::string kind() const override { return "var1"; }
  std::size_t dim() const override { return spec_.dim(); }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override;
  const Var1Spec& spec() const { return spec_; }

 private:
  Var1Spec spec_;
};

/// Draws M_n from a trained MDN; strongly local models are applied per site.
class MdnParameterisation final : public Parameterisation {
 public:
  MdnParameterisation(std::shared_ptr<const MdnModel> model, std::size_t dim);
  std::string kind() const override { return "mdn-" + to_string(model_->arch().mode); }
  std::size_t dim() const override { return dim_; }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override;
  const MdnModel& model() const { return *model_; }
  /// Number of conditional-density draws made by all samplers so far.
  std::size_t draws() const;

 private:
  std::shared_ptr<const MdnModel> model_;
  std::size_t dim_;
  std::shared_ptr<std::atomic<std::size_t>> draws_ = std::make_shared<std::atomic<std::size_t>>(0);
};

class DeterministicParameterisation final : public Parameterisation {
 public:
  explicit DeterministicParameterisation(std::shared_ptr<const DeterministicModel> model);
  std::string kind() const override { return "deterministic"; }
  std::size_t dim() const override { return model_->net().output_dim(); }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override;

 private:
  std::shared_ptr<const DeterministicModel> model_;
};

class PolyAr1Parameterisation final : public Parameterisation {
 public:
  PolyAr1Parameterisation(PolyAr1Model model, std::size_t dim) : model_(std::move(model)), dim_(dim) {}
  std::string kind() const override { return "poly-ar1"; }
  std::size_t dim() const override { return dim_; }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override;
  const PolyAr1Model& model() const { return model_; }

 private:
  PolyAr1Model model_;
  std::size_t dim_;
};

/// Replays a recorded error sequence (row-major, one M_n per sampling event).
class ReplayParameterisation final : public Parameterisation {
 public:
  ReplayParameterisation(std::shared_ptr<const std::vector<double>> errors, std::size_t dim);
  std::string kind() const override { return "replay"; }
  std::size_t dim() const override { return dim_; }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override;

 private:
  std::shared_ptr<const std::vector<double>> errors_;
  std::size_t dim_;
};

/// A parameterisation together with its hold length t_p.
struct ParamSpec {
  std::shared_ptr<const Parameterisation> model;
  std::size_t tp = 1;

  void validate(std::size_t dim) const;
};

struct SimulationResult {
  Trajectory trajectory;
  std::size_t sampling_events = 0;
};

/// X_{n+1} = Psi0(X_n) + M_n, resampling M_n when n mod t_p == 0 and holding it
/// otherwise. States 0, save_stride, 2 save_stride, ... are stored.
/// Throws BlowUpError (with the step index) on a non-finite state.
SimulationResult simulate_parameterised(const ReducedModel& model, std::span<const double> x0,
                                        const ParamSpec& spec, std::size_t n_steps, RngStream rng,
                                        std::size_t save_stride = 1);

/// M_n = X_{n+1} - Psi0(X_n) along the resolved block (first resolved_dim
/// components) of a full-system trajectory.
PairDataset diagnose_model_error(const Trajectory& full, std::size_t resolved_dim, const StepMap& psi0);

struct ClimateDatasetRequest {
  L96Spec system;
  double dt = 1e-3;
  double length = 1e4;
  double spinup = 10.0;
  std::uint64_t seed = 0;
};

/// Integrates the two-scale L96 system from iid N(0,1) initial values,
/// discards the spin-up and diagnoses (X_n, M_n) against the reduced model.
PairDataset generate_climate_dataset(const ClimateDatasetRequest& request);

/// Trajectory of a reduced model driven by a known error process, recorded as
/// (X_n, M_n) pairs after discarding `spinup` time units.
PairDataset generate_forced_dataset(const ReducedModel& model, const Parameterisation& truth,
                                    std::span<const double> x0, double length, double spinup,
                                    std::uint64_t seed);

/// Contiguous slices of a dataset used as weather instances.
struct WeatherSet {
  std::vector<std::size_t> starts;
  std::size_t slice_len = 0;
  std::size_t size() const { return starts.size(); }
};

/// n_slices contiguous non-overlapping slices [k L, (k+1) L).
WeatherSet partition_weather(const PairDataset& climate, std::size_t n_slices, std::size_t slice_len);
/// n_instances slices starting `separation` steps apart.
WeatherSet separated_weather(const PairDataset& climate, std::size_t n_instances, std::size_t separation,
                             std::size_t slice_len);

struct EnsembleForecast {
  std::size_t dim = 0;
  std::size_t n_states = 0;
  std::vector<double> truth;                 // n_states x dim
  std::vector<std::vector<double>> members;  // per member: n_states x dim
  std::vector<bool> finite;

  std::size_t n_members() const { return members.size(); }
  std::size_t n_finite() const;
  std::span<const double> member_state(std::size_t j, std::size_t k) const {
    return {members[j].data() + k * dim, dim};
  }
  std::span<const double> truth_state(std::size_t k) const { return {truth.data() + k * dim, dim}; }
};

/// n_ens parameterised runs of n_steps from the truth state at `start`, member j
/// using RNG stream (rng, Ensemble, j). Members run in parallel; a member that
/// blows up is marked non-finite, and more than 10% blow-ups throw BlowUpError.
EnsembleForecast run_ensemble(const ReducedModel& model, const PairDataset& truth, std::size_t start,
                              std::size_t n_steps, const ParamSpec& spec, std::size_t n_ens,
                              const RngStream& rng);
EnsembleForecast run_ensemble_serial(const ReducedModel& model, const PairDataset& truth, std::size_t start,
                                     std::size_t n_steps, const ParamSpec& spec, std::size_t n_ens,
                                     const RngStream& rng);

struct ClimateOptions {
  double spinup = 10.0;
  /// KDE samples are taken every kde_stride time units.
  double kde_stride = 0.1;
  std::size_t autocov_stride = 10;
  double max_lag = 10.0;
  std::size_t grid_size = 2048;
  std::size_t component = 0;
};

/// Stationary statistics of a reference series.
struct ClimateReference {
  DensityEstimate pdf;
  AutocovCurve autocov;
};

/// From a series sampled every dt (e.g. a dataset component); applies both strides.
ClimateReference make_climate_reference(std::span<const double> series, double dt, const ClimateOptions& options);

/// Post-spin-up series of the chosen component, saved every autocov_stride steps.
struct ClimateSeries {
  std::vector<double> values;
  double dt = 0.0;
  std::size_t sampling_events = 0;
};
ClimateSeries climate_series(const ReducedModel& model, const ParamSpec& spec, std::span<const double> x0,
                             std::size_t n_steps, RngStream rng, const ClimateOptions& options);

/// Reference statistics from a simulated truth run (RNG stream (seed, Reference)).
ClimateReference simulate_climate_reference(const ReducedModel& model, const ParamSpec& truth,
                                            std::span<const double> x0, std::size_t n_steps, std::uint64_t seed,
                                            const ClimateOptions& options);

/// Named scalar scores plus an optional energy-score curve and provenance.
struct ScoreReport {
  double kl = 0.0;
  double hellinger = 0.0;
  double d_r = 0.0;
  ScoreCurve energy;
  std::map<std::string, std::string> metadata;
};

/// Simulates the spec for n_steps (after a spin-up) from x0 and scores the
/// first-component pdf and autocovariance against the reference.
ScoreReport evaluate_climate(const ReducedModel& model, const ParamSpec& spec, const ClimateReference& reference,
                             std::span<const double> x0, std::size_t n_steps, std::uint64_t seed,
                             const ClimateOptions& options);

struct WeatherOptions {
  std::size_t n_ens = 50;
  /// Lead times in integration steps; the first should be 0.
  std::vector<std::size_t> lead_steps;
  /// Reported lead time = lead_steps * dt / time_unit (e.g. the Lyapunov time).
  double time_unit = 1.0;
  bool parallel = true;
};

/// Uniform lead grid 0, spacing, 2 spacing, ... up to max_lead (time units of `time_unit`).
std::vector<std::size_t> lead_grid(double spacing, double max_lead, double time_unit, double dt);

/// Mean energy score over weather instances at each lead time.
ScoreCurve evaluate_weather(const ReducedModel& model, const ParamSpec& spec, const PairDataset& truth,
                            const WeatherSet& weather, std::uint64_t seed, const WeatherOptions& options);

enum class SweepMode { Climate, Weather, Both };

struct SweepInputs {
  const ClimateReference* reference = nullptr;
  std::vector<double> x0;
  std::size_t climate_steps = 0;
  ClimateOptions climate;
  const PairDataset* truth = nullptr;
  const WeatherSet* weather = nullptr;
  WeatherOptions weather_options;
  std::uint64_t seed = 0;
};

struct SweepRow {
  std::size_t tp = 1;
  ScoreReport report;
  /// Energy score at the final lead time (weather modes).
  double energy_at_horizon = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::size_t argmin_kl = 0;
  std::size_t argmin_hellinger = 0;
  std::size_t argmin_d_r = 0;
  std::size_t argmin_energy = 0;
};

SweepTable sweep_tp(const ReducedModel& model, std::shared_ptr<const Parameterisation> family,
                    const std::vector<std::size_t>& tp_values, SweepMode mode, const SweepInputs& inputs);

}  // namespace stochparam
