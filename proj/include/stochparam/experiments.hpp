#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochparam/harness.hpp"

namespace stochparam {

enum class Scale { Desk, Full };
Scale parse_scale(const std::string& name);
std::string to_string(Scale scale);

/// Progress callback; receives one line per stage.
using Progress = std::function<void(const std::string&)>;

/// Lyapunov time of the unforced L63 system (default parameters, dt 1e-3).
/// Computed once per process.
double l63_lyapunov_time();

// Lorenz '63 experiments with synthetic error processes.

struct L63Setup {
  L63Spec system;
  double dt = 1e-3;
  std::vector<double> x0{1.0, 1.0, 1.0};
  std::size_t reference_steps = 0;
  std::size_t climate_steps = 0;
  /// max_lag is given in Lyapunov times and converted on use.
  ClimateOptions climate;
  double max_lag_lyapunov = 10.0;
  std::size_t n_instances = 0;
  std::size_t n_ens = 0;
  double separation_lyapunov = 10.0;
  double lead_spacing = 0.1;
  double max_lead = 3.0;
  std::vector<std::uint64_t> seeds;
  /// run size of the spatially correlated comparison
  std::size_t spatial_climate_steps = 0;
  std::vector<std::uint64_t> spatial_seeds;
  Ar2Spec truth_ar2;
  double var_phi = 0.999;
  double var_alpha = -0.45;
  double var_kappa = 1.81e-10;

  static L63Setup make(Scale scale, std::uint64_t seed = 0);
  nlohmann::json to_json() const;
};

/// Scores of several models against one truth, per seed.
struct ClimateComparison {
  std::vector<std::string> models;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<ScoreReport>> reports;  // [model][seed]

  ScoreReport mean(std::size_t model) const;
  std::size_t index(const std::string& model) const;
  nlohmann::json to_json() const;
  static ClimateComparison from_json(const nlohmann::json& j);
};

/// Unforced, natural AR(1) and AR(1)+ against L63 with AR(2) forcing.
ClimateComparison run_l63_memory_climate(const L63Setup& setup, const Progress& progress = {});
/// Unforced and white-in-space VAR(1) against L63 with correlated multiplicative VAR(1) forcing.
ClimateComparison run_l63_spatial_climate(const L63Setup& setup, const Progress& progress = {});

/// Energy-score curves of several ensembles over the same weather instances,
/// plus one example forecast per model.
struct WeatherComparison {
  std::vector<std::string> models;
  std::vector<ScoreCurve> curves;
  std::vector<EnsembleForecast> examples;
  double dt = 0.0;
  double time_unit = 1.0;
  std::size_t n_instances = 0;
  std::size_t n_ens = 0;

  std::size_t index(const std::string& model) const;
  nlohmann::json to_json() const;
  static WeatherComparison from_json(const nlohmann::json& j);
};

/// AR(2), natural AR(1) and AR(1)+ ensembles against L63 with AR(2) forcing.
WeatherComparison run_l63_memory_weather(const L63Setup& setup, std::uint64_t seed, const Progress& progress = {});

// Two-scale Lorenz '96 experiments with learned parameterisations.

enum class Family { Nonlocal, WeaklyLocal, StronglyLocal, PolyAr1 };
std::string to_string(Family family);
Family parse_family(const std::string& name);

struct L96Setup {
  L96Spec system;
  double dt = 1e-3;
  double dataset_length = 0.0;
  double dataset_spinup = 10.0;
  std::vector<std::size_t> hidden;
  std::size_t components = 0;
  TrainConfig train;
  std::vector<std::size_t> tp_grid{1, 10, 20, 30, 50, 100};
  std::size_t climate_steps = 0;
  ClimateOptions climate;
  std::size_t n_instances = 0;
  std::size_t n_ens = 0;
  double lead_spacing = 0.1;
  double lead_time = 1.0;
  double envelope_time = 2.0;
  std::vector<std::uint64_t> seeds;

  static L96Setup make(Scale scale, std::uint64_t seed = 0);
  nlohmann::json to_json() const;
};

/// Fits a parameterisation of the given family to a climate dataset.
std::shared_ptr<const Parameterisation> fit_family(Family family, const PairDataset& data, const L96Setup& setup,
                                                   std::uint64_t seed);

/// t_p sweeps per family and seed.
struct L96Sweeps {
  std::vector<std::string> families;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<SweepTable>> tables;  // [family][seed]

  std::size_t index(const std::string& family) const;
  /// Seed mean of the per-seed minimum over t_p of the given score.
  double best_mean(std::size_t family, const std::string& score) const;
  /// Seed mean of a score at each t_p of the grid.
  std::vector<double> mean_curve(std::size_t family, const std::string& score) const;
  nlohmann::json to_json() const;
  static L96Sweeps from_json(const nlohmann::json& j);
};

L96Sweeps run_l96_tp_sweeps(const L96Setup& setup, const std::vector<Family>& families,
                          const Progress& progress = {});

/// Nonlocal MDN ensembles on one weather instance, for each t_p in tp_values.
struct L96Envelopes {
  std::vector<std::size_t> tp_values;
  std::vector<EnsembleForecast> forecasts;
  double dt = 0.0;

  nlohmann::json to_json() const;
  static L96Envelopes from_json(const nlohmann::json& j);
};

L96Envelopes run_l96_envelopes(const L96Setup& setup, std::uint64_t seed, const std::vector<std::size_t>& tp_values,
                             const Progress& progress = {});

nlohmann::json forecast_to_json(const EnsembleForecast& forecast, std::size_t stride = 1);
EnsembleForecast forecast_from_json(const nlohmann::json& j);

double score_of(const ScoreReport& report, const std::string& score);

}  // namespace stochparam
