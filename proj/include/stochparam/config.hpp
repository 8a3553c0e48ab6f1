#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochparam/experiments.hpp"
#include "stochparam/harness.hpp"

namespace stochparam {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An error model as named in a config file.
///
/// kind: none, ar2, ar1, ar1-natural, ar1-plus, var1 (synthetic), or
/// mdn, deterministic, poly (loaded from `checkpoint`).
struct ErrorModelConfig {
  std::string kind = "none";
  Ar2Spec ar2;
  Ar1Spec ar1{0.9, 1.9e-5};
  double var_phi = 0.999;
  double var_alpha = -0.45;
  double var_kappa = 1.81e-10;
  std::string checkpoint;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  Scale scale = Scale::Desk;
  std::string output_dir = "out";

  std::string system = "l96";
  double dt = 1e-3;
  L63Spec l63;
  L96Spec l96;

  /// Error process driving the L63 truth; ignored for L96, whose truth is the two-scale system.
  ErrorModelConfig truth;
  ErrorModelConfig parameterisation;
  std::size_t tp = 1;
  std::vector<std::size_t> tp_grid{1, 10, 20, 30, 50, 100};

  struct Data {
    double length = 1000.0;
    double spinup = 10.0;
    std::string path = "climate.bin";
    std::size_t n_slices = 200;
    std::size_t slice_len = 5000;
  } data;

  struct Training {
    std::vector<std::size_t> hidden{64, 64};
    std::size_t components = 8;
    TrainConfig optimiser;
  } training;

  struct Simulation {
    std::size_t n_steps = 100'000;
    std::size_t save_stride = 10;
    std::vector<double> x0;
  } simulation;

  struct Evaluation {
    std::string mode = "both";
    std::size_t climate_steps = 1'000'000;
    ClimateOptions climate;
    std::size_t n_ens = 50;
    double lead_spacing = 0.1;
    double max_lead = 1.0;
    /// "model" or "lyapunov"
    std::string lead_unit = "model";
  } evaluation;

  static ExperimentConfig defaults(Scale scale = Scale::Desk);
  /// Overlays `j` on the defaults of its scale; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;

  std::size_t dim() const;
  ReducedModel reduced_model() const;
  std::filesystem::path resolve(const std::string& path) const;
  SweepMode sweep_mode() const;
  /// Lead-time unit in model time (the Lyapunov time for "lyapunov").
  double time_unit() const;
  std::vector<double> initial_state() const;
};

std::shared_ptr<const Parameterisation> make_parameterisation(const ErrorModelConfig& model,
                                                              const ExperimentConfig& config);

}  // namespace stochparam
