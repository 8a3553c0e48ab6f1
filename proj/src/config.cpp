#include "stochparam/config.hpp"

#include <fstream>
#include <set>

#include "stochparam/io.hpp"

namespace stochparam {

using nlohmann::json;

namespace {

// Reads fields of one JSON object, then rejects whatever was not read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& target) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      target = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(label(key) + " has the wrong type");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty : *it, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + label(key) + "'");
    }
  }

 private:
  std::string label(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_error_model(Section s, ErrorModelConfig& m) {
  s.get("kind", m.kind);
  s.get("checkpoint", m.checkpoint);
  {
    auto a = s.child("ar2");
    a.get("phi1", m.ar2.phi1);
    a.get("phi2", m.ar2.phi2);
    a.get("sigma_eps2", m.ar2.sigma_eps2);
    a.finish();
  }
  {
    auto a = s.child("ar1");
    a.get("phi", m.ar1.phi);
    a.get("innovation_var", m.ar1.innovation_var);
    a.finish();
  }
  {
    auto v = s.child("var1");
    v.get("phi", m.var_phi);
    v.get("alpha", m.var_alpha);
    v.get("kappa", m.var_kappa);
    v.finish();
  }
  s.finish();
}

json error_model_json(const ErrorModelConfig& m) {
  return {{"kind", m.kind},
          {"checkpoint", m.checkpoint},
          {"ar2", {{"phi1", m.ar2.phi1}, {"phi2", m.ar2.phi2}, {"sigma_eps2", m.ar2.sigma_eps2}}},
          {"ar1", {{"phi", m.ar1.phi}, {"innovation_var", m.ar1.innovation_var}}},
          {"var1", {{"phi", m.var_phi}, {"alpha", m.var_alpha}, {"kappa", m.var_kappa}}}};
}

const std::set<std::string> kSyntheticKinds{"none", "ar2", "ar1", "ar1-natural", "ar1-plus", "var1"};
const std::set<std::string> kLearnedKinds{"mdn", "deterministic", "poly"};

}  // namespace

ExperimentConfig ExperimentConfig::defaults(Scale scale) {
  ExperimentConfig c;
  c.scale = scale;
  c.evaluation.climate.spinup = 10.0;
  c.evaluation.climate.max_lag = 10.0;
  const auto l96 = L96Setup::make(scale);
  c.data.length = l96.dataset_length;
  c.data.n_slices = l96.n_instances;
  c.data.slice_len = static_cast<std::size_t>(l96.dataset_length / l96.dt) / l96.n_instances;
  c.training.hidden = l96.hidden;
  c.training.components = l96.components;
  c.training.optimiser = l96.train;
  c.evaluation.climate_steps = l96.climate_steps;
  c.evaluation.n_ens = l96.n_ens;
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  Section root(j, "");
  std::string scale = "desk";
  root.get("scale", scale);
  ExperimentConfig c = defaults(parse_scale(scale));
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  {
    auto s = root.child("system");
    s.get("name", c.system);
    s.get("dt", c.dt);
    auto a = s.child("l63");
    a.get("sigma", c.l63.sigma);
    a.get("rho", c.l63.rho);
    a.get("beta", c.l63.beta);
    a.finish();
    auto b = s.child("l96");
    b.get("h", c.l96.h);
    b.get("F", c.l96.F);
    b.get("b", c.l96.b);
    b.get("c", c.l96.c);
    b.get("I", c.l96.I);
    b.get("J", c.l96.J);
    b.finish();
    s.finish();
  }
  read_error_model(root.child("truth"), c.truth);
  read_error_model(root.child("parameterisation"), c.parameterisation);
  root.get("tp", c.tp);
  root.get("tp_grid", c.tp_grid);
  {
    auto d = root.child("data");
    d.get("length", c.data.length);
    d.get("spinup", c.data.spinup);
    d.get("path", c.data.path);
    d.get("n_slices", c.data.n_slices);
    d.get("slice_len", c.data.slice_len);
    d.finish();
  }
  {
    auto t = root.child("training");
    t.get("hidden", c.training.hidden);
    t.get("components", c.training.components);
    auto& o = c.training.optimiser;
    t.get("step_size", o.step_size);
    t.get("beta1", o.beta1);
    t.get("beta2", o.beta2);
    t.get("batch_size", o.batch_size);
    t.get("max_epochs", o.max_epochs);
    t.get("patience", o.patience);
    t.get("validation_fraction", o.validation_fraction);
    t.get("max_pairs", o.max_pairs);
    t.finish();
  }
  {
    auto s = root.child("simulation");
    s.get("n_steps", c.simulation.n_steps);
    s.get("save_stride", c.simulation.save_stride);
    s.get("x0", c.simulation.x0);
    s.finish();
  }
  {
    auto e = root.child("evaluation");
    auto& cl = c.evaluation.climate;
    e.get("mode", c.evaluation.mode);
    e.get("climate_steps", c.evaluation.climate_steps);
    e.get("spinup", cl.spinup);
    e.get("kde_stride", cl.kde_stride);
    e.get("autocov_stride", cl.autocov_stride);
    e.get("max_lag", cl.max_lag);
    e.get("grid_size", cl.grid_size);
    e.get("component", cl.component);
    e.get("n_ens", c.evaluation.n_ens);
    e.get("lead_spacing", c.evaluation.lead_spacing);
    e.get("max_lead", c.evaluation.max_lead);
    e.get("lead_unit", c.evaluation.lead_unit);
    e.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  const auto& o = training.optimiser;
  const auto& cl = evaluation.climate;
  return {{"seed", seed},
          {"scale", stochparam::to_string(scale)},
          {"output_dir", output_dir},
          {"system",
           {{"name", system},
            {"dt", dt},
            {"l63", {{"sigma", l63.sigma}, {"rho", l63.rho}, {"beta", l63.beta}}},
            {"l96", {{"h", l96.h}, {"F", l96.F}, {"b", l96.b}, {"c", l96.c}, {"I", l96.I}, {"J", l96.J}}}}},
          {"truth", error_model_json(truth)},
          {"parameterisation", error_model_json(parameterisation)},
          {"tp", tp},
          {"tp_grid", tp_grid},
          {"data",
           {{"length", data.length},
            {"spinup", data.spinup},
            {"path", data.path},
            {"n_slices", data.n_slices},
            {"slice_len", data.slice_len}}},
          {"training",
           {{"hidden", training.hidden},
            {"components", training.components},
            {"step_size", o.step_size},
            {"beta1", o.beta1},
            {"beta2", o.beta2},
            {"batch_size", o.batch_size},
            {"max_epochs", o.max_epochs},
            {"patience", o.patience},
            {"validation_fraction", o.validation_fraction},
            {"max_pairs", o.max_pairs}}},
          {"simulation", {{"n_steps", simulation.n_steps}, {"save_stride", simulation.save_stride}, {"x0", simulation.x0}}},
          {"evaluation",
           {{"mode", evaluation.mode},
            {"climate_steps", evaluation.climate_steps},
            {"spinup", cl.spinup},
            {"kde_stride", cl.kde_stride},
            {"autocov_stride", cl.autocov_stride},
            {"max_lag", cl.max_lag},
            {"grid_size", cl.grid_size},
            {"component", cl.component},
            {"n_ens", evaluation.n_ens},
            {"lead_spacing", evaluation.lead_spacing},
            {"max_lead", evaluation.max_lead},
            {"lead_unit", evaluation.lead_unit}}}};
}

void ExperimentConfig::validate() const {
  if (system != "l63" && system != "l96") throw ConfigError("system.name must be l63 or l96");
  if (!(dt > 0.0)) throw ConfigError("system.dt must be positive");
  if (system == "l96") {
    try {
      l96.validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("system.l96: ") + e.what());
    }
  }
  if (!kSyntheticKinds.count(truth.kind)) throw ConfigError("truth.kind '" + truth.kind + "' is not a synthetic process");
  if (!kSyntheticKinds.count(parameterisation.kind) && !kLearnedKinds.count(parameterisation.kind)) {
    throw ConfigError("parameterisation.kind '" + parameterisation.kind + "' is not recognised");
  }
  if (tp < 1) throw ConfigError("tp must be >= 1");
  if (tp_grid.empty() || std::find(tp_grid.begin(), tp_grid.end(), 0u) != tp_grid.end()) {
    throw ConfigError("tp_grid must be a non-empty list of positive integers");
  }
  if (!(data.length > 0.0) || data.spinup < 0.0) throw ConfigError("data.length must be positive");
  if (data.n_slices == 0 || data.slice_len == 0) throw ConfigError("data.n_slices and data.slice_len must be positive");
  if (training.components == 0 || training.hidden.empty()) throw ConfigError("training: empty architecture");
  try {
    training.optimiser.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
  if (simulation.save_stride == 0) throw ConfigError("simulation.save_stride must be positive");
  if (!simulation.x0.empty() && simulation.x0.size() != dim()) {
    throw ConfigError("simulation.x0 has " + std::to_string(simulation.x0.size()) + " entries, expected " +
                      std::to_string(dim()));
  }
  if (evaluation.mode != "climate" && evaluation.mode != "weather" && evaluation.mode != "both") {
    throw ConfigError("evaluation.mode must be climate, weather or both");
  }
  if (evaluation.lead_unit != "model" && evaluation.lead_unit != "lyapunov") {
    throw ConfigError("evaluation.lead_unit must be model or lyapunov");
  }
  if (evaluation.climate.component >= dim()) throw ConfigError("evaluation.component out of range");
  if (evaluation.climate.autocov_stride == 0 || evaluation.climate.grid_size < 2) {
    throw ConfigError("evaluation: autocov_stride and grid_size must be positive");
  }
  if (evaluation.n_ens == 0 || !(evaluation.lead_spacing > 0.0) || evaluation.max_lead < 0.0) {
    throw ConfigError("evaluation: invalid ensemble or lead-time settings");
  }
}

std::size_t ExperimentConfig::dim() const { return system == "l63" ? 3 : l96.I; }

ReducedModel ExperimentConfig::reduced_model() const {
  return system == "l63" ? l63_model(l63, dt) : l96_reduced_model(l96, dt);
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : std::filesystem::path(output_dir) / p;
}

SweepMode ExperimentConfig::sweep_mode() const {
  if (evaluation.mode == "climate") return SweepMode::Climate;
  if (evaluation.mode == "weather") return SweepMode::Weather;
  return SweepMode::Both;
}

double ExperimentConfig::time_unit() const {
  return evaluation.lead_unit == "lyapunov" ? l63_lyapunov_time() : 1.0;
}

std::vector<double> ExperimentConfig::initial_state() const {
  if (!simulation.x0.empty()) return simulation.x0;
  if (system == "l63") return {1.0, 1.0, 1.0};
  // near the unstable fixed point X_i = F, with a small perturbation
  std::vector<double> x(l96.I, l96.F);
  x[0] += 0.01;
  return x;
}

std::shared_ptr<const Parameterisation> make_parameterisation(const ErrorModelConfig& m, const ExperimentConfig& c) {
  const std::size_t d = c.dim();
  if (m.kind == "none") return std::make_shared<ZeroParameterisation>(d);
  if (m.kind == "ar2") return std::make_shared<ScalarArForcing>(m.ar2, d);
  if (m.kind == "ar1") return std::make_shared<ScalarArForcing>(m.ar1, d);
  if (m.kind == "ar1-natural") return std::make_shared<ScalarArForcing>(derive_ar1_natural(m.ar2), d);
  if (m.kind == "ar1-plus") return std::make_shared<ScalarArForcing>(derive_ar1_plus(m.ar2), d);
  if (m.kind == "var1") {
    return std::make_shared<Var1MultiplicativeForcing>(Var1Spec::equicorrelated(d, m.var_phi, m.var_alpha, m.var_kappa));
  }
  if (m.checkpoint.empty()) throw ConfigError("parameterisation.checkpoint is required for kind " + m.kind);
  const auto path = c.resolve(m.checkpoint);
  if (m.kind == "mdn") return std::make_shared<MdnParameterisation>(std::make_shared<const MdnModel>(load_mdn(path)), d);
  if (m.kind == "deterministic") {
    return std::make_shared<DeterministicParameterisation>(
        std::make_shared<const DeterministicModel>(load_deterministic(path)));
  }
  if (m.kind == "poly") return std::make_shared<PolyAr1Parameterisation>(load_poly_ar1(path), d);
  throw ConfigError("unknown parameterisation kind '" + m.kind + "'");
}

}  // namespace stochparam
