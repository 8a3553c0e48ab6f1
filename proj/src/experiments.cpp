#include "stochparam/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "stochparam/io.hpp"

namespace stochparam {

using nlohmann::json;

Scale parse_scale(const std::string& name) {
  if (name == "desk") return Scale::Desk;
  if (name == "full") return Scale::Full;
  throw std::invalid_argument("unknown scale '" + name + "' (expected desk or full)");
}

std::string to_string(Scale scale) { return scale == Scale::Desk ? "desk" : "full"; }

double l63_lyapunov_time() {
  static std::once_flag once;
  static double value = 0.0;
  std::call_once(once, [] {
    LyapunovConfig cfg;
    const State x0{1.0, 1.0, 1.0};
    value = *estimate_lyapunov_time(make_l63_rhs(), x0, cfg).lyapunov_time;
  });
  return value;
}

namespace {

void report(const Progress& progress, const std::string& line) {
  if (progress) progress(line);
}

std::vector<std::uint64_t> seed_list(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(seed + i);
  return out;
}

std::size_t steps_of(double time, double dt) { return static_cast<std::size_t>(std::llround(time / dt)); }

json climate_options_json(const ClimateOptions& c) {
  return {{"spinup", c.spinup},       {"kde_stride", c.kde_stride}, {"autocov_stride", c.autocov_stride},
          {"max_lag", c.max_lag},     {"grid_size", c.grid_size},   {"component", c.component}};
}

std::shared_ptr<const Parameterisation> ar_forcing(std::variant<Ar1Spec, Ar2Spec> spec) {
  return std::make_shared<ScalarArForcing>(std::move(spec), 3);
}

ClimateComparison compare_climate(const L63Setup& setup, const ParamSpec& truth,
                                  const std::vector<std::pair<std::string, ParamSpec>>& models,
                                  const std::vector<std::uint64_t>& seeds, std::size_t climate_steps,
                                  const Progress& progress) {
  const auto model = l63_model(setup.system, setup.dt);
  ClimateOptions options = setup.climate;
  options.max_lag = setup.max_lag_lyapunov * l63_lyapunov_time();
  ClimateComparison out;
  out.seeds = seeds;
  out.reports.resize(models.size());
  for (const auto& [name, spec] : models) out.models.push_back(name);
  for (auto seed : seeds) {
    report(progress, "reference run, seed " + std::to_string(seed));
    const auto ref = simulate_climate_reference(model, truth, setup.x0, setup.reference_steps, seed, options);
    for (std::size_t i = 0; i < models.size(); ++i) {
      report(progress, models[i].first + ", seed " + std::to_string(seed));
      out.reports[i].push_back(
          evaluate_climate(model, models[i].second, ref, setup.x0, climate_steps, seed, options));
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

L63Setup L63Setup::make(Scale scale, std::uint64_t seed) {
  L63Setup s;
  s.climate.spinup = 10.0;
  s.climate.kde_stride = 0.1;
  s.climate.autocov_stride = 10;
  s.climate.grid_size = 2048;
  if (scale == Scale::Desk) {
    s.reference_steps = 100'000'000;
    s.climate_steps = 30'000'000;
    s.n_instances = 200;
    s.n_ens = 50;
    s.seeds = seed_list(seed, 3);
    s.spatial_climate_steps = 100'000'000;
    s.spatial_seeds = seed_list(seed, 16);
  } else {
    s.reference_steps = 100'000'000;
    s.climate_steps = 100'000'000;
    s.n_instances = 1000;
    s.n_ens = 100;
    s.seeds = seed_list(seed, 5);
    s.spatial_climate_steps = 100'000'000;
    s.spatial_seeds = seed_list(seed, 32);
  }
  return s;
}

json L63Setup::to_json() const {
  return {{"system", {{"sigma", system.sigma}, {"rho", system.rho}, {"beta", system.beta}}},
          {"dt", dt},
          {"x0", x0},
          {"reference_steps", reference_steps},
          {"climate_steps", climate_steps},
          {"climate", climate_options_json(climate)},
          {"max_lag_lyapunov", max_lag_lyapunov},
          {"n_instances", n_instances},
          {"n_ens", n_ens},
          {"separation_lyapunov", separation_lyapunov},
          {"lead_spacing", lead_spacing},
          {"max_lead", max_lead},
          {"seeds", seeds},
          {"spatial_climate_steps", spatial_climate_steps},
          {"spatial_seeds", spatial_seeds},
          {"truth_ar2", {{"phi1", truth_ar2.phi1}, {"phi2", truth_ar2.phi2}, {"sigma_eps2", truth_ar2.sigma_eps2}}},
          {"var1", {{"phi", var_phi}, {"alpha", var_alpha}, {"kappa", var_kappa}}}};
}

ScoreReport ClimateComparison::mean(std::size_t model) const {
  ScoreReport m;
  const auto& rs = reports.at(model);
  if (rs.empty()) return m;
  for (const auto& r : rs) {
    m.kl += r.kl;
    m.hellinger += r.hellinger;
    m.d_r += r.d_r;
  }
  const auto n = static_cast<double>(rs.size());
  m.kl /= n;
  m.hellinger /= n;
  m.d_r /= n;
  m.metadata = {{"model", models.at(model)}, {"seeds", std::to_string(rs.size())}};
  return m;
}

std::size_t ClimateComparison::index(const std::string& model) const {
  const auto it = std::find(models.begin(), models.end(), model);
  if (it == models.end()) throw std::out_of_range("no model '" + model + "'");
  return static_cast<std::size_t>(it - models.begin());
}

json ClimateComparison::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < models.size(); ++i) {
    json per_seed = json::array();
    for (const auto& r : reports[i]) per_seed.push_back(report_to_json(r));
    rows.push_back({{"model", models[i]}, {"mean", report_to_json(mean(i))}, {"runs", per_seed}});
  }
  return {{"seeds", seeds}, {"models", rows}};
}

ClimateComparison ClimateComparison::from_json(const json& j) {
  ClimateComparison c;
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& row : j.at("models")) {
    c.models.push_back(row.at("model").get<std::string>());
    std::vector<ScoreReport> runs;
    for (const auto& r : row.at("runs")) runs.push_back(report_from_json(r));
    c.reports.push_back(std::move(runs));
  }
  return c;
}

ClimateComparison run_l63_memory_climate(const L63Setup& setup, const Progress& progress) {
  const auto& ar2 = setup.truth_ar2;
  return compare_climate(setup, {ar_forcing(ar2), 1},
                         {{"unforced", {std::make_shared<ZeroParameterisation>(3), 1}},
                          {"ar1", {ar_forcing(derive_ar1_natural(ar2)), 1}},
                          {"ar1-plus", {ar_forcing(derive_ar1_plus(ar2)), 1}}},
                         setup.seeds, setup.climate_steps, progress);
}

ClimateComparison run_l63_spatial_climate(const L63Setup& setup, const Progress& progress) {
  auto truth = std::make_shared<Var1MultiplicativeForcing>(
      Var1Spec::equicorrelated(3, setup.var_phi, setup.var_alpha, setup.var_kappa));
  auto local =
      std::make_shared<Var1MultiplicativeForcing>(Var1Spec::equicorrelated(3, setup.var_phi, 0.0, setup.var_kappa));
  return compare_climate(setup, {truth, 1},
                         {{"unforced", {std::make_shared<ZeroParameterisation>(3), 1}}, {"local-var1", {local, 1}}},
                         setup.spatial_seeds, setup.spatial_climate_steps, progress);
}

// ---------------------------------------------------------------------------

std::size_t WeatherComparison::index(const std::string& model) const {
  const auto it = std::find(models.begin(), models.end(), model);
  if (it == models.end()) throw std::out_of_range("no model '" + model + "'");
  return static_cast<std::size_t>(it - models.begin());
}

json forecast_to_json(const EnsembleForecast& f, std::size_t stride) {
  if (stride < 1) throw std::invalid_argument("forecast_to_json: stride must be >= 1");
  auto thin = [&](std::span<const double> rows) {
    std::vector<double> out;
    for (std::size_t k = 0; k < f.n_states; k += stride) {
      out.insert(out.end(), rows.begin() + static_cast<std::ptrdiff_t>(k * f.dim),
                 rows.begin() + static_cast<std::ptrdiff_t>((k + 1) * f.dim));
    }
    return out;
  };
  json members = json::array();
  for (const auto& m : f.members) members.push_back(thin(m));
  return {{"dim", f.dim}, {"stride", stride}, {"truth", thin(f.truth)}, {"members", members},
          {"finite", std::vector<bool>(f.finite.begin(), f.finite.end())}};
}

EnsembleForecast forecast_from_json(const json& j) {
  EnsembleForecast f;
  f.dim = j.at("dim").get<std::size_t>();
  f.truth = j.at("truth").get<std::vector<double>>();
  if (f.dim == 0 || f.truth.size() % f.dim != 0) throw FormatError("forecast: malformed truth block");
  f.n_states = f.truth.size() / f.dim;
  for (const auto& m : j.at("members")) {
    f.members.push_back(m.get<std::vector<double>>());
    if (f.members.back().size() != f.truth.size()) throw FormatError("forecast: member length mismatch");
  }
  const auto finite = j.at("finite").get<std::vector<bool>>();
  f.finite.assign(finite.begin(), finite.end());
  return f;
}

json WeatherComparison::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < models.size(); ++i) {
    rows.push_back({{"model", models[i]},
                    {"curve", {{"lead_times", curves[i].lead_times}, {"mean", curves[i].mean},
                               {"std_error", curves[i].std_error}}},
                    {"example", i < examples.size() ? forecast_to_json(examples[i], 10) : json()}});
  }
  return {{"dt", dt * 10}, {"time_unit", time_unit}, {"n_instances", n_instances}, {"n_ens", n_ens}, {"models", rows}};
}

WeatherComparison WeatherComparison::from_json(const json& j) {
  WeatherComparison w;
  w.dt = j.at("dt").get<double>();
  w.time_unit = j.at("time_unit").get<double>();
  w.n_instances = j.at("n_instances").get<std::size_t>();
  w.n_ens = j.at("n_ens").get<std::size_t>();
  for (const auto& row : j.at("models")) {
    w.models.push_back(row.at("model").get<std::string>());
    ScoreCurve c;
    c.lead_times = row.at("curve").at("lead_times").get<std::vector<double>>();
    c.mean = row.at("curve").at("mean").get<std::vector<double>>();
    c.std_error = row.at("curve").at("std_error").get<std::vector<double>>();
    w.curves.push_back(std::move(c));
    if (!row.at("example").is_null()) w.examples.push_back(forecast_from_json(row.at("example")));
  }
  return w;
}

WeatherComparison run_l63_memory_weather(const L63Setup& setup, std::uint64_t seed, const Progress& progress) {
  const auto model = l63_model(setup.system, setup.dt);
  const double T = l63_lyapunov_time();
  const auto& ar2 = setup.truth_ar2;
  auto truth = ar_forcing(ar2);

  WeatherOptions wopt;
  wopt.n_ens = setup.n_ens;
  wopt.lead_steps = lead_grid(setup.lead_spacing, setup.max_lead, T, setup.dt);
  wopt.time_unit = T;
  const std::size_t horizon = wopt.lead_steps.back();
  const std::size_t separation = std::max(steps_of(setup.separation_lyapunov * T, setup.dt), horizon);
  const std::size_t n_pairs = (setup.n_instances - 1) * separation + horizon + 1;

  report(progress, "truth trajectory (" + std::to_string(n_pairs) + " steps)");
  const auto data = generate_forced_dataset(model, *truth, setup.x0, static_cast<double>(n_pairs) * setup.dt,
                                            setup.climate.spinup, seed);
  const auto weather = separated_weather(data, setup.n_instances, separation, horizon);

  const std::vector<std::pair<std::string, std::shared_ptr<const Parameterisation>>> models{
      {"ar2", truth}, {"ar1", ar_forcing(derive_ar1_natural(ar2))}, {"ar1-plus", ar_forcing(derive_ar1_plus(ar2))}};
  WeatherComparison out;
  out.dt = setup.dt;
  out.time_unit = T;
  out.n_instances = setup.n_instances;
  out.n_ens = setup.n_ens;
  const RngStream root(seed, StreamComponent::Ensemble);
  for (const auto& [name, param] : models) {
    report(progress, "ensembles: " + name);
    const ParamSpec spec{param, 1};
    out.models.push_back(name);
    out.curves.push_back(evaluate_weather(model, spec, data, weather, seed, wopt));
    out.examples.push_back(run_ensemble(model, data, weather.starts[0], horizon, spec, setup.n_ens,
                                        root.derive(StreamComponent::Ensemble, 0)));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(Family family) {
  switch (family) {
    case Family::Nonlocal: return "nonlocal";
    case Family::WeaklyLocal: return "weak";
    case Family::StronglyLocal: return "strong";
    case Family::PolyAr1: return "poly";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  if (name == "nonlocal") return Family::Nonlocal;
  if (name == "weak") return Family::WeaklyLocal;
  if (name == "strong") return Family::StronglyLocal;
  if (name == "poly") return Family::PolyAr1;
  throw std::invalid_argument("unknown parameterisation family '" + name + "'");
}

L96Setup L96Setup::make(Scale scale, std::uint64_t seed) {
  L96Setup s;
  s.climate.spinup = 10.0;
  s.climate.kde_stride = 0.1;
  s.climate.autocov_stride = 10;
  s.climate.max_lag = 10.0;
  s.climate.grid_size = 2048;
  if (scale == Scale::Desk) {
    s.dataset_length = 1000.0;
    s.hidden = {64, 64};
    s.components = 8;
    s.train.batch_size = 512;
    s.train.max_epochs = 30;
    s.train.patience = 5;
    s.train.max_pairs = 200'000;
    s.climate_steps = 1'000'000;
    s.n_instances = 200;
    s.n_ens = 50;
    s.seeds = seed_list(seed, 3);
  } else {
    s.dataset_length = 10'000.0;
    s.hidden = {128, 128, 128, 128};
    s.components = 32;
    s.train.batch_size = 1024;
    s.train.max_epochs = 100;
    s.train.patience = 10;
    s.train.max_pairs = 0;
    s.climate_steps = 10'000'000;
    s.n_instances = 1000;
    s.n_ens = 100;
    s.seeds = seed_list(seed, 3);
  }
  return s;
}

json L96Setup::to_json() const {
  return {{"system", {{"h", system.h}, {"F", system.F}, {"b", system.b}, {"c", system.c}, {"I", system.I}, {"J", system.J}}},
          {"dt", dt},
          {"dataset_length", dataset_length},
          {"dataset_spinup", dataset_spinup},
          {"hidden", hidden},
          {"components", components},
          {"train",
           {{"step_size", train.step_size},
            {"batch_size", train.batch_size},
            {"max_epochs", train.max_epochs},
            {"patience", train.patience},
            {"validation_fraction", train.validation_fraction},
            {"max_pairs", train.max_pairs}}},
          {"tp_grid", tp_grid},
          {"climate_steps", climate_steps},
          {"climate", climate_options_json(climate)},
          {"n_instances", n_instances},
          {"n_ens", n_ens},
          {"lead_spacing", lead_spacing},
          {"lead_time", lead_time},
          {"envelope_time", envelope_time},
          {"seeds", seeds}};
}

std::shared_ptr<const Parameterisation> fit_family(Family family, const PairDataset& data, const L96Setup& setup,
                                                   std::uint64_t seed) {
  TrainConfig cfg = setup.train;
  cfg.seed = seed;
  switch (family) {
    case Family::Nonlocal:
    case Family::WeaklyLocal: {
      const auto mode = family == Family::Nonlocal ? Locality::Nonlocal : Locality::WeaklyLocal;
      auto m = std::make_shared<const MdnModel>(train_mdn(data, cfg, mode, setup.hidden, setup.components));
      return std::make_shared<MdnParameterisation>(m, data.dim);
    }
    case Family::StronglyLocal: {
      // pooled rows: one per site and time step
      cfg.max_pairs *= data.dim;
      auto m = std::make_shared<const MdnModel>(
          train_mdn(data, cfg, Locality::StronglyLocal, setup.hidden, setup.components));
      return std::make_shared<MdnParameterisation>(m, data.dim);
    }
    case Family::PolyAr1:
      return std::make_shared<PolyAr1Parameterisation>(fit_poly_ar1(data, 3), data.dim);
  }
  throw std::invalid_argument("fit_family: unknown family");
}

double score_of(const ScoreReport& r, const std::string& score) {
  if (score == "kl") return r.kl;
  if (score == "hellinger") return r.hellinger;
  if (score == "d_r") return r.d_r;
  if (score == "energy") return r.energy.mean.empty() ? 0.0 : r.energy.mean.back();
  throw std::invalid_argument("unknown score '" + score + "'");
}

std::size_t L96Sweeps::index(const std::string& family) const {
  const auto it = std::find(families.begin(), families.end(), family);
  if (it == families.end()) throw std::out_of_range("no family '" + family + "'");
  return static_cast<std::size_t>(it - families.begin());
}

std::vector<double> L96Sweeps::mean_curve(std::size_t family, const std::string& score) const {
  const auto& ts = tables.at(family);
  std::vector<double> out;
  if (ts.empty()) return out;
  out.assign(ts.front().rows.size(), 0.0);
  for (const auto& t : ts) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += score_of(t.rows.at(i).report, score);
  }
  for (auto& v : out) v /= static_cast<double>(ts.size());
  return out;
}

double L96Sweeps::best_mean(std::size_t family, const std::string& score) const {
  const auto& ts = tables.at(family);
  double sum = 0.0;
  for (const auto& t : ts) {
    double best = INFINITY;
    for (const auto& row : t.rows) best = std::min(best, score_of(row.report, score));
    sum += best;
  }
  return ts.empty() ? 0.0 : sum / static_cast<double>(ts.size());
}

json L96Sweeps::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < families.size(); ++i) {
    json per_seed = json::array();
    for (const auto& t : tables[i]) per_seed.push_back(sweep_to_json(t));
    rows.push_back({{"family", families[i]}, {"sweeps", per_seed}});
  }
  return {{"seeds", seeds}, {"families", rows}};
}

L96Sweeps L96Sweeps::from_json(const json& j) {
  L96Sweeps s;
  s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& row : j.at("families")) {
    s.families.push_back(row.at("family").get<std::string>());
    std::vector<SweepTable> ts;
    for (const auto& t : row.at("sweeps")) ts.push_back(sweep_from_json(t));
    s.tables.push_back(std::move(ts));
  }
  return s;
}

namespace {

struct L96Truth {
  PairDataset data;
  ClimateReference reference;
  WeatherSet weather;
};

L96Truth l96_truth(const L96Setup& setup, std::uint64_t seed, const Progress& progress) {
  report(progress, "climate dataset, seed " + std::to_string(seed));
  L96Truth t;
  t.data = generate_climate_dataset({setup.system, setup.dt, setup.dataset_length, setup.dataset_spinup, seed});
  t.reference = make_climate_reference(t.data.x_component(setup.climate.component), setup.dt, setup.climate);
  t.weather = partition_weather(t.data, setup.n_instances, t.data.size() / setup.n_instances);
  return t;
}

}  // namespace

L96Sweeps run_l96_tp_sweeps(const L96Setup& setup, const std::vector<Family>& families, const Progress& progress) {
  L96Sweeps out;
  out.seeds = setup.seeds;
  for (auto f : families) out.families.push_back(to_string(f));
  out.tables.resize(families.size());
  const auto model = l96_reduced_model(setup.system, setup.dt);
  for (auto seed : setup.seeds) {
    const auto truth = l96_truth(setup, seed, progress);
    SweepInputs in;
    in.reference = &truth.reference;
    in.x0.assign(truth.data.state(0).begin(), truth.data.state(0).end());
    in.climate_steps = setup.climate_steps;
    in.climate = setup.climate;
    in.truth = &truth.data;
    in.weather = &truth.weather;
    in.weather_options.n_ens = setup.n_ens;
    in.weather_options.lead_steps = lead_grid(setup.lead_spacing, setup.lead_time, 1.0, setup.dt);
    in.seed = seed;
    for (std::size_t i = 0; i < families.size(); ++i) {
      report(progress, "fit " + out.families[i] + ", seed " + std::to_string(seed));
      const auto param = fit_family(families[i], truth.data, setup, seed);
      report(progress, "sweep " + out.families[i] + ", seed " + std::to_string(seed));
      out.tables[i].push_back(sweep_tp(model, param, setup.tp_grid, SweepMode::Both, in));
    }
  }
  return out;
}

json L96Envelopes::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < tp_values.size(); ++i) {
    rows.push_back({{"tp", tp_values[i]}, {"forecast", forecast_to_json(forecasts[i], 10)}});
  }
  return {{"dt", dt * 10}, {"ensembles", rows}};
}

L96Envelopes L96Envelopes::from_json(const json& j) {
  L96Envelopes e;
  e.dt = j.at("dt").get<double>();
  for (const auto& row : j.at("ensembles")) {
    e.tp_values.push_back(row.at("tp").get<std::size_t>());
    e.forecasts.push_back(forecast_from_json(row.at("forecast")));
  }
  return e;
}

L96Envelopes run_l96_envelopes(const L96Setup& setup, std::uint64_t seed, const std::vector<std::size_t>& tp_values,
                             const Progress& progress) {
  const auto truth = l96_truth(setup, seed, progress);
  report(progress, "fit nonlocal, seed " + std::to_string(seed));
  const auto param = fit_family(Family::Nonlocal, truth.data, setup, seed);
  const auto model = l96_reduced_model(setup.system, setup.dt);
  const std::size_t horizon = steps_of(setup.envelope_time, setup.dt);
  L96Envelopes out;
  out.dt = setup.dt;
  const RngStream root(seed, StreamComponent::Ensemble);
  for (auto tp : tp_values) {
    report(progress, "ensemble t_p=" + std::to_string(tp));
    out.tp_values.push_back(tp);
    out.forecasts.push_back(
        run_ensemble(model, truth.data, truth.weather.starts[0], horizon, {param, tp}, setup.n_ens, root));
  }
  return out;
}

}  // namespace stochparam
