// stochparam: command-line front end for the experiment pipelines.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "stochparam/config.hpp"
#include "stochparam/experiments.hpp"
#include "stochparam/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stochparam;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string output_dir;
  bool dry_run = false;
};

struct Run {
  std::string command;
  ExperimentConfig config;
  std::ofstream log;

  void progress(const std::string& line) {
    std::cerr << "[" << command << "] " << line << '\n';
    if (log) log << line << '\n';
  }
  Progress progress_fn() {
    return [this](const std::string& l) { progress(l); };
  }
  fs::path out(const std::string& name) const { return config.resolve(name); }
  void wrote(const fs::path& p) const { std::cout << p.string() << '\n'; }

  json provenance(json inputs = json::object()) const {
    const auto cfg = config.to_json();
    return {{"command", command},
            {"tool_version", kVersion},
            {"seed", config.seed},
            {"config", cfg},
            {"config_hash", git_blob_hash(cfg.dump())},
            {"inputs", std::move(inputs)}};
  }
};

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void add_common(CLI::App* sub, Common& c, bool with_config = true) {
  if (with_config) sub->add_option("--config,-c", c.config_path, "experiment config (JSON)");
  sub->add_option("--seed", c.seed, "override the config seed");
  sub->add_option("--threads", c.threads, "worker threads (default: all cores)");
  sub->add_option("--output-dir,-o", c.output_dir, "output directory");
  sub->add_flag("--dry-run", c.dry_run, "validate and print the resolved plan without computing");
}

void set_threads(const Common& c) {
  int n = 0;
  if (const char* env = std::getenv("STOCHPARAM_THREADS")) n = std::atoi(env);
  if (c.threads) n = *c.threads;
  if (n < 0) throw std::invalid_argument("--threads must be positive");
  if (n > 0) omp_set_num_threads(n);
}

Run start(const std::string& command, const Common& c) {
  Run run;
  run.command = command;
  run.config = c.config_path.empty() ? ExperimentConfig::defaults() : ExperimentConfig::load(c.config_path);
  if (const char* env = std::getenv("STOCHPARAM_OUTPUT_DIR")) run.config.output_dir = env;
  if (!c.output_dir.empty()) run.config.output_dir = c.output_dir;
  if (c.seed) run.config.seed = *c.seed;
  run.config.validate();
  set_threads(c);
  return run;
}

// Resolved config and a timestamped sidecar log; only the log carries times.
void open_outputs(Run& run) {
  fs::create_directories(run.config.output_dir);
  std::ofstream cfg(run.out(run.command + ".config.json"));
  cfg << run.config.to_json().dump(2) << '\n';
  run.log.open(run.out(run.command + ".log"), std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  run.log << "# " << run.command << " started " << stamp << " threads=" << omp_get_max_threads() << '\n';
}

bool dry_run(const Run& run, const Common& c, const json& plan) {
  if (!c.dry_run) return false;
  std::cout << json{{"command", run.command}, {"plan", plan}, {"config", run.config.to_json()}}.dump(2) << '\n';
  return true;
}

PairDataset load_data(const Run& run) {
  const auto path = run.out(run.config.data.path);
  if (!fs::exists(path)) throw std::runtime_error("dataset " + path.string() + " not found (run gen-data first)");
  return load_dataset(path);
}

json data_inputs(const Run& run) {
  return {{"dataset", run.config.data.path}, {"dataset_hash", file_hash(run.out(run.config.data.path))}};
}

WeatherOptions weather_options(const ExperimentConfig& c) {
  WeatherOptions w;
  w.n_ens = c.evaluation.n_ens;
  w.time_unit = c.time_unit();
  w.lead_steps = lead_grid(c.evaluation.lead_spacing, c.evaluation.max_lead, w.time_unit, c.dt);
  return w;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Common& c) {
  auto run = start("gen-data", c);
  const auto& cfg = run.config;
  if (dry_run(run, c,
              {{"system", cfg.system},
               {"pairs", static_cast<std::size_t>(std::llround(cfg.data.length / cfg.dt))},
               {"dataset", run.out(cfg.data.path).string()},
               {"weather_slices", cfg.data.n_slices}})) {
    return 0;
  }
  open_outputs(run);
  PairDataset data;
  if (cfg.system == "l96") {
    run.progress("integrating the two-scale system");
    data = generate_climate_dataset({cfg.l96, cfg.dt, cfg.data.length, cfg.data.spinup, cfg.seed});
  } else {
    run.progress("integrating L63 with " + cfg.truth.kind + " forcing");
    const auto truth = make_parameterisation(cfg.truth, cfg);
    data = generate_forced_dataset(cfg.reduced_model(), *truth, cfg.initial_state(), cfg.data.length,
                                   cfg.data.spinup, cfg.seed);
  }
  const auto weather = partition_weather(data, cfg.data.n_slices, cfg.data.slice_len);
  const auto path = run.out(cfg.data.path);
  save_dataset(path, data);
  run.wrote(path);
  const auto wpath = run.out("weather.json");
  write_json_file(wpath, "weather", {{"dataset", cfg.data.path}, {"slice_len", weather.slice_len}, {"starts", weather.starts}},
                  run.provenance(data_inputs(run)));
  run.wrote(wpath);
  return 0;
}

int cmd_fit(const Common& c, const std::string& mode, const std::string& out_name) {
  auto run = start("fit", c);
  const auto& cfg = run.config;
  const std::string ckpt = out_name.empty() ? mode + ".ckpt" : out_name;
  if (dry_run(run, c, {{"mode", mode}, {"dataset", run.out(cfg.data.path).string()}, {"checkpoint", run.out(ckpt).string()}})) {
    return 0;
  }
  open_outputs(run);
  const auto data = load_data(run);
  TrainConfig tc = cfg.training.optimiser;
  tc.seed = cfg.seed;
  const auto path = run.out(ckpt);
  run.progress("fitting " + mode + " on " + std::to_string(data.size()) + " pairs");
  if (mode == "poly") {
    save_checkpoint(path, fit_poly_ar1(data, 3));
  } else if (mode == "det") {
    save_checkpoint(path, train_deterministic(full_state_pairs(data), tc, cfg.training.hidden));
  } else {
    const auto loc = parse_locality(mode);
    if (loc == Locality::StronglyLocal) tc.max_pairs *= data.dim;
    const auto model = train_mdn(data, tc, loc, cfg.training.hidden, cfg.training.components);
    run.progress("best validation NLL " + format_double(model.history.best_validation) + " at epoch " +
                 std::to_string(model.history.best_epoch));
    save_checkpoint(path, model);
  }
  run.wrote(path);
  return 0;
}

int cmd_simulate(const Common& c, std::optional<std::size_t> tp, const std::string& out_name) {
  auto run = start("simulate", c);
  auto& cfg = run.config;
  if (tp) cfg.tp = *tp;
  cfg.validate();
  const std::string name = out_name.empty() ? "trajectory.bin" : out_name;
  if (dry_run(run, c,
              {{"parameterisation", cfg.parameterisation.kind},
               {"tp", cfg.tp},
               {"n_steps", cfg.simulation.n_steps},
               {"output", run.out(name).string()}})) {
    return 0;
  }
  open_outputs(run);
  const auto param = make_parameterisation(cfg.parameterisation, cfg);
  const auto x0 = cfg.initial_state();
  run.progress("simulating " + std::to_string(cfg.simulation.n_steps) + " steps");
  const auto sim = simulate_parameterised(cfg.reduced_model(), x0, {param, cfg.tp}, cfg.simulation.n_steps,
                                          RngStream(cfg.seed, StreamComponent::Parameterisation),
                                          cfg.simulation.save_stride);
  run.progress(std::to_string(sim.sampling_events) + " sampling events");
  const auto path = run.out(name);
  save_trajectory(path, sim.trajectory);
  run.wrote(path);
  return 0;
}

int cmd_score_climate(const Common& c) {
  auto run = start("score-climate", c);
  const auto& cfg = run.config;
  if (dry_run(run, c,
              {{"parameterisation", cfg.parameterisation.kind},
               {"tp", cfg.tp},
               {"climate_steps", cfg.evaluation.climate_steps},
               {"reference", run.out(cfg.data.path).string()}})) {
    return 0;
  }
  open_outputs(run);
  const auto data = load_data(run);
  auto options = cfg.evaluation.climate;
  options.max_lag *= cfg.time_unit();
  const auto ref = make_climate_reference(data.x_component(options.component), data.dt, options);
  const auto param = make_parameterisation(cfg.parameterisation, cfg);
  run.progress("climate run of " + std::to_string(cfg.evaluation.climate_steps) + " steps");
  const auto report = evaluate_climate(cfg.reduced_model(), {param, cfg.tp}, ref, data.state(0),
                                       cfg.evaluation.climate_steps, cfg.seed, options);
  const auto path = run.out("score-climate.json");
  save_report(path, report, run.provenance(data_inputs(run)));
  run.wrote(path);
  return 0;
}

int cmd_score_weather(const Common& c) {
  auto run = start("score-weather", c);
  const auto& cfg = run.config;
  if (dry_run(run, c,
              {{"parameterisation", cfg.parameterisation.kind},
               {"tp", cfg.tp},
               {"instances", cfg.data.n_slices},
               {"n_ens", cfg.evaluation.n_ens},
               {"max_lead", cfg.evaluation.max_lead}})) {
    return 0;
  }
  open_outputs(run);
  const auto data = load_data(run);
  const auto weather = partition_weather(data, cfg.data.n_slices, cfg.data.slice_len);
  const auto param = make_parameterisation(cfg.parameterisation, cfg);
  const auto wopt = weather_options(cfg);
  run.progress(std::to_string(weather.size()) + " instances x " + std::to_string(wopt.n_ens) + " members");
  ScoreReport report;
  report.energy = evaluate_weather(cfg.reduced_model(), {param, cfg.tp}, data, weather, cfg.seed, wopt);
  report.metadata = {{"kind", param->kind()}, {"tp", std::to_string(cfg.tp)}, {"seed", std::to_string(cfg.seed)}};
  const auto path = run.out("score-weather.json");
  save_report(path, report, run.provenance(data_inputs(run)));
  run.wrote(path);
  return 0;
}

void export_sweep_csvs(const Run& run, const SweepTable& t, const std::string& prefix, SweepMode mode) {
  std::vector<std::string> scores;
  if (mode != SweepMode::Weather) scores = {"kl", "hellinger", "d_r"};
  if (mode != SweepMode::Climate) scores.push_back("energy");
  for (const auto& s : scores) {
    const auto p = run.out(prefix + s + ".csv");
    write_csv(p, sweep_table(t, s));
    run.wrote(p);
  }
}

int cmd_sweep_tp(const Common& c) {
  auto run = start("sweep-tp", c);
  const auto& cfg = run.config;
  if (dry_run(run, c,
              {{"parameterisation", cfg.parameterisation.kind},
               {"tp_grid", cfg.tp_grid},
               {"mode", cfg.evaluation.mode},
               {"climate_steps", cfg.evaluation.climate_steps}})) {
    return 0;
  }
  open_outputs(run);
  const auto data = load_data(run);
  auto options = cfg.evaluation.climate;
  options.max_lag *= cfg.time_unit();
  const auto ref = make_climate_reference(data.x_component(options.component), data.dt, options);
  const auto weather = partition_weather(data, cfg.data.n_slices, cfg.data.slice_len);
  SweepInputs in;
  in.reference = &ref;
  in.x0.assign(data.state(0).begin(), data.state(0).end());
  in.climate_steps = cfg.evaluation.climate_steps;
  in.climate = options;
  in.truth = &data;
  in.weather = &weather;
  in.weather_options = weather_options(cfg);
  in.seed = cfg.seed;
  const auto param = make_parameterisation(cfg.parameterisation, cfg);
  run.progress("sweeping " + std::to_string(cfg.tp_grid.size()) + " values of t_p");
  const auto table = sweep_tp(cfg.reduced_model(), param, cfg.tp_grid, cfg.sweep_mode(), in);
  const auto path = run.out("sweep.json");
  write_json_file(path, "sweep", sweep_to_json(table), run.provenance(data_inputs(run)));
  run.wrote(path);
  export_sweep_csvs(run, table, "sweep_", cfg.sweep_mode());
  return 0;
}

int cmd_lyapunov(const Common& c, const std::string& system, std::size_t steps) {
  set_threads(c);
  LyapunovConfig lc;
  lc.n_steps = steps;
  if (c.seed) lc.seed = *c.seed;
  Rhs rhs;
  State x0;
  if (system == "l63") {
    rhs = make_l63_rhs();
    x0 = {1.0, 1.0, 1.0};
  } else if (system == "l96") {
    L96Spec spec;
    rhs = make_l96_reduced_rhs(spec);
    x0.assign(spec.I, spec.F);
    x0[0] += 0.01;
  } else {
    throw std::invalid_argument("--system must be l63 or l96");
  }
  if (c.dry_run) {
    std::cout << json{{"command", "lyapunov"}, {"system", system}, {"steps", steps}}.dump(2) << '\n';
    return 0;
  }
  const auto est = estimate_lyapunov_time(rhs, x0, lc);
  std::cout << "exponent " << format_double(est.exponent) << '\n';
  std::cout << "lyapunov_time " << (est.lyapunov_time ? format_double(*est.lyapunov_time) : "inf") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

void export_file(const fs::path& input, const fs::path& dir, std::ostream& listing) {
  const auto f = read_json_file(input);
  fs::create_directories(dir);
  auto emit = [&](const std::string& name, const CsvTable& t) {
    const auto p = dir / name;
    write_csv(p, t);
    listing << p.string() << '\n';
  };
  if (f.kind == "score") {
    const auto r = report_from_json(f.body);
    emit("scores.csv", {{"kl", "hellinger", "d_r"}, {{r.kl, r.hellinger, r.d_r}}});
    if (!r.energy.lead_times.empty()) emit("energy_curve.csv", curve_table(r.energy));
  } else if (f.kind == "sweep") {
    const auto t = sweep_from_json(f.body);
    for (const char* s : {"kl", "hellinger", "d_r", "energy"}) emit(std::string("sweep_") + s + ".csv", sweep_table(t, s));
  } else if (f.kind == "climate-comparison") {
    const auto cc = ClimateComparison::from_json(f.body);
    for (std::size_t i = 0; i < cc.models.size(); ++i) {
      CsvTable t{{"seed", "kl", "hellinger", "d_r"}, {}};
      for (std::size_t k = 0; k < cc.reports[i].size(); ++k) {
        const auto& r = cc.reports[i][k];
        t.rows.push_back({static_cast<double>(cc.seeds[k]), r.kl, r.hellinger, r.d_r});
      }
      emit("scores_" + cc.models[i] + ".csv", t);
    }
  } else if (f.kind == "weather-comparison") {
    const auto w = WeatherComparison::from_json(f.body);
    for (std::size_t i = 0; i < w.models.size(); ++i) {
      emit("energy_" + w.models[i] + ".csv", curve_table(w.curves[i]));
      if (i < w.examples.size()) {
        for (std::size_t comp = 0; comp < w.examples[i].dim; ++comp) {
          emit("envelope_" + w.models[i] + "_x" + std::to_string(comp) + ".csv",
               ensemble_envelope(w.examples[i], comp, w.dt / w.time_unit));
        }
      }
    }
  } else if (f.kind == "l96-sweeps") {
    const auto s = L96Sweeps::from_json(f.body);
    for (std::size_t i = 0; i < s.families.size(); ++i) {
      const auto& tps = s.tables[i].front().rows;
      for (const char* score : {"kl", "hellinger", "d_r", "energy"}) {
        const auto curve = s.mean_curve(i, score);
        CsvTable t{{"tp", score}, {}};
        for (std::size_t k = 0; k < curve.size(); ++k) t.rows.push_back({static_cast<double>(tps[k].tp), curve[k]});
        emit("sweep_" + s.families[i] + "_" + score + ".csv", t);
      }
    }
  } else if (f.kind == "l96-envelopes") {
    const auto e = L96Envelopes::from_json(f.body);
    for (std::size_t i = 0; i < e.tp_values.size(); ++i) {
      emit("envelope_tp" + std::to_string(e.tp_values[i]) + ".csv", ensemble_envelope(e.forecasts[i], 0, e.dt));
    }
  } else if (f.kind == "weather") {
    throw std::runtime_error(input.string() + ": weather index files have nothing to plot");
  } else {
    throw std::runtime_error(input.string() + ": unknown report kind '" + f.kind + "'");
  }
}

int cmd_export_plots(const Common& c, const std::string& input, const std::string& out_dir) {
  set_threads(c);
  const fs::path dir =
      out_dir.empty() ? fs::path(input).parent_path() / (fs::path(input).stem().string() + "_csv") : fs::path(out_dir);
  if (c.dry_run) {
    std::cout << json{{"command", "export-plots"}, {"input", input}, {"output_dir", dir.string()}}.dump(2) << '\n';
    return 0;
  }
  export_file(input, dir, std::cout);
  return 0;
}

int cmd_repro(const Common& c, const std::string& experiment, const std::string& scale_name) {
  auto run = start("repro", c);
  const auto scale = parse_scale(scale_name);
  run.config.scale = scale;
  const auto seed = run.config.seed;
  const bool l63 = experiment.rfind("l63-", 0) == 0;
  const json setup = l63 ? L63Setup::make(scale, seed).to_json() : L96Setup::make(scale, seed).to_json();
  if (dry_run(run, c, {{"experiment", experiment}, {"scale", scale_name}, {"setup", setup}})) return 0;
  run.command = "repro-" + experiment;
  open_outputs(run);

  json prov = run.provenance();
  prov["experiment"] = experiment;
  prov["setup"] = setup;
  const auto path = run.out(experiment + ".json");
  if (experiment == "l63-memory-climate" || experiment == "l63-spatial-climate") {
    const auto s = L63Setup::make(scale, seed);
    const bool memory = experiment == "l63-memory-climate";
    const auto cmp = memory ? run_l63_memory_climate(s, run.progress_fn()) : run_l63_spatial_climate(s, run.progress_fn());
    json body = cmp.to_json();
    if (memory) {
      json ordering;
      for (const char* score : {"kl", "hellinger", "d_r"}) {
        const double u = score_of(cmp.mean(cmp.index("unforced")), score);
        const double a = score_of(cmp.mean(cmp.index("ar1")), score);
        const double p = score_of(cmp.mean(cmp.index("ar1-plus")), score);
        ordering[score] = u > a && a > p;
      }
      body["ordering"] = ordering;
    }
    write_json_file(path, "climate-comparison", body, prov);
    for (std::size_t i = 0; i < cmp.models.size(); ++i) {
      const auto m = cmp.mean(i);
      run.progress(cmp.models[i] + ": KL " + format_double(m.kl) + "  H " + format_double(m.hellinger) + "  d_r " +
                   format_double(m.d_r));
    }
  } else if (experiment == "l63-memory-weather") {
    const auto w = run_l63_memory_weather(L63Setup::make(scale, seed), seed, run.progress_fn());
    write_json_file(path, "weather-comparison", w.to_json(), prov);
  } else if (experiment == "l96-sweeps") {
    const auto sw = run_l96_tp_sweeps(L96Setup::make(scale, seed),
                                      {Family::Nonlocal, Family::WeaklyLocal, Family::StronglyLocal, Family::PolyAr1},
                                      run.progress_fn());
    write_json_file(path, "l96-sweeps", sw.to_json(), prov);
  } else {
    const auto e = run_l96_envelopes(L96Setup::make(scale, seed), seed, {1, 20}, run.progress_fn());
    write_json_file(path, "l96-envelopes", e.to_json(), prov);
  }
  run.wrote(path);
  export_file(path, run.out(experiment + "_csv"), std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic parameterisation experiments for the Lorenz '63 and two-scale Lorenz '96 systems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen-data", "generate the climate dataset and weather slices");
  add_common(gen, common);

  auto* fit = app.add_subcommand("fit", "fit a parameterisation to the climate dataset");
  add_common(fit, common);
  std::string mode, fit_out;
  fit->add_option("--mode", mode, "nonlocal, weak, strong, det or poly")
      ->required()
      ->check(CLI::IsMember({"nonlocal", "weak", "strong", "det", "poly"}));
  fit->add_option("--out", fit_out, "checkpoint file name");

  auto* sim = app.add_subcommand("simulate", "run the parameterised reduced model");
  add_common(sim, common);
  std::optional<std::size_t> tp;
  std::string sim_out;
  sim->add_option("--tp", tp, "hold length t_p")->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "trajectory file name");

  auto* sc = app.add_subcommand("score-climate", "climate scores against the dataset");
  add_common(sc, common);
  auto* sw = app.add_subcommand("score-weather", "energy-score curve over weather slices");
  add_common(sw, common);
  auto* sweep = app.add_subcommand("sweep-tp", "scores over the t_p grid");
  add_common(sweep, common);

  auto* lyap = app.add_subcommand("lyapunov", "estimate the Lyapunov time");
  add_common(lyap, common, false);
  std::string system = "l63";
  std::size_t lyap_steps = 1'000'000;
  lyap->add_option("--system", system, "l63 or l96 (reduced model)")->check(CLI::IsMember({"l63", "l96"}));
  lyap->add_option("--steps", lyap_steps, "integration steps after spin-up");

  auto* exp = app.add_subcommand("export-plots", "write plot-ready CSVs from a report");
  add_common(exp, common, false);
  std::string input, exp_out;
  exp->add_option("--input,-i", input, "report JSON")->required()->check(CLI::ExistingFile);
  exp->add_option("--out-dir", exp_out, "directory for the CSV files");

  auto* repro = app.add_subcommand("repro", "run one of the packaged experiments end to end");
  add_common(repro, common);
  std::string experiment;
  std::string scale = "desk";
  repro->add_option("--experiment,-e", experiment, "experiment name")
      ->required()
      ->check(CLI::IsMember(
          {"l63-memory-climate", "l63-spatial-climate", "l63-memory-weather", "l96-sweeps", "l96-envelopes"}));
  repro->add_option("--scale", scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common);
    if (fit->parsed()) return cmd_fit(common, mode, fit_out);
    if (sim->parsed()) return cmd_simulate(common, tp, sim_out);
    if (sc->parsed()) return cmd_score_climate(common);
    if (sw->parsed()) return cmd_score_weather(common);
    if (sweep->parsed()) return cmd_sweep_tp(common);
    if (lyap->parsed()) return cmd_lyapunov(common, system, lyap_steps);
    if (exp->parsed()) return cmd_export_plots(common, input, exp_out);
    if (repro->parsed()) return cmd_repro(common, experiment, scale);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: format: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const BlowUpError& e) {
    std::cerr << "error: blow-up: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 1;
}
