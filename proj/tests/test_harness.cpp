#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "stochparam/harness.hpp"

using namespace stochparam;

namespace {

// M_n = (k, 2k, ...) on the k-th sampling event
class Counting final : public Parameterisation {
 public:
  explicit Counting(std::size_t dim) : dim_(dim) {}
  std::string kind() const override { return "counting"; }
  std::size_t dim() const override { return dim_; }
  std::unique_ptr<ErrorSampler> make_sampler(RngStream) const override {
    struct S final : ErrorSampler {
      double k = 0.0;
      void sample(std::span<const double>, std::span<double> m) override {
        k += 1.0;
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = k * static_cast<double>(i + 1);
      }
    };
    return std::make_unique<S>();
  }

 private:
  std::size_t dim_;
};

ReducedModel frozen(std::size_t dim) {
  return ReducedModel{"frozen", dim, 1.0, [](std::span<const double>, std::span<double> d) {
                        std::fill(d.begin(), d.end(), 0.0);
                      }};
}

std::shared_ptr<const Parameterisation> ar1_param(double phi, double var, std::size_t dim) {
  return std::make_shared<ScalarArForcing>(Ar1Spec{phi, var}, dim);
}

PairDataset l63_truth(double length, std::uint64_t seed) {
  auto model = l63_model();
  ScalarArForcing truth(Ar2Spec{}, 3);
  return generate_forced_dataset(model, truth, std::vector<double>{1, 1, 1}, length, 5.0, seed);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("hold semantics") {
  auto model = frozen(2);
  ParamSpec spec{std::make_shared<Counting>(2), 3};
  auto r = simulate_parameterised(model, std::vector<double>{0, 0}, spec, 10, RngStream(1));
  CHECK(r.sampling_events == 4);
  const double inc[] = {1, 1, 1, 2, 2, 2, 3, 3, 3, 4};
  for (std::size_t n = 0; n < 10; ++n) {
    CHECK(r.trajectory.state(n + 1)[0] - r.trajectory.state(n)[0] == inc[n]);
    CHECK(r.trajectory.state(n + 1)[1] - r.trajectory.state(n)[1] == 2 * inc[n]);
  }

  for (std::size_t N : {1, 2, 7, 99, 100, 101, 1000})
    for (std::size_t tp : {1, 2, 3, 10, 20, 30, 50, 100, 1000, 5000}) {
      ParamSpec s{std::make_shared<Counting>(1), tp};
      auto q = simulate_parameterised(frozen(1), std::vector<double>{0}, s, N, RngStream(2), N);
      CHECK(q.sampling_events == (N + tp - 1) / tp);
    }
}

TEST_CASE("mdn draws once per step at tp 1") {
  MdnArchitecture a;
  a.input_dim = 3;
  a.target_dim = 3;
  a.hidden = {4};
  a.components = 2;
  RngStream init(3);
  auto net = std::make_shared<MdnModel>(a, init);
  net->target_standardiser.scale = {1e-6, 1e-6, 1e-6};
  auto p = std::make_shared<MdnParameterisation>(net, 3);
  auto r = simulate_parameterised(l63_model(), std::vector<double>{1, 1, 1}, ParamSpec{p, 1}, 250, RngStream(4));
  CHECK(r.sampling_events == 250);
  CHECK(p->draws() == 250);
  auto q = simulate_parameterised(l63_model(), std::vector<double>{1, 1, 1}, ParamSpec{p, 20}, 250, RngStream(4));
  CHECK(q.sampling_events == 13);
  CHECK(p->draws() == 263);
}

TEST_CASE("zero spec reproduces the reduced map bitwise") {
  for (auto model : {l63_model(), l96_reduced_model()}) {
    std::vector<double> x0(model.dim);
    for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = 1.0 + 0.1 * static_cast<double>(i);
    auto pure = integrate(model.rhs, x0, model.dt, 500);
    ParamSpec zero{std::make_shared<ZeroParameterisation>(model.dim), 1};
    auto sim = simulate_parameterised(model, x0, zero, 500, RngStream(5));
    CHECK(sim.trajectory.data() == pure.data());
    ParamSpec silent{ar1_param(0.9, 0.0, model.dim), 7};
    auto still = simulate_parameterised(model, x0, silent, 500, RngStream(6));
    CHECK(still.trajectory.data() == pure.data());
  }
}

TEST_CASE("save stride and determinism") {
  auto model = l63_model();
  ParamSpec spec{ar1_param(0.9, 1.9e-5, 3), 2};
  auto every = simulate_parameterised(model, std::vector<double>{1, 1, 1}, spec, 100, RngStream(7));
  auto sparse = simulate_parameterised(model, std::vector<double>{1, 1, 1}, spec, 100, RngStream(7), 10);
  REQUIRE(sparse.trajectory.size() == 11);
  CHECK(sparse.trajectory.dt() == doctest::Approx(10 * model.dt));
  for (std::size_t k = 0; k <= 10; ++k)
    for (int i = 0; i < 3; ++i) CHECK(sparse.trajectory.state(k)[i] == every.trajectory.state(10 * k)[i]);
  auto again = simulate_parameterised(model, std::vector<double>{1, 1, 1}, spec, 100, RngStream(7));
  CHECK(again.trajectory.data() == every.trajectory.data());
}

TEST_CASE("blow-up reports the step") {
  auto model = frozen(1);
  auto huge = std::make_shared<Counting>(1);
  struct Bomb final : Parameterisation {
    std::string kind() const override { return "bomb"; }
    std::size_t dim() const override { return 1; }
    std::unique_ptr<ErrorSampler> make_sampler(RngStream) const override {
      struct S final : ErrorSampler {
        int n = 0;
        void sample(std::span<const double>, std::span<double> m) override { m[0] = ++n == 4 ? INFINITY : 1.0; }
      };
      return std::make_unique<S>();
    }
  };
  try {
    simulate_parameterised(model, std::vector<double>{0}, ParamSpec{std::make_shared<Bomb>(), 1}, 10, RngStream(1));
    FAIL("expected a blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.step() == 4);
  }
  CHECK_THROWS_AS(ParamSpec({huge, 0}).validate(1), std::invalid_argument);
  CHECK_THROWS_AS(ParamSpec({huge, 1}).validate(2), std::invalid_argument);
  CHECK_THROWS_AS(ParamSpec({nullptr, 1}).validate(1), std::invalid_argument);
}

TEST_CASE("diagnosis") {
  L96Spec p;
  p.h = 0.0;
  std::vector<double> x0(p.full_dim(), 0.0);
  for (std::size_t i = 0; i < p.I; ++i) x0[i] = p.F + (i == 0 ? 0.5 : 0.0);
  auto full = integrate(make_l96_full_rhs(p), x0, 1e-3, 200);
  auto exact = diagnose_model_error(full, p.I, rk4_map(l96_reduced_model(p)));
  CHECK(exact.size() == 200);
  for (double v : exact.m) CHECK(std::abs(v) < 1e-15);

  auto traj = integrate(make_l63_rhs(), std::vector<double>{1, 2, 3}, 1e-3, 50);
  StepMap identity = [](std::span<const double> x, std::span<double> out) { std::copy(x.begin(), x.end(), out.begin()); };
  auto fd = diagnose_model_error(traj, 2, identity);
  CHECK(fd.dim == 2);
  for (std::size_t n = 0; n < 50; ++n)
    for (int i = 0; i < 2; ++i) CHECK(fd.error(n)[i] == traj.state(n + 1)[i] - traj.state(n)[i]);
}

TEST_CASE("diagnosed errors replay the resolved trajectory") {
  L96Spec p;
  RngStream rng(8);
  std::vector<double> x0(p.full_dim());
  for (auto& v : x0) v = rng.normal();
  for (std::size_t i = 0; i < p.I; ++i) x0[i] += 5.0;
  auto full = integrate(make_l96_full_rhs(p), x0, 1e-3, 1000);
  auto model = l96_reduced_model(p);
  auto pairs = diagnose_model_error(full, p.I, rk4_map(model));

  StepMap psi0 = rk4_map(model);
  std::vector<double> pred(p.I);
  double worst = 0.0;
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    psi0(pairs.state(n), pred);
    for (std::size_t i = 0; i < p.I; ++i) worst = std::max(worst, std::abs(pred[i] + pairs.error(n)[i] - full.state(n + 1)[i]));
  }
  CHECK(worst < 1e-12);

  auto errors = std::make_shared<const std::vector<double>>(pairs.m);
  ParamSpec replay{std::make_shared<ReplayParameterisation>(errors, p.I), 1};
  auto sim = simulate_parameterised(model, full.state(0).first(p.I), replay, 1000, RngStream(0));
  worst = 0.0;
  for (std::size_t n = 0; n <= 1000; ++n)
    for (std::size_t i = 0; i < p.I; ++i) worst = std::max(worst, std::abs(sim.trajectory.state(n)[i] - full.state(n)[i]));
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(simulate_parameterised(model, full.state(0).first(p.I), replay, 1001, RngStream(0)), std::out_of_range);
}

TEST_CASE("climate dataset") {
  ClimateDatasetRequest req;
  req.length = 2.0;
  req.spinup = 0.5;
  req.seed = 9;
  auto a = generate_climate_dataset(req);
  CHECK(a.size() == 2000);
  CHECK(a.dim == 8);
  CHECK(a.meta.system == "l96");
  auto b = generate_climate_dataset(req);
  CHECK(a.x == b.x);
  CHECK(a.m == b.m);
  auto x1 = a.x_component(0);
  double mu = 0.0, var = 0.0, mag = 0.0;
  for (double v : x1) mu += v;
  mu /= static_cast<double>(x1.size());
  for (double v : x1) var += (v - mu) * (v - mu);
  for (double v : a.m) mag = std::max(mag, std::abs(v));
  CHECK(var > 0.0);
  CHECK(mag > 0.0);
  req.seed = 10;
  CHECK(generate_climate_dataset(req).x != a.x);
}

TEST_CASE("weather partition") {
  PairDataset d;
  d.dim = 1;
  d.x.resize(10);
  d.m.resize(10);
  auto w = partition_weather(d, 2, 5);
  CHECK(w.starts == std::vector<std::size_t>{0, 5});
  CHECK(w.slice_len == 5);
  CHECK_THROWS_AS(partition_weather(d, 3, 4), std::invalid_argument);
  d.x.resize(10'000'000);
  d.m.resize(10'000'000);
  auto big = partition_weather(d, 1000, 10'000);
  CHECK(big.size() == 1000);
  CHECK(big.starts.back() == 9'990'000);
  auto sep = separated_weather(d, 4, 1000, 300);
  CHECK(sep.starts[1] - sep.starts[0] == 1000);
  CHECK_THROWS_AS(separated_weather(d, 4, 100, 300), std::invalid_argument);
}

TEST_CASE("ensembles") {
  auto truth = l63_truth(20.0, 11);
  auto model = l63_model();
  RngStream root(12, StreamComponent::Ensemble);

  ParamSpec zero{std::make_shared<ZeroParameterisation>(3), 1};
  auto z = run_ensemble(model, truth, 100, 300, zero, 5, root);
  auto pure = integrate(model.rhs, truth.state(100), model.dt, 300);
  for (const auto& m : z.members) CHECK(m == pure.data());
  // truth slice carries the truth, not Psi0
  CHECK(z.truth_state(300)[0] == truth.state(400)[0]);

  ParamSpec spec{ar1_param(0.967, 6.5e-6, 3), 1};
  auto f = run_ensemble(model, truth, 100, 300, spec, 100, root);
  CHECK(f.n_members() == 100);
  CHECK(f.n_finite() == 100);
  std::set<double> finals;
  for (std::size_t j = 0; j < 100; ++j) finals.insert(f.member_state(j, 300)[0]);
  CHECK(finals.size() == 100);
  auto s = run_ensemble_serial(model, truth, 100, 300, spec, 100, root);
  CHECK(s.members == f.members);

  // ending exactly one past the stored pairs
  auto tail = run_ensemble(model, truth, truth.size() - 50, 50, zero, 2, root);
  std::vector<double> pred(3);
  rk4_map(model)(truth.state(truth.size() - 1), pred);
  for (int i = 0; i < 3; ++i) CHECK(tail.truth_state(50)[i] == pred[i] + truth.error(truth.size() - 1)[i]);
  CHECK_THROWS_AS(run_ensemble(model, truth, truth.size() - 50, 51, zero, 2, root), std::invalid_argument);
}

TEST_CASE("ensemble blow-up policy") {
  struct Flaky final : Parameterisation {
    double fraction;
    explicit Flaky(double f) : fraction(f) {}
    std::string kind() const override { return "flaky"; }
    std::size_t dim() const override { return 3; }
    std::unique_ptr<ErrorSampler> make_sampler(RngStream rng) const override {
      struct S final : ErrorSampler {
        bool bad;
        void sample(std::span<const double>, std::span<double> m) override {
          std::fill(m.begin(), m.end(), bad ? NAN : 0.0);
        }
      };
      auto s = std::make_unique<S>();
      s->bad = rng.uniform() < fraction;
      return s;
    }
  };
  auto truth = l63_truth(5.0, 13);
  auto model = l63_model();
  RngStream root(14, StreamComponent::Ensemble);
  auto ok = run_ensemble(model, truth, 0, 100, ParamSpec{std::make_shared<Flaky>(0.0), 1}, 20, root);
  CHECK(ok.n_finite() == 20);
  CHECK_THROWS_AS(run_ensemble(model, truth, 0, 100, ParamSpec{std::make_shared<Flaky>(1.0), 1}, 20, root), BlowUpError);
  auto some = run_ensemble_serial(model, truth, 0, 100, ParamSpec{std::make_shared<Flaky>(0.04), 1}, 200, root);
  const std::size_t blown = 200 - some.n_finite();
  CHECK(blown > 0);
  CHECK(blown <= 20);
  for (std::size_t j = 0; j < 200; ++j)
    if (!some.finite[j]) CHECK(std::isnan(some.member_state(j, 100)[0]));
}

TEST_CASE("weather evaluation") {
  auto truth = l63_truth(40.0, 15);
  auto model = l63_model();
  auto w = separated_weather(truth, 10, 3000, 2000);
  WeatherOptions opt;
  opt.n_ens = 10;
  opt.lead_steps = lead_grid(0.1, 2.0, 1.0, model.dt);
  CHECK(opt.lead_steps.size() == 21);
  CHECK(opt.lead_steps.back() == 2000);
  ParamSpec spec{ar1_param(0.967, 6.5e-6, 3), 1};
  auto c = evaluate_weather(model, spec, truth, w, 16, opt);
  CHECK(c.mean.front() == 0.0);
  CHECK(c.lead_times[10] == doctest::Approx(1.0));
  CHECK(c.mean.back() > c.mean[1]);

  opt.time_unit = 2.0;
  opt.parallel = false;
  auto serial = evaluate_weather(model, spec, truth, w, 16, opt);
  CHECK(serial.lead_times[10] == doctest::Approx(0.5));
  CHECK(serial.mean == c.mean);

  opt.lead_steps = {0, 2001};
  CHECK_THROWS_AS(evaluate_weather(model, spec, truth, w, 16, opt), std::invalid_argument);
}

TEST_CASE("climate evaluation against the truth process") {
  auto model = l63_model();
  ClimateOptions opt;
  opt.max_lag = 10.0;
  auto truth = std::make_shared<ScalarArForcing>(Ar2Spec{}, 3);
  ParamSpec tspec{truth, 1};
  const std::vector<double> x0{1, 1, 1};
  double spec_kl = 0.0, baseline = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto ref = simulate_climate_reference(model, tspec, x0, 2'000'000, 100 + seed, opt);
    spec_kl += evaluate_climate(model, tspec, ref, x0, 2'000'000, 300 + seed, opt).kl;
    auto other = simulate_climate_reference(model, tspec, x0, 2'000'000, 400 + seed, opt);
    baseline += kl_divergence(ref.pdf, other.pdf);
  }
  CHECK(spec_kl <= 2.0 * baseline);

  auto r = evaluate_climate(model, tspec, simulate_climate_reference(model, tspec, x0, 200'000, 1, opt), x0, 200'000, 2, opt);
  CHECK(r.metadata.at("kind") == "ar2");
  CHECK(r.metadata.at("sampling_events") == std::to_string(200'000 + 10'000));
  CHECK(r.hellinger >= 0.0);
  CHECK(r.hellinger <= 1.0);
}

TEST_CASE("sweep with a zero spec is flat") {
  auto model = l63_model();
  ClimateOptions opt;
  opt.max_lag = 2.0;
  const std::vector<double> x0{1, 1, 1};
  auto ref = simulate_climate_reference(model, ParamSpec{std::make_shared<ZeroParameterisation>(3), 1}, x0, 300'000, 1, opt);
  auto truth = l63_truth(12.0, 17);
  auto w = partition_weather(truth, 5, 2000);
  SweepInputs in;
  in.reference = &ref;
  in.x0 = x0;
  in.climate_steps = 200'000;
  in.climate = opt;
  in.truth = &truth;
  in.weather = &w;
  in.weather_options.n_ens = 4;
  in.weather_options.lead_steps = {0, 1000, 2000};
  auto t = sweep_tp(model, std::make_shared<ZeroParameterisation>(3), {1, 10, 50}, SweepMode::Both, in);
  REQUIRE(t.rows.size() == 3);
  for (const auto& row : t.rows) {
    CHECK(row.report.kl == t.rows[0].report.kl);
    CHECK(row.report.d_r == t.rows[0].report.d_r);
    CHECK(row.report.energy.mean == t.rows[0].report.energy.mean);
    CHECK(row.energy_at_horizon == t.rows[0].report.energy.mean.back());
  }
  CHECK(t.argmin_kl == 0);
}

}
