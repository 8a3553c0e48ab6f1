#include <doctest.h>

#include <cmath>
#include <vector>

#include "stochparam/dynamics.hpp"
#include "stochparam/rng.hpp"

using namespace stochparam;

namespace {

// index-by-index two-scale L96, 1-based
std::vector<double> l96_oracle(const std::vector<double>& s, const L96Spec& p) {
  const long I = static_cast<long>(p.I), J = static_cast<long>(p.J), IJ = I * J;
  auto X = [&](long i) { return s[static_cast<std::size_t>(((i - 1) % I + I) % I)]; };
  auto Y = [&](long j) { return s[static_cast<std::size_t>(I + ((j - 1) % IJ + IJ) % IJ)]; };
  std::vector<double> out(s.size());
  const double k = p.h * p.c / p.b;
  for (long i = 1; i <= I; ++i) {
    double sum = 0.0;
    for (long j = J * (i - 1) + 1; j <= i * J; ++j) sum += Y(j);
    out[static_cast<std::size_t>(i - 1)] = -X(i - 1) * (X(i - 2) - X(i + 1)) - X(i) + p.F - k * sum;
  }
  for (long j = 1; j <= IJ; ++j) {
    out[static_cast<std::size_t>(I + j - 1)] =
        -p.c * p.b * Y(j + 1) * (Y(j + 2) - Y(j - 1)) - p.c * Y(j) - k * X((j - 1) / J + 1);
  }
  return out;
}

std::vector<double> random_state(std::size_t n, std::uint64_t seed, double scale) {
  RngStream rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

void plain_rk4(const Rhs& f, std::vector<double>& x, double dt) {
  const std::size_t n = x.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), t(n);
  f(x, k1);
  for (std::size_t i = 0; i < n; ++i) t[i] = x[i] + 0.5 * dt * k1[i];
  f(t, k2);
  for (std::size_t i = 0; i < n; ++i) t[i] = x[i] + 0.5 * dt * k2[i];
  f(t, k3);
  for (std::size_t i = 0; i < n; ++i) t[i] = x[i] + dt * k3[i];
  f(t, k4);
  for (std::size_t i = 0; i < n; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

Rhs decay() {
  return [](std::span<const double> x, std::span<double> d) {
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = -x[i];
  };
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("l63 rhs values") {
  auto z = l63_rhs(std::vector<double>{0, 0, 0});
  CHECK(z == std::vector<double>{0, 0, 0});

  auto d = l63_rhs(std::vector<double>{1, 1, 1});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 26.0);
  CHECK(d[2] == doctest::Approx(1.0 - 8.0 / 3.0).epsilon(1e-15));

  const double r = std::sqrt(8.0 / 3.0 * 27.0);
  for (double s : {1.0, -1.0}) {
    auto f = l63_rhs(std::vector<double>{s * r, s * r, 27.0});
    for (double v : f) CHECK(std::abs(v) < 1e-12);
  }
  CHECK_THROWS_AS(l63_rhs(std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("l96 full rhs against scalar oracle") {
  L96Spec p;
  auto s = random_state(p.full_dim(), 7, 1.0);
  for (std::size_t i = 0; i < p.I; ++i) s[i] *= 5.0;
  auto got = l96_full_rhs(s, p);
  auto want = l96_oracle(s, p);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

  // odd sizes catch stray wraparound
  L96Spec q;
  q.I = 5;
  q.J = 3;
  q.h = 0.7;
  auto s2 = random_state(q.full_dim(), 8, 2.0);
  auto g2 = l96_full_rhs(s2, q);
  auto w2 = l96_oracle(s2, q);
  for (std::size_t i = 0; i < g2.size(); ++i) CHECK(g2[i] == doctest::Approx(w2[i]).epsilon(1e-12));

  CHECK_THROWS_AS(l96_full_rhs(std::vector<double>(10), p), std::invalid_argument);
}

TEST_CASE("l96 decoupled limit") {
  L96Spec p;
  p.h = 0.0;
  std::vector<double> s(p.full_dim(), 0.0);
  for (std::size_t i = 0; i < p.I; ++i) s[i] = p.F;
  auto d = l96_full_rhs(s, p);
  for (std::size_t i = 0; i < p.I; ++i) CHECK(d[i] == 0.0);

  auto r = random_state(p.full_dim(), 3, 3.0);
  auto full = l96_full_rhs(r, p);
  auto red = l96_reduced_rhs(std::vector<double>(r.begin(), r.begin() + 8), p);
  for (std::size_t i = 0; i < p.I; ++i) CHECK(full[i] == red[i]);
}

TEST_CASE("l96 reduced rhs") {
  L96Spec p;
  auto u = l96_reduced_rhs(std::vector<double>(8, p.F), p);
  for (double v : u) CHECK(v == 0.0);
  L96Spec z;
  z.F = 0.0;
  for (double v : l96_reduced_rhs(std::vector<double>(8, 0.0), z)) CHECK(v == 0.0);

  auto x = random_state(8, 11, 4.0);
  auto got = l96_reduced_rhs(x, p);
  for (long i = 0; i < 8; ++i) {
    auto at = [&](long k) { return x[static_cast<std::size_t>((k % 8 + 8) % 8)]; };
    double want = -at(i - 1) * (at(i - 2) - at(i + 1)) - at(i) + p.F;
    CHECK(got[static_cast<std::size_t>(i)] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("l96 cyclic equivariance") {
  L96Spec p;
  auto s = random_state(p.full_dim(), 21, 2.0);
  auto rot = s;
  for (std::size_t i = 0; i < p.I; ++i) rot[(i + 1) % p.I] = s[i];
  const std::size_t IJ = p.I * p.J;
  for (std::size_t j = 0; j < IJ; ++j) rot[p.I + (j + p.J) % IJ] = s[p.I + j];
  auto a = l96_full_rhs(s, p);
  auto b = l96_full_rhs(rot, p);
  for (std::size_t i = 0; i < p.I; ++i) CHECK(b[(i + 1) % p.I] == doctest::Approx(a[i]).epsilon(1e-13));
  for (std::size_t j = 0; j < IJ; ++j) CHECK(b[p.I + (j + p.J) % IJ] == doctest::Approx(a[p.I + j]).epsilon(1e-13));
}

TEST_CASE("rk4 step") {
  Rhs zero = [](std::span<const double>, std::span<double> d) { std::fill(d.begin(), d.end(), 0.0); };
  std::vector<double> x{1.5, -2.0};
  CHECK(rk4_step(zero, x, 0.1) == x);

  auto e = rk4_step(decay(), std::vector<double>{1.0}, 0.1);
  CHECK(std::abs(e[0] - 0.90483741803595957) < 1e-7);

  // one step against 100 refined steps: the gap is the local truncation error of the
  // coarse step, O(dt^5)
  auto f = make_l63_rhs();
  auto gap = [&](double dt) {
    auto one = rk4_step(f, std::vector<double>{1, 1, 1}, dt);
    std::vector<double> fine{1, 1, 1};
    for (int k = 0; k < 100; ++k) plain_rk4(f, fine, dt / 100);
    double g = 0.0;
    for (int i = 0; i < 3; ++i) g = std::max(g, std::abs(one[i] - fine[i]) / std::abs(fine[i]));
    return g;
  };
  CHECK(gap(0.01) < 2e-6);
  const double ratio = gap(0.01) / gap(0.005);
  CHECK(ratio > 24.0);
  CHECK(ratio < 40.0);

  std::vector<double> lib{1, 1, 1}, ref{1, 1, 1};
  Rk4Stepper st(f, 3);
  for (int k = 0; k < 100; ++k) {
    st.step(lib, 1e-4);
    plain_rk4(f, ref, 1e-4);
  }
  for (int i = 0; i < 3; ++i) CHECK(std::abs(lib[i] - ref[i]) / std::abs(ref[i]) < 1e-12);

  CHECK_THROWS_AS(rk4_step(decay(), x, 0.0), std::invalid_argument);
  Rhs boom = [](std::span<const double>, std::span<double> d) { d[0] = INFINITY; };
  CHECK_THROWS_AS(rk4_step(boom, std::vector<double>{1.0}, 0.1), BlowUpError);
}

TEST_CASE("rk4 global order") {
  auto err = [](double dt) {
    std::vector<double> x{1.0};
    const int n = static_cast<int>(std::lround(1.0 / dt));
    Rk4Stepper st(decay(), 1);
    for (int k = 0; k < n; ++k) st.step(x, dt);
    return std::abs(x[0] - std::exp(-1.0));
  };
  const double slope = std::log10(err(1e-2) / err(1e-3));
  CHECK(slope > 3.5);
  CHECK(slope < 4.5);
}

TEST_CASE("integrate") {
  auto f = make_l63_rhs();
  std::vector<double> x0{1, 2, 3};
  auto t1 = integrate(f, x0, 1e-3, 1);
  REQUIRE(t1.size() == 2);
  auto s = rk4_step(f, x0, 1e-3);
  for (int i = 0; i < 3; ++i) CHECK(t1.state(1)[i] == s[i]);

  Rhs zero = [](std::span<const double>, std::span<double> d) { std::fill(d.begin(), d.end(), 0.0); };
  auto c = integrate(zero, x0, 0.1, 7);
  for (std::size_t k = 0; k < c.size(); ++k)
    for (int i = 0; i < 3; ++i) CHECK(c.state(k)[i] == x0[i]);

  auto full = integrate(f, x0, 1e-3, 200);
  auto a = integrate(f, x0, 1e-3, 100);
  auto b = integrate(f, a.back(), 1e-3, 100);
  for (int i = 0; i < 3; ++i) CHECK(full.back()[i] == b.back()[i]);

  auto again = integrate(f, x0, 1e-3, 200);
  CHECK(again.data() == full.data());

  CHECK_THROWS_AS(integrate(f, x0, 1e-3, 0), std::invalid_argument);
  Rhs grow = [](std::span<const double> x, std::span<double> d) { d[0] = x[0] * x[0]; };
  try {
    integrate(grow, std::vector<double>{1.0}, 0.5, 100);
    FAIL("no blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.step() > 0);
  }
}

TEST_CASE("lyapunov of linear contraction") {
  LyapunovConfig cfg;
  cfg.spinup_steps = 0;
  cfg.n_steps = 20'000;
  auto est = estimate_lyapunov_time(decay(), std::vector<double>{1.0, 0.5}, cfg);
  CHECK(est.exponent == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK_FALSE(est.lyapunov_time.has_value());
}

TEST_CASE("lyapunov of l63") {
  // classical Benettin value for the standard parameters
  const double lambda = 0.9056;
  LyapunovConfig cfg;
  auto a = estimate_lyapunov_time(make_l63_rhs(), std::vector<double>{1, 1, 1}, cfg);
  cfg.seed = 17;
  auto b = estimate_lyapunov_time(make_l63_rhs(), std::vector<double>{1, 1, 1}, cfg);
  CHECK(std::abs(a.exponent - lambda) / lambda < 0.05);
  REQUIRE(a.lyapunov_time.has_value());
  CHECK(*a.lyapunov_time == doctest::Approx(1.0 / a.exponent));
  CHECK(std::abs(a.exponent - b.exponent) / a.exponent < 0.02);
  CHECK(a.running.size() == cfg.n_steps / cfg.renorm_interval);
}

}
