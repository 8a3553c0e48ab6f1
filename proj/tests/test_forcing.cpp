#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "stochparam/forcing.hpp"

using namespace stochparam;

namespace {

// lag-m autocovariance, biased, mean removed
double acov(const std::vector<double>& s, std::size_t m) {
  const double mu = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double acc = 0.0;
  for (std::size_t n = 0; n + m < s.size(); ++n) acc += (s[n] - mu) * (s[n + m] - mu);
  return acc / static_cast<double>(s.size());
}

// gamma(m) of the default AR(2), summed from its MA(inf) form in high precision
const double kGamma[] = {1e-4, 9.0e-5, 9.05e-5};
const double kGamma10 = 6.8298796681660156e-5;
const double kGamma20 = 4.8845352337506516e-5;
const double kGamma50 = 1.7871919323750326e-5;

}  // namespace

TEST_SUITE("forcing") {

TEST_CASE("ar2 step") {
  Ar2Spec spec;
  spec.sigma_eps2 = 0.0;
  ArState st{1.0, 1.0, RngStream(1)};
  CHECK(ar2_step(st, spec) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(st.lag1 == doctest::Approx(0.95));
  CHECK(st.lag2 == 1.0);

  Ar2Spec white{0.0, 0.0, 4.0};
  ArState w{0.0, 0.0, RngStream(2)};
  std::vector<double> s(200'000);
  for (auto& v : s) v = ar2_step(w, white);
  CHECK(acov(s, 0) == doctest::Approx(4.0).epsilon(0.02));
  CHECK(std::abs(acov(s, 1)) < 3.0 * 4.0 / std::sqrt(2e5));
}

TEST_CASE("ar2 long-run variance") {
  Ar2Spec spec;
  auto st = sample_stationary_init(spec, RngStream(3));
  std::vector<double> s(1'000'000);
  for (auto& v : s) v = ar2_step(st, spec);
  CHECK(acov(s, 0) == doctest::Approx(1e-4).epsilon(0.05));
}

TEST_CASE("ar2 closed-form autocovariance") {
  Ar2Spec spec;
  CHECK(ar2_stationary_variance(spec) == doctest::Approx(1e-4).epsilon(1e-14));
  for (std::size_t m = 0; m < 3; ++m) CHECK(ar2_autocov_closed_form(spec, m) == doctest::Approx(kGamma[m]).epsilon(1e-12));
  CHECK(ar2_autocov_closed_form(spec, 10) == doctest::Approx(kGamma10).epsilon(1e-12));
  CHECK(ar2_autocov_closed_form(spec, 20) == doctest::Approx(kGamma20).epsilon(1e-12));
  CHECK(ar2_autocov_closed_form(spec, 50) == doctest::Approx(kGamma50).epsilon(1e-12));

  Ar2Spec ar1{0.7, 0.0, 0.51};
  const double g0 = 0.51 / (1 - 0.49);
  for (std::size_t m : {0, 1, 4, 9})
    CHECK(ar2_autocov_closed_form(ar1, m) == doctest::Approx(g0 * std::pow(0.7, m)).epsilon(1e-12));

  // repeated root: phi1^2 + 4 phi2 = 0
  Ar2Spec rep{1.0, -0.25, 1.0};
  CHECK_THROWS_AS(ar2_autocov_closed_form(rep, 3), std::domain_error);
}

TEST_CASE("yule-walker roots and derived AR(1) models") {
  Ar2Spec spec;
  auto r = ar2_roots(spec);
  CHECK(r.plus == doctest::Approx(0.96704110398279151).epsilon(1e-14));
  CHECK(r.minus == doctest::Approx(-0.51704110398279151).epsilon(1e-14));

  auto nat = derive_ar1_natural(spec);
  CHECK(nat.phi == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(nat.innovation_var == doctest::Approx(1.9e-5).epsilon(1e-14));
  CHECK(nat.stationary_variance() == doctest::Approx(1e-4).epsilon(1e-14));

  auto plus = derive_ar1_plus(spec);
  CHECK(std::round(plus.phi * 1000) / 1000 == 0.967);
  CHECK(plus.stationary_variance() == doctest::Approx(1e-4).epsilon(1e-14));
  CHECK(plus.phi > nat.phi);
  for (int m = 2; m < 40; ++m) CHECK(std::pow(plus.phi, m) > std::pow(nat.phi, m));

  Ar2Spec flat{0.6, 0.0, 2e-5};
  auto a = derive_ar1_natural(flat);
  auto b = derive_ar1_plus(flat);
  CHECK(a.phi == 0.6);
  CHECK(a.innovation_var == 2e-5);
  CHECK(b.phi == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b.innovation_var == doctest::Approx(2e-5).epsilon(1e-12));

  Ar2Spec complex_roots{0.2, -0.5, 1.0};
  CHECK_THROWS_AS(derive_ar1_plus(complex_roots), std::domain_error);
}

TEST_CASE("natural AR(1) shares the one-step transition") {
  Ar2Spec spec;
  auto nat = derive_ar1_natural(spec);
  // conditional law of M_n given M_{n-1} under the stationary AR(2)
  const double g0 = ar2_autocov_closed_form(spec, 0);
  const double g1 = ar2_autocov_closed_form(spec, 1);
  const double coef = g1 / g0;
  const double var = g0 - g1 * g1 / g0;
  CHECK(std::abs(coef - nat.phi) < 1e-12);
  CHECK(std::abs(var - nat.innovation_var) < 1e-12);
}

TEST_CASE("ar1 step and autocovariance") {
  Ar1Spec det{0.9, 0.0};
  ArState s{1.0, 0.0, RngStream(4)};
  CHECK(ar1_step(s, det) == 0.9);

  Ar1Spec spec{0.9, 1.9e-5};
  auto st = sample_stationary_init(spec, RngStream(5));
  std::vector<double> x(1'000'000);
  for (auto& v : x) v = ar1_step(st, spec);
  for (std::size_t m = 0; m <= 20; ++m)
    CHECK(acov(x, m) == doctest::Approx(std::pow(0.9, m) * 1e-4).epsilon(0.05));

  Ar1Spec iid{0.0, 1.0};
  ArState w{0.0, 0.0, RngStream(6)};
  std::vector<double> y(100'000);
  for (auto& v : y) v = ar1_step(w, iid);
  CHECK(std::abs(acov(y, 1)) < 3.0 / std::sqrt(1e5));
}

TEST_CASE("ar2 simulation matches closed form up to lag 50") {
  Ar2Spec spec;
  auto st = sample_stationary_init(spec, RngStream(8));
  std::vector<double> x(1'000'000);
  for (auto& v : x) v = ar2_step(st, spec);
  for (std::size_t m = 0; m <= 50; ++m)
    CHECK(acov(x, m) == doctest::Approx(ar2_autocov_closed_form(spec, m)).epsilon(0.05));
}

TEST_CASE("stationary initialisation") {
  Ar1Spec a1{0.9, 1.9e-5};
  RngStream root(9);
  std::vector<double> d(100'000);
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = sample_stationary_init(a1, root.derive(StreamComponent::Test, k)).lag1;
  CHECK(acov(d, 0) == doctest::Approx(1e-4).epsilon(0.05));

  Ar2Spec a2;
  std::vector<double> l1(100'000), l2(100'000);
  for (std::size_t k = 0; k < l1.size(); ++k) {
    auto s = sample_stationary_init(a2, root.derive(StreamComponent::Forcing, k));
    l1[k] = s.lag1;
    l2[k] = s.lag2;
  }
  double c = 0, v1 = 0, v2 = 0;
  for (std::size_t k = 0; k < l1.size(); ++k) {
    c += l1[k] * l2[k];
    v1 += l1[k] * l1[k];
    v2 += l2[k] * l2[k];
  }
  CHECK(std::abs(c / std::sqrt(v1 * v2) - 0.9) < 0.02);

  auto z = sample_stationary_init(Ar1Spec{0.5, 0.0}, RngStream(10));
  CHECK(z.lag1 == 0.0);
}

TEST_CASE("var1 spec") {
  auto spec = Var1Spec::equicorrelated(3, 0.999, -0.45, 1.81e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.covariance());
  auto ev = es.eigenvalues();
  CHECK(ev[0] / 1.81e-10 == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(ev[1] / 1.81e-10 == doctest::Approx(1.45).epsilon(1e-10));
  CHECK(ev[2] / 1.81e-10 == doctest::Approx(1.45).epsilon(1e-10));
  for (int i = 0; i < 3; ++i) CHECK(spec.stationary_variance()[i] == doctest::Approx(9.054527263631938e-08).epsilon(1e-12));

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(Var1Spec(0.5, bad), std::invalid_argument);
  CHECK_THROWS_AS(Var1Spec::equicorrelated(3, 0.5, -0.6, 1.0), std::invalid_argument);
}

TEST_CASE("var1 innovations") {
  auto spec = Var1Spec::equicorrelated(3, 0.0, -0.45, 2.0);
  Var1State st{{0, 0, 0}, RngStream(11)};
  const int n = 100'000;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int k = 0; k < n; ++k) {
    auto e = var1_step(st, spec);
    Eigen::Vector3d v(e[0], e[1], e[2]);
    cov += v * v.transpose();
  }
  cov /= n;
  CHECK((cov - spec.covariance()).norm() / spec.covariance().norm() < 0.05);

  auto ind = Var1Spec::equicorrelated(3, 0.5, 0.0, 1.0);
  Var1State s2{{0, 0, 0}, RngStream(12)};
  double c01 = 0, v0 = 0, v1 = 0;
  for (int k = 0; k < n; ++k) {
    auto e = var1_step(s2, ind);
    c01 += e[0] * e[1];
    v0 += e[0] * e[0];
    v1 += e[1] * e[1];
  }
  CHECK(std::abs(c01 / std::sqrt(v0 * v1)) < 3.0 / std::sqrt(static_cast<double>(n)));

  Var1State wrong{{0, 0}, RngStream(1)};
  CHECK_THROWS_AS(var1_step(wrong, spec), std::invalid_argument);
}

TEST_CASE("multiplicative error") {
  CHECK(multiplicative_error(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}) ==
        std::vector<double>{4, 10, 18});
  CHECK(multiplicative_error(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}) ==
        std::vector<double>{0, 0, 0});
  CHECK(multiplicative_error(std::vector<double>{1, 1, 1}, std::vector<double>{-1, 7, 0.5}) ==
        std::vector<double>{-1, 7, 0.5});
  CHECK_THROWS_AS(multiplicative_error(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((Ar2Spec{0.6, 0.5, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Ar1Spec{1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW(Ar2Spec{}.validate());
}

}
