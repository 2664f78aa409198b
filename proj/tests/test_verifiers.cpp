#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdelab/scenarios.hpp"
#include "sdelab/simulate.hpp"
#include "sdelab/stats.hpp"
#include "sdelab/verifiers.hpp"

#include <cmath>

using namespace sdelab;

namespace {

CoefficientField bm_field(double sigma = 1.0, double p = 4, double q = 4) {
  CoefficientField f;
  f.dim = 1;
  f.drift = [](double, const Vec&) { return Vec(Vec::Zero(1)); };
  Mat s(1, 1);
  s(0, 0) = sigma;
  f.diffusion = [s](double, const Vec&) { return s; };
  f.kappa = std::max(sigma * sigma, 1.0 / (sigma * sigma)) * 1.5;
  f.p = p;
  f.q = q;
  return f;
}

KrylovOptions krylov_opts(std::vector<double> ladder, long paths = 500) {
  KrylovOptions o;
  o.s_ladder = std::move(ladder);
  o.paths = paths;
  o.dt = 1e-3;
  o.T = 1.0;
  o.master_seed = 5150;
  o.threads = 2;
  o.restart_samples = 4;
  return o;
}

}  // namespace

TEST_CASE("krylov: zero source short-circuits to a pass") {
  CoefficientField f = bm_field();
  auto rep = krylov_check(f, [](double, const Vec&) { return 0.0; },
                          BoundedDomain::centered_box(1, 5.0), vec1(0.0),
                          krylov_opts({1.0, 0.5, 0.25}, 100));
  CHECK(rep.pass);
  CHECK_FALSE(rep.fit_done);
  for (const auto& row : rep.rows) CHECK(row.lhs == 0.0);
}

TEST_CASE("krylov: unit source on a no-exit domain has exponent one") {
  CoefficientField f = bm_field();
  auto rep = krylov_check(f, [](double, const Vec&) { return 1.0; },
                          BoundedDomain::centered_box(1, 50.0), vec1(0.0),
                          krylov_opts({1.0, 0.5, 0.25, 0.125}, 200));
  REQUIRE(rep.fit_done);
  CHECK(rep.delta_hat == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.pass);
  for (const auto& row : rep.rows) {
    CHECK(row.lhs == doctest::Approx(row.s - row.r).epsilon(1e-9));  // trapezoid is exact here
  }
  CHECK(rep.restart_violations == 0);
}

TEST_CASE("krylov: indicator source with threshold OU drift beats the configured delta") {
  CoefficientField ou = make_threshold_ou({1.0, -1.0}, {0.5, 0.5}, {0.0}, 1.0, 4.0, 4.0);
  KrylovOptions opts = krylov_opts({0.8, 0.4, 0.2, 0.1}, 2000);
  opts.delta = 0.125;  // = 1/2 - d/(2p) - 1/q at p = q = 4, d = 1
  auto rep = krylov_check(ou, [](double, const Vec& x) { return x(0) > 0.0 ? 1.0 : 0.0; },
                          BoundedDomain::centered_box(1, 3.0), vec1(0.0), opts);
  REQUIRE(rep.fit_done);
  INFO("delta_hat = ", rep.delta_hat, " +/- ", rep.delta_se);
  CHECK(rep.delta_hat >= 0.125 - rep.delta_se);
  CHECK(rep.pass);
}

TEST_CASE("krylov: interval additivity on shared paths") {
  CoefficientField ou = make_threshold_ou({0.5, -0.5}, {1.0, 1.0}, {0.0}, 1.0, 4.0, 4.0);
  BoundedDomain d = BoundedDomain::centered_box(1, 3.0);
  ScalarFn f = [](double, const Vec& x) { return std::abs(x(0)); };

  KrylovOptions o1 = krylov_opts({0.5}, 300);
  auto r1 = krylov_check(ou, f, d, vec1(0.0), o1);
  KrylovOptions o2 = krylov_opts({1.0}, 300);
  o2.r = 0.5;
  auto r2 = krylov_check(ou, f, d, vec1(0.0), o2);
  KrylovOptions o3 = krylov_opts({1.0}, 300);
  auto r3 = krylov_check(ou, f, d, vec1(0.0), o3);
  CHECK(r1.rows[0].lhs + r2.rows[0].lhs == doctest::Approx(r3.rows[0].lhs).epsilon(1e-12));
}

TEST_CASE("krylov: doubling the source doubles both sides and keeps the exponent") {
  CoefficientField f = bm_field();
  BoundedDomain d = BoundedDomain::centered_box(1, 4.0);
  ScalarFn g1 = [](double, const Vec& x) { return std::abs(std::sin(3 * x(0))); };
  ScalarFn g2 = [&](double t, const Vec& x) { return 2.0 * g1(t, x); };
  auto r1 = krylov_check(f, g1, d, vec1(0.0), krylov_opts({1.0, 0.5, 0.25}, 200));
  auto r2 = krylov_check(f, g2, d, vec1(0.0), krylov_opts({1.0, 0.5, 0.25}, 200));
  CHECK(r2.f_norm == doctest::Approx(2.0 * r1.f_norm).epsilon(1e-12));
  for (size_t i = 0; i < r1.rows.size(); ++i) {
    CHECK(r2.rows[i].lhs == doctest::Approx(2.0 * r1.rows[i].lhs).epsilon(1e-12));
  }
  CHECK(r2.delta_hat == doctest::Approx(r1.delta_hat).epsilon(1e-9));
}

TEST_CASE("krylov: errors for hypotheses and all-exited paths") {
  CoefficientField bad = bm_field(1.0, 1.5, 1.5);  // d/p + 2/q = 2
  CHECK_THROWS_AS(krylov_check(bad, [](double, const Vec&) { return 1.0; },
                               BoundedDomain::centered_box(1, 1.0), vec1(0.0),
                               krylov_opts({0.5}, 10)),
                  std::invalid_argument);

  CoefficientField f = bm_field();
  KrylovOptions o = krylov_opts({0.9}, 20);
  o.r = 0.5;  // a tiny box is left long before r = 0.5
  CHECK_THROWS_AS(krylov_check(f, [](double, const Vec&) { return 1.0; },
                               BoundedDomain::centered_box(1, 0.02), vec1(0.0), o),
                  std::runtime_error);
}

TEST_CASE("stability: sigma-only perturbation in the driftless regime") {
  CoefficientField f = bm_field(1.0, 8.0, 8.0);
  StabilityOptions opts;
  opts.eps_ladder = {0.0, 0.01, 0.02, 0.04, 0.08};
  opts.pairs = 1000;
  opts.dt = 1e-3;
  opts.T = 1.0;
  opts.master_seed = 777;
  opts.threads = 2;
  auto rep = stability_check(f, nullptr,
                             [](double, const Vec&) { return Mat(Mat::Identity(1, 1)); },
                             BoundedDomain::centered_box(1, 6.0), vec1(0.0), opts);
  REQUIRE(rep.rows.size() == 5);
  CHECK(rep.rows[0].m == 0.0);  // identical tied paths, bitwise
  REQUIRE(rep.fit_done);
  INFO("slope = ", rep.slope);
  CHECK(rep.slope >= 0.8);
  CHECK(rep.slope <= 1.2);
  CHECK(rep.pass);
  // monotone within error bands along the shared-stream ladder
  for (size_t i = 2; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].m + 3 * rep.rows[i].m_se >= rep.rows[i - 1].m - 3 * rep.rows[i - 1].m_se);
  }
}

TEST_CASE("stability: drift-only perturbation obeys the Gronwall envelope") {
  CoefficientField f = bm_field(0.6, 8.0, 8.0);
  f.drift = [](double, const Vec& x) { return Vec(-x); };  // Lipschitz constant 1
  StabilityOptions opts;
  opts.eps_ladder = {0.01, 0.02, 0.04, 0.08};
  opts.pairs = 600;
  opts.dt = 1e-3;
  opts.T = 1.0;
  opts.master_seed = 778;
  opts.threads = 2;
  auto rep = stability_check(f, [](double, const Vec&) { return Vec(Vec::Ones(1)); }, nullptr,
                             BoundedDomain::centered_box(1, 6.0), vec1(0.0), opts);
  REQUIRE(rep.fit_done);
  CHECK(rep.slope >= 0.8);
  CHECK(rep.slope <= 1.2);
  for (const auto& row : rep.rows) {
    // pathwise gap bound e^{LT} T eps sup|h_b| with L = T = sup|h_b| = 1
    CHECK(row.m <= std::exp(1.0) * row.eps * (1 + 1e-9));
  }
}

TEST_CASE("stability: hypothesis and ellipticity guards") {
  CoefficientField coarse = bm_field(1.0, 2.5, 2.5);  // d/p + 2/q = 1.2 >= 1
  StabilityOptions opts;
  opts.eps_ladder = {0.01};
  opts.pairs = 10;
  CHECK_THROWS_AS(stability_check(coarse, nullptr, nullptr, BoundedDomain::centered_box(1, 2.0),
                                  vec1(0.0), opts),
                  std::invalid_argument);

  CoefficientField f = bm_field(1.0, 8.0, 8.0);  // kappa = 1.5
  StabilityOptions big;
  big.eps_ladder = {0.5};  // sigma + 0.5 has eigenvalue 2.25 > kappa
  big.pairs = 10;
  CHECK_THROWS_AS(stability_check(f, nullptr,
                                  [](double, const Vec&) { return Mat(Mat::Identity(1, 1)); },
                                  BoundedDomain::centered_box(1, 2.0), vec1(0.0), big),
                  std::invalid_argument);
}

TEST_CASE("exponential moment: constant beta gives exactly exp(lambda T)") {
  CoefficientField f = bm_field();
  std::vector<PathSample> paths(1200);
  for (uint64_t i = 0; i < paths.size(); ++i) {
    paths[i] = euler_maruyama_localized(f, vec1(0.0), BoundedDomain::centered_box(1, 50.0), 1.0,
                                        1e-2, {99, i});
  }
  ScalarFn one = [](double, const Vec&) { return 1.0; };
  const double k0 = estimate_kappa0(paths, one);
  // finest windows are T/32 snapped outward to the dt = 0.01 grid: 0.04
  CHECK(k0 == doctest::Approx(0.04).epsilon(1e-9));

  auto rep = exponential_moment_check(paths, one, {0.5, 1.0, 50.0}, k0);
  REQUIRE(rep.lambdas.size() == 2);
  CHECK(rep.skipped_lambdas.size() == 1);  // 50 >= 1/kappa0 = 32
  for (size_t li = 0; li < rep.lambdas.size(); ++li) {
    for (const auto& [size, est] : rep.estimates[li]) {
      CHECK(est == doctest::Approx(std::exp(rep.lambdas[li])).epsilon(1e-9));
    }
    CHECK(rep.stabilized[li]);
  }
  CHECK(rep.pass);

  ScalarFn zero = [](double, const Vec&) { return 0.0; };
  auto rep0 = exponential_moment_check(paths, zero, {1.0}, 0.0);
  for (const auto& [size, est] : rep0.estimates[0]) CHECK(est == doctest::Approx(1.0));
}

TEST_CASE("exponential moment: sinusoidal sigma derivative stabilizes") {
  CoefficientField f;
  f.dim = 1;
  f.drift = [](double, const Vec&) { return Vec(Vec::Zero(1)); };
  f.diffusion = [](double, const Vec& x) {
    Mat m(1, 1);
    m(0, 0) = 1.0 + 0.3 * std::sin(x(0));
    return m;
  };
  f.kappa = 2.1;
  std::vector<PathSample> paths(2000);
  parallel_for_index(2000, 2, [&](long i) {
    paths[i] = euler_maruyama_localized(f, vec1(0.0), BoundedDomain::centered_box(1, 20.0), 1.0,
                                        1e-2, {314, static_cast<uint64_t>(i)});
  });
  ScalarFn beta = [](double, const Vec& x) {
    const double sp = 0.3 * std::cos(x(0));
    return sp * sp;
  };
  const double k0 = estimate_kappa0(paths, beta);
  CHECK(k0 > 0);
  auto rep = exponential_moment_check(paths, beta, {0.5 / k0, 0.9 / k0}, k0);
  CHECK(rep.pass);
  CHECK(rep.lambdas.size() == 2);
}

TEST_CASE("two-sample KS statistic handles ties and disjoint supports") {
  std::vector<double> a = {1, 2, 2, 3, 5, 5, 5, 9};
  CHECK(ks_statistic(a, a) == 0.0);
  std::vector<double> lo = {0, 1, 2}, hi = {10, 11, 12};
  CHECK(ks_statistic(lo, hi) == doctest::Approx(1.0));
  std::vector<double> u1, u2;
  for (int i = 0; i < 1000; ++i) {
    u1.push_back(i / 1000.0);
    u2.push_back(i / 1000.0 + 0.2);
  }
  CHECK(ks_statistic(u1, u2) == doctest::Approx(0.2).epsilon(0.02));
}

TEST_CASE("exponential moment: negative beta is rejected") {
  CoefficientField f = bm_field();
  std::vector<PathSample> paths(1000);
  for (uint64_t i = 0; i < paths.size(); ++i) {
    paths[i] = euler_maruyama_localized(f, vec1(0.0), BoundedDomain::centered_box(1, 50.0), 1.0,
                                        1e-2, {5, i});
  }
  CHECK_THROWS_AS(
      exponential_moment_check(paths, [](double, const Vec& x) { return x(0); }, {0.1}, 0.01),
      std::runtime_error);
}
