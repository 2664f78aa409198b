#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdelab/coefficients.hpp"
#include "sdelab/maximal.hpp"
#include "sdelab/norms.hpp"
#include "sdelab/rng.hpp"

#include <cmath>

using namespace sdelab;

namespace {

std::shared_ptr<const SpaceTimeGrid> grid_1d(double lo, double hi, int nx, int nt = 2) {
  return std::make_shared<const SpaceTimeGrid>(BoundedDomain(vec1(lo), vec1(hi)), 1.0, nt,
                                               std::vector<int>{nx});
}

// independent exhaustive evaluation of the discrete maximal operator:
// open balls |y - x| < m * dx, m = 1, 2, ..., local variant bounded by
// dist(x, D^c), value |f(x)| when no radius qualifies
double brute_force_maximal(const GridFunction& f, int k, long center, bool local) {
  const auto& g = f.grid();
  const double h = g.dx(0);
  const double x = g.space_node(0, center);
  const double dist = std::min(x - g.domain().lo()(0), g.domain().hi()(0) - x);
  double best = std::abs(f.value(k, center, 0));
  for (int m = 1;; ++m) {
    const double r = m * h;
    if (local && !(r < dist)) break;
    if (!local && r > g.domain().diameter() + h) break;
    double sum = 0;
    long count = 0;
    for (long j = 0; j < g.space_size(); ++j) {
      const double d = (j - center) * h;
      if (d * d < r * r) {
        sum += std::abs(f.value(k, j, 0));
        ++count;
      }
    }
    if (count > 0) best = std::max(best, sum / count);
  }
  return best;
}

}  // namespace

TEST_CASE("maximal operator of a constant is the constant") {
  auto g = grid_1d(0, 1, 33);
  GridFunction f = sample_scalar([](double, const Vec&) { return -2.5; }, g);
  auto loc = local_maximal(f);
  auto glo = global_maximal(f);
  for (long s = 0; s < g->space_size(); ++s) {
    CHECK(loc.output.value(0, s, 0) == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(glo.output.value(0, s, 0) == doctest::Approx(2.5).epsilon(1e-14));
  }
}

TEST_CASE("local maximal of a linear function equals the function") {
  auto g = grid_1d(0, 1, 41);
  GridFunction f = sample_scalar([](double, const Vec& x) { return x(0); }, g);
  auto rep = local_maximal(f);
  for (long s = 0; s < g->space_size(); ++s) {
    CHECK(rep.output.value(0, s, 0) == doctest::Approx(g->space_node(0, s)).epsilon(1e-13));
  }
}

TEST_CASE("local maximal of the half indicator") {
  auto g = grid_1d(0, 1, 201);
  GridFunction f = sample_scalar([](double, const Vec& x) { return x(0) < 0.5 ? 1.0 : 0.0; }, g);
  auto rep = local_maximal(f);
  const long i75 = 150;  // x = 0.75: every admissible ball sees only zeros
  CHECK(rep.output.value(0, i75, 0) == 0.0);
  const long i50 = 100;  // x = 0.5: balls are half ones, up to the grid effect
  CHECK(rep.output.value(0, i50, 0) == doctest::Approx(0.5).epsilon(2 * g->dx(0)));
}

TEST_CASE("local and global maximal match exhaustive brute force on a 64-node grid") {
  auto g = grid_1d(-1, 1, 64);
  RngStream rng({2024, 0});
  GridFunction f(g, 1);
  for (int k = 0; k < g->time_nodes(); ++k)
    for (long s = 0; s < g->space_size(); ++s) f.set_value(k, s, 0, rng.normal());
  auto loc = local_maximal(f);
  auto glo = global_maximal(f);
  for (long s = 0; s < g->space_size(); ++s) {
    CHECK(loc.output.value(0, s, 0) == brute_force_maximal(f, 0, s, true));
    CHECK(glo.output.value(0, s, 0) == brute_force_maximal(f, 0, s, false));
  }
}

TEST_CASE("maximal operator dominates |f| and is sublinear") {
  auto g = grid_1d(0, 1, 65);
  RngStream rng({7, 0});
  GridFunction f(g, 1), h(g, 1), sum(g, 1);
  for (int k = 0; k < g->time_nodes(); ++k) {
    for (long s = 0; s < g->space_size(); ++s) {
      const double a = rng.normal(), b = rng.normal();
      f.set_value(k, s, 0, a);
      h.set_value(k, s, 0, b);
      sum.set_value(k, s, 0, a + b);
    }
  }
  auto mf = local_maximal(f), mh = local_maximal(h), ms = local_maximal(sum);
  for (long s = 0; s < g->space_size(); ++s) {
    CHECK(mf.output.value(0, s, 0) >= std::abs(f.value(0, s, 0)) - 1e-15);
    CHECK(ms.output.value(0, s, 0) <=
          mf.output.value(0, s, 0) + mh.output.value(0, s, 0) + 1e-12);
  }
  auto gf = global_maximal(f);
  for (long s = 0; s < g->space_size(); ++s) {
    CHECK(gf.output.value(0, s, 0) >= std::abs(f.value(0, s, 0)) - 1e-15);
  }
}

TEST_CASE("empirical L^p boundedness of the local maximal operator") {
  auto g = grid_1d(0, 1, 101);
  for (double p : {2.0, 4.0}) {
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      RngStream rng({1000 + static_cast<uint64_t>(trial), 0});
      GridFunction f(g, 1);
      for (int k = 0; k < g->time_nodes(); ++k)
        for (long s = 0; s < g->space_size(); ++s) f.set_value(k, s, 0, rng.normal());
      auto rep = local_maximal(f, "random", p);
      worst = std::max(worst, rep.operator_norm_ratio);
    }
    INFO("measured C_p for p=", p, ": ", worst);
    CHECK(worst < 5.0);
    CHECK(std::isfinite(worst));
  }
}

TEST_CASE("reflection extension restricts to the identity bitwise") {
  auto g = grid_1d(0, 1, 21, 3);
  GridFunction f = sample_scalar(
      [](double t, const Vec& x) { return std::sin(5 * x(0)) + t; }, g);
  auto ext = extend_reflection(f, 0.25, 0.5);
  const auto& big = ext.extended.grid();
  const int off = static_cast<int>(std::lround(ext.margin[0] / g->dx(0)));
  for (int k = 0; k < g->time_nodes(); ++k) {
    for (long s = 0; s < g->space_size(); ++s) {
      std::array<int, kMaxDim> idx{};
      idx[0] = static_cast<int>(s) + off;
      CHECK(ext.extended.value(k, big.flatten(idx), 0) == f.value(k, s, 0));
    }
  }
}

TEST_CASE("reflection extension mirrors values and applies the cutoff") {
  auto g = grid_1d(0, 1, 21, 2);
  GridFunction ones = sample_scalar([](double, const Vec&) { return 1.0; }, g);
  GridFunction lin = sample_scalar([](double, const Vec& x) { return x(0); }, g);
  auto ext1 = extend_reflection(ones, 0.25, 0.5);
  auto extx = extend_reflection(lin, 0.25, 0.5);
  const auto& big = ext1.extended.grid();
  const int off = static_cast<int>(std::lround(ext1.margin[0] / g->dx(0)));

  // left margin: node at y = -j dx mirrors f(j dx), scaled by the cutoff,
  // with the cutoff read off the extension of the constant 1
  for (int j = 1; j <= off; ++j) {
    std::array<int, kMaxDim> idx{};
    idx[0] = off - j;
    const double cutoff = ext1.extended.value(0, big.flatten(idx), 0);
    const double mirrored = extx.extended.value(0, big.flatten(idx), 0);
    const double source = lin.value(0, j, 0);
    CHECK(mirrored == doctest::Approx(cutoff * source).epsilon(1e-14));
    if (j < off) CHECK(cutoff > 0.0);
  }
  // outer edge of the margin is exactly 0; inside D it is exactly 1
  std::array<int, kMaxDim> edge{};
  edge[0] = 0;
  CHECK(ext1.extended.value(0, big.flatten(edge), 0) == 0.0);
  edge[0] = off + 5;
  CHECK(ext1.extended.value(0, big.flatten(edge), 0) == 1.0);
}

TEST_CASE("reflection extension keeps the Holder seminorm ratio finite") {
  auto g = grid_1d(0, 1, 101, 2);
  GridFunction f =
      sample_scalar([](double, const Vec& x) { return std::sqrt(std::abs(x(0) - 0.5)); }, g);
  auto ext = extend_reflection(f, 0.25, 0.5);
  INFO("measured C_Q: ", ext.holder_ratio);
  CHECK(std::isfinite(ext.holder_ratio));
  CHECK(ext.holder_ratio >= 1.0 - 1e-12);  // the original pairs are a subset
  CHECK(ext.holder_ratio < 10.0);
}

TEST_CASE("reflection extension rejects margins beyond half the width") {
  auto g = grid_1d(0, 1, 21, 2);
  GridFunction f = sample_scalar([](double, const Vec&) { return 1.0; }, g);
  CHECK_THROWS_AS(extend_reflection(f, 0.75, 0.5), std::invalid_argument);
}
