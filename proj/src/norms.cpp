#include "sdelab/norms.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace sdelab {

namespace {

double magnitude(const GridFunction& f, int k, long s) {
  if (f.components() == 1) return std::abs(f.value(k, s, 0));
  double sum = 0;
  for (int c = 0; c < f.components(); ++c) {
    double v = f.value(k, s, c);
    sum += v * v;
  }
  return std::sqrt(sum);
}

// mean of |f| over the 2^d corners of the space cell anchored at `cell`
double cell_corner_mean(const GridFunction& f, int t_idx, const std::array<int, kMaxDim>& cell) {
  const auto& g = f.grid();
  const int d = g.dim();
  const int ncorner = 1 << d;
  double sum = 0;
  std::array<int, kMaxDim> idx{};
  for (int c = 0; c < ncorner; ++c) {
    for (int a = 0; a < d; ++a) idx[a] = cell[a] + ((c >> a) & 1);
    sum += magnitude(f, t_idx, g.flatten(idx));
  }
  return sum / ncorner;
}

template <typename Fn>
void for_each_space_cell(const SpaceTimeGrid& g, Fn fn) {
  const int d = g.dim();
  std::array<int, kMaxDim> cell{};
  while (true) {
    fn(cell);
    int a = 0;
    for (; a < d; ++a) {
      if (++cell[a] < g.space_nodes(a) - 1) break;
      cell[a] = 0;
    }
    if (a == d) break;
  }
}

// spatial L^p at one time level; corners averaged across the two adjacent
// time levels when t_pair >= 0 (midpoint-in-time sample)
double spatial_lp(const GridFunction& f, double p, int t_idx, int t_pair) {
  const auto& g = f.grid();
  double cell_vol = 1.0;
  for (int a = 0; a < g.dim(); ++a) cell_vol *= g.dx(a);

  if (p == kInfExponent) {
    double m = 0;
    for (long s = 0; s < g.space_size(); ++s) {
      m = std::max(m, magnitude(f, t_idx, s));
      if (t_pair >= 0) m = std::max(m, magnitude(f, t_pair, s));
    }
    return m;
  }
  double acc = 0;
  for_each_space_cell(g, [&](const std::array<int, kMaxDim>& cell) {
    double mid = cell_corner_mean(f, t_idx, cell);
    if (t_pair >= 0) mid = 0.5 * (mid + cell_corner_mean(f, t_pair, cell));
    acc += cell_vol * std::pow(mid, p);
  });
  return std::pow(acc, 1.0 / p);
}

}  // namespace

double lqp_norm(const GridFunction& f, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) {
    throw std::invalid_argument("lqp_norm: exponents must lie in [1, infinity]");
  }
  f.check_finite("lqp_norm");
  const auto& g = f.grid();

  if (q == kInfExponent) {
    double m = 0;
    for (int k = 0; k < g.time_nodes(); ++k) m = std::max(m, spatial_lp(f, p, k, -1));
    return m;
  }
  double acc = 0;
  for (int k = 0; k + 1 < g.time_nodes(); ++k) {
    double inner = spatial_lp(f, p, k, k + 1);
    acc += g.dt() * std::pow(inner, q);
  }
  return std::pow(acc, 1.0 / q);
}

EllipticityReport ellipticity_check(const CoefficientField& field, const SpaceTimeGrid& grid,
                                    long samples) {
  if (samples < 1) throw std::invalid_argument("ellipticity_check: samples >= 1 required");
  const long total = static_cast<long>(grid.time_nodes()) * grid.space_size();
  const long stride = std::max<long>(1, total / samples);

  EllipticityReport rep;
  rep.eig_min = std::numeric_limits<double>::infinity();
  rep.eig_max = -std::numeric_limits<double>::infinity();
  const double lo = 1.0 / field.kappa;
  const double hi = field.kappa;
  const double slack = 1e-12 * std::max(1.0, hi);

  double worst_excess = -std::numeric_limits<double>::infinity();
  for (long n = 0; n < total; n += stride) {
    const int k = static_cast<int>(n / grid.space_size());
    const long s = n % grid.space_size();
    const double t = grid.time_node(k);
    const Vec x = grid.node_point(s);
    Mat a = field.a_matrix(t, x);
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
      std::ostringstream os;
      os << "ellipticity_check: sigma sigma^T asymmetric by " << asym << " at t=" << t
         << ", x=[" << x.transpose() << "]";
      throw std::runtime_error(os.str());
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    for (int i = 0; i < field.dim; ++i) {
      const double ev = es.eigenvalues()(i);
      rep.eig_min = std::min(rep.eig_min, ev);
      rep.eig_max = std::max(rep.eig_max, ev);
      // signed distance beyond the admissible interval
      const double excess = std::max(lo - ev, ev - hi);
      if (excess > worst_excess) {
        worst_excess = excess;
        rep.worst_eigenvalue = ev;
        rep.worst_time = t;
        rep.worst_point = x;
      }
    }
    ++rep.samples_used;
  }
  rep.pass = (rep.eig_min >= lo - slack) && (rep.eig_max <= hi + slack);
  return rep;
}

double holder_seminorm_estimate(const GridFunction& f, double alpha, int t_idx) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("holder_seminorm_estimate: alpha must be in (0, 1]");
  }
  const auto& g = f.grid();
  const long n = g.space_size();
  if (n < 2) throw std::invalid_argument("holder_seminorm_estimate: need >= 2 spatial nodes");

  auto diff_ratio = [&](long s1, long s2) {
    double num = 0;
    for (int c = 0; c < f.components(); ++c) {
      double dv = f.value(t_idx, s1, c) - f.value(t_idx, s2, c);
      num += dv * dv;
    }
    const double dist = (g.node_point(s1) - g.node_point(s2)).norm();
    return std::sqrt(num) / std::pow(dist, alpha);
  };

  double best = 0;
  if (n <= 10000) {
    for (long i = 0; i < n; ++i)
      for (long j = i + 1; j < n; ++j) best = std::max(best, diff_ratio(i, j));
  } else {
    // fixed-seed pair sample; splitmix64 keeps this reproducible
    uint64_t state = 0x9E3779B97F4A7C15ull;
    auto next = [&state]() {
      state += 0x9E3779B97F4A7C15ull;
      uint64_t z = state;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      return z ^ (z >> 31);
    };
    const long pairs = 2'000'000;
    for (long k = 0; k < pairs; ++k) {
      long i = static_cast<long>(next() % static_cast<uint64_t>(n));
      long j = static_cast<long>(next() % static_cast<uint64_t>(n));
      if (i != j) best = std::max(best, diff_ratio(i, j));
    }
    // always include nearest-neighbour pairs along the first axis
    for (long i = 0; i + 1 < n; ++i) best = std::max(best, diff_ratio(i, i + 1));
  }
  return best;
}

}  // namespace sdelab
