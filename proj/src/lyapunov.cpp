#include "sdelab/lyapunov.hpp"

#include "sdelab/stats.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sdelab {

double generator_apply(const CoefficientField& field, const LyapunovSpec& spec, double t,
                       const Vec& x) {
  const Mat a = field.a_matrix(t, x);
  const double val =
      spec.dt_V(t, x) + field.drift(t, x).dot(spec.grad_V(t, x)) + 0.5 * (a * spec.hess_V(t, x)).trace();
  if (!std::isfinite(val)) {
    std::ostringstream os;
    os << "generator_apply: non-finite value at t=" << t << ", x=[" << x.transpose() << "]";
    throw std::runtime_error(os.str());
  }
  return val;
}

LyapunovReport verify_lyapunov(const CoefficientField& field, const LyapunovSpec& spec,
                               const BoundedDomain& region, double C,
                               const LyapunovSampleOptions& opts) {
  const int d = region.dim();
  LyapunovReport rep;
  rep.worst_gap = -std::numeric_limits<double>::infinity();
  rep.c_hat = -std::numeric_limits<double>::infinity();

  std::array<int, kMaxDim> idx{};
  const int n = opts.nodes_per_axis;
  for (double t : opts.time_samples) {
    idx.fill(0);
    while (true) {
      Vec x(d);
      for (int a = 0; a < d; ++a) {
        x(a) = region.lo()(a) + region.width(a) * idx[a] / (n - 1);
      }
      const double v = spec.V(t, x);
      const double lv = generator_apply(field, spec, t, x);
      if (v < 0) {
        std::ostringstream os;
        os << "verify_lyapunov: V < 0 at t=" << t << ", x=[" << x.transpose() << "]";
        throw std::runtime_error(os.str());
      }
      const double gap = lv - C * v;
      if (gap > rep.worst_gap) {
        rep.worst_gap = gap;
        rep.worst_time = t;
        rep.worst_point = x;
      }
      if (v > 0) {
        rep.c_hat = std::max(rep.c_hat, lv / v);
      } else if (lv > 0) {
        rep.v_zero_violation = true;
        rep.v_zero_point = x;
      }
      ++rep.samples;

      int a = 0;
      for (; a < d; ++a) {
        if (++idx[a] < n) break;
        idx[a] = 0;
      }
      if (a == d) break;
    }
  }
  rep.pass = !rep.v_zero_violation && rep.worst_gap <= 1e-12 * std::max(1.0, std::abs(C));
  return rep;
}

double explosion_bound(const LyapunovSpec& spec, double C, const Vec& x0, double N, double R) {
  if (!spec.radial_infimum) {
    throw std::invalid_argument("explosion_bound: radial infimum map is required");
  }
  const double inf_v = spec.radial_infimum(R);
  if (inf_v <= 0) {
    std::fprintf(stderr, "explosion_bound: radial infimum vanishes at R=%g, bound is trivial\n", R);
    return 1.0;
  }
  return std::min(1.0, std::exp(C * N) * spec.V(0.0, x0) / inf_v);
}

namespace {

// state and time at t ^ tau on the recorded grid (exit states are always
// recorded last, so exited paths resolve exactly)
std::pair<double, Vec> stopped_state(const PathSample& path, double t) {
  size_t lo = 0, hi = path.times.size();
  while (lo + 1 < hi) {
    const size_t mid = (lo + hi) / 2;
    if (path.times[mid] <= t * (1 + 1e-12) + 1e-15) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {path.times[lo], path.state(lo)};
}

}  // namespace

SupermartingaleReport supermartingale_check(const std::vector<PathSample>& paths,
                                            const LyapunovSpec& spec, double C,
                                            const std::vector<double>& t_ladder) {
  if (paths.size() < 1000) {
    throw std::invalid_argument("supermartingale_check: need at least 10^3 paths");
  }
  SupermartingaleReport rep;
  rep.v0 = spec.V(0.0, paths.front().state(0));
  rep.pass = true;

  for (double t : t_ladder) {
    std::vector<double> vals;
    vals.reserve(paths.size());
    for (const auto& p : paths) {
      if (p.blew_up) continue;
      auto [ts, xs] = stopped_state(p, t);
      vals.push_back(std::exp(-C * ts) * spec.V(ts, xs));
    }
    const auto ms = mean_stderr(vals);
    rep.times.push_back(t);
    rep.means.push_back(ms.mean);
    rep.stderrs.push_back(ms.se);
    const bool ok = ms.mean <= rep.v0 + 3.0 * ms.se;
    rep.ok.push_back(ok);
    rep.pass = rep.pass && ok;
  }
  return rep;
}

}  // namespace sdelab
