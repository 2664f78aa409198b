#include "sdelab/maximal.hpp"

#include "sdelab/norms.hpp"

#include <cmath>
#include <stdexcept>

namespace sdelab {

namespace {

double node_magnitude(const GridFunction& f, int k, long s) {
  if (f.components() == 1) return std::abs(f.value(k, s, 0));
  double sum = 0;
  for (int c = 0; c < f.components(); ++c) {
    double v = f.value(k, s, c);
    sum += v * v;
  }
  return std::sqrt(sum);
}

MaximalReport maximal_impl(const GridFunction& f, bool local, const std::string& input_id,
                           double norm_exponent) {
  f.check_finite("maximal");
  const auto& g = f.grid();
  const int d = g.dim();
  const double h = g.min_dx();

  MaximalReport rep{input_id, GridFunction(f.grid_ptr(), 1), {}, norm_exponent, 0};
  rep.radius_count.assign(static_cast<size_t>(g.time_nodes()) * g.space_size(), 0);

  // global cap: every ball beyond the box diagonal contains all nodes
  const double diam = g.domain().diameter();
  const int m_cap = static_cast<int>(std::ceil(diam / h)) + 1;

  for (int k = 0; k < g.time_nodes(); ++k) {
    for (long s = 0; s < g.space_size(); ++s) {
      const auto center = g.unflatten(s);
      const Vec x = g.node_point(s);
      const double dist = g.domain().boundary_distance(x);

      double best = node_magnitude(f, k, s);
      int radii = 0;
      for (int m = 1; m <= m_cap; ++m) {
        const double r = m * h;
        if (local && !(r < dist)) break;
        const double r2 = r * r;
        double sum = 0;
        long count = 0;
        // scan the index hyper-rectangle that can intersect the ball
        std::array<int, kMaxDim> offs_lo{}, offs_hi{}, it{};
        for (int a = 0; a < d; ++a) {
          const int reach = static_cast<int>(std::floor(r / g.dx(a)));
          offs_lo[a] = std::max(0, center[a] - reach);
          offs_hi[a] = std::min(g.space_nodes(a) - 1, center[a] + reach);
          it[a] = offs_lo[a];
        }
        while (true) {
          double d2 = 0;
          for (int a = 0; a < d; ++a) {
            const double da = (it[a] - center[a]) * g.dx(a);
            d2 += da * da;
          }
          if (d2 < r2) {
            sum += node_magnitude(f, k, g.flatten(it));
            ++count;
          }
          int a = 0;
          for (; a < d; ++a) {
            if (++it[a] <= offs_hi[a]) break;
            it[a] = offs_lo[a];
          }
          if (a == d) break;
        }
        if (count > 0) best = std::max(best, sum / count);
        ++radii;
      }
      rep.output.set_value(k, s, 0, best);
      rep.radius_count[static_cast<size_t>(k) * g.space_size() + s] = radii;
    }
  }

  const double f_norm = lqp_norm(f, norm_exponent, norm_exponent);
  rep.operator_norm_ratio =
      f_norm > 0 ? lqp_norm(rep.output, norm_exponent, norm_exponent) / f_norm : 0.0;
  return rep;
}

// quintic smoothstep ramp from 1 (t = 0) to 0 (t = 1), C^2 at both ends
double cutoff_ramp(double t) { return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t); }

}  // namespace

MaximalReport local_maximal(const GridFunction& f, const std::string& input_id,
                            double norm_exponent) {
  return maximal_impl(f, true, input_id, norm_exponent);
}

MaximalReport global_maximal(const GridFunction& f, const std::string& input_id,
                             double norm_exponent) {
  return maximal_impl(f, false, input_id, norm_exponent);
}

ExtensionResult extend_reflection(const GridFunction& f, double margin, double holder_alpha) {
  f.check_finite("extend_reflection");
  const auto& g = f.grid();
  const int d = g.dim();

  std::vector<int> ext(d);
  Vec lo(d), hi(d);
  std::vector<int> nx(d);
  std::vector<double> used(d);
  for (int a = 0; a < d; ++a) {
    ext[a] = std::max(1, static_cast<int>(std::lround(margin / g.dx(a))));
    used[a] = ext[a] * g.dx(a);
    if (used[a] > 0.5 * g.domain().width(a) * (1 + 1e-12)) {
      throw std::invalid_argument("extend_reflection: margin exceeds half the box width on axis " +
                                  std::to_string(a));
    }
    lo(a) = g.domain().lo()(a) - used[a];
    hi(a) = g.domain().hi()(a) + used[a];
    nx[a] = g.space_nodes(a) + 2 * ext[a];
  }
  auto big_grid = std::make_shared<SpaceTimeGrid>(
      BoundedDomain(lo, hi, g.domain().label() + "+margin"), g.horizon(), g.time_nodes(), nx);

  GridFunction out(big_grid, f.components());
  for (int k = 0; k < g.time_nodes(); ++k) {
    for (long s = 0; s < big_grid->space_size(); ++s) {
      auto idx = big_grid->unflatten(s);
      std::array<int, kMaxDim> src{};
      bool inside = true;
      double chi = 1.0;
      for (int a = 0; a < d; ++a) {
        int i = idx[a] - ext[a];  // index in the original grid frame
        if (i < 0) {
          chi *= cutoff_ramp(static_cast<double>(-i) / ext[a]);
          i = -i;
          inside = false;
        } else if (i > g.space_nodes(a) - 1) {
          const int over = i - (g.space_nodes(a) - 1);
          chi *= cutoff_ramp(static_cast<double>(over) / ext[a]);
          i = 2 * (g.space_nodes(a) - 1) - i;
          inside = false;
        }
        src[a] = i;
      }
      const long s_src = g.flatten(src);
      for (int c = 0; c < f.components(); ++c) {
        const double v = f.value(k, s_src, c);
        out.set_value(k, s, c, inside ? v : chi * v);
      }
    }
  }

  ExtensionResult res{std::move(out), used, holder_alpha, 0};
  double worst = 0;
  for (int k = 0; k < g.time_nodes(); ++k) {
    const double sem_f = holder_seminorm_estimate(f, holder_alpha, k);
    const double sem_q = holder_seminorm_estimate(res.extended, holder_alpha, k);
    double ratio;
    if (sem_f > 0) {
      ratio = sem_q / sem_f;
    } else {
      ratio = sem_q > 0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    worst = std::max(worst, ratio);
  }
  res.holder_ratio = worst;
  return res;
}

}  // namespace sdelab
