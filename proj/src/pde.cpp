#include "sdelab/pde.hpp"

#include "sdelab/norms.hpp"
#include "sdelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace sdelab {

double PDESolution::max_residual() const {
  double m = 0;
  for (double r : step_residuals) m = std::max(m, r);
  return m;
}

namespace {

double bump(double s) {
  const double s2 = s * s;
  return s2 < 1.0 ? std::exp(-1.0 / (1.0 - s2)) : 0.0;
}

}  // namespace

GridFunction mollify(const GridFunction& f, int level) {
  if (level < 1) throw std::invalid_argument("mollify: level must be >= 1");
  f.check_finite("mollify");
  const auto& g = f.grid();
  const int d = g.dim();
  const double rt = g.horizon() / level;
  const double rx = g.domain().diameter() / level;

  if (rt < g.dt() || rx < g.min_dx()) {
    std::fprintf(stderr,
                 "mollify: kernel radius (%.3g time / %.3g space) below grid spacing, "
                 "returning input unchanged\n",
                 rt, rx);
    return f;
  }

  std::array<int, kMaxDim> jx{};
  const int jt = static_cast<int>(std::ceil(rt / g.dt())) - 1;
  for (int a = 0; a < d; ++a) jx[a] = static_cast<int>(std::ceil(rx / g.dx(a))) - 1;

  GridFunction out(f.grid_ptr(), f.components());
  std::vector<double> wt(2 * jt + 1);
  for (int j = -jt; j <= jt; ++j) wt[j + jt] = bump(j * g.dt() / rt);
  std::array<std::vector<double>, kMaxDim> wx;
  for (int a = 0; a < d; ++a) {
    wx[a].resize(2 * jx[a] + 1);
    for (int j = -jx[a]; j <= jx[a]; ++j) wx[a][j + jx[a]] = bump(j * g.dx(a) / rx);
  }

  for (int k = 0; k < g.time_nodes(); ++k) {
    for (long s = 0; s < g.space_size(); ++s) {
      const auto center = g.unflatten(s);
      for (int c = 0; c < f.components(); ++c) {
        double acc = 0, wsum = 0;
        for (int ot = -jt; ot <= jt; ++ot) {
          const int kk = k + ot;
          if (kk < 0 || kk >= g.time_nodes()) continue;
          const double w_t = wt[ot + jt];
          // iterate the spatial offset box
          std::array<int, kMaxDim> it{};
          std::array<int, kMaxDim> lo{}, hi{};
          for (int a = 0; a < d; ++a) {
            lo[a] = std::max(0, center[a] - jx[a]);
            hi[a] = std::min(g.space_nodes(a) - 1, center[a] + jx[a]);
            it[a] = lo[a];
          }
          while (true) {
            double w = w_t;
            for (int a = 0; a < d; ++a) w *= wx[a][it[a] - center[a] + jx[a]];
            if (w > 0) {
              acc += w * f.value(kk, g.flatten(it), c);
              wsum += w;
            }
            int a = 0;
            for (; a < d; ++a) {
              if (++it[a] <= hi[a]) break;
              it[a] = lo[a];
            }
            if (a == d) break;
          }
        }
        out.set_value(k, s, c, wsum > 0 ? acc / wsum : f.value(k, s, c));
      }
    }
  }
  return out;
}

namespace {

// axis-wise second-order derivative, one-sided at the two boundary layers
GridFunction derivative_axis(const GridFunction& v, int axis) {
  const auto& g = v.grid();
  const int d = g.dim();
  const double h = g.dx(axis);
  GridFunction out(v.grid_ptr(), v.components());

  for (int k = 0; k < g.time_nodes(); ++k) {
    for (long s = 0; s < g.space_size(); ++s) {
      auto idx = g.unflatten(s);
      const int i = idx[axis];
      const int n = g.space_nodes(axis);
      auto at = [&](int ii) {
        auto j = idx;
        j[axis] = ii;
        return g.flatten(j);
      };
      for (int c = 0; c < v.components(); ++c) {
        double dv;
        if (i == 0) {
          dv = (-3.0 * v.value(k, at(0), c) + 4.0 * v.value(k, at(1), c) -
                v.value(k, at(2), c)) /
               (2.0 * h);
        } else if (i == n - 1) {
          dv = (3.0 * v.value(k, at(n - 1), c) - 4.0 * v.value(k, at(n - 2), c) +
                v.value(k, at(n - 3), c)) /
               (2.0 * h);
        } else {
          dv = (v.value(k, at(i + 1), c) - v.value(k, at(i - 1), c)) / (2.0 * h);
        }
        out.set_value(k, s, c, dv);
      }
      (void)d;
    }
  }
  return out;
}

struct SampledStep {
  // node arrays at one time level
  std::vector<double> a;   // d*d per node
  std::vector<double> b;   // d per node
  std::vector<double> f;   // 1 per node
};

struct SampledCoefficients {
  GridFunction sigma;   // d*d
  GridFunction drift;   // d
  GridFunction source;  // 1

  SampledStep at_level(int k, int d, long ns) const {
    SampledStep st;
    st.a.resize(ns * d * d);
    st.b.resize(ns * d);
    st.f.resize(ns);
    for (long s = 0; s < ns; ++s) {
      Mat sg(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) sg(i, j) = sigma.value(k, s, i * d + j);
      Mat a = sg * sg.transpose();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) st.a[s * d * d + i * d + j] = a(i, j);
      for (int c = 0; c < d; ++c) st.b[s * d + c] = drift.value(k, s, c);
      st.f[s] = source.value(k, s, 0);
    }
    return st;
  }
};

void thomas_solve(std::vector<double>& lower, std::vector<double>& diag,
                  std::vector<double>& upper, std::vector<double>& rhs,
                  std::vector<double>& x) {
  const long n = static_cast<long>(diag.size());
  for (long i = 1; i < n; ++i) {
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (long i = n - 2; i >= 0; --i) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
}

}  // namespace

PDESolution solve_cauchy_dirichlet(const PDEProblem& problem, const SpaceTimeGrid& grid) {
  const int d = problem.field.dim;
  if (d < 1 || d > 2) {
    throw std::invalid_argument("solve_cauchy_dirichlet: only d in {1, 2} is supported");
  }
  for (int a = 0; a < d; ++a) {
    if (std::abs(grid.domain().lo()(a) - problem.domain.lo()(a)) > 1e-12 ||
        std::abs(grid.domain().hi()(a) - problem.domain.hi()(a)) > 1e-12) {
      throw std::invalid_argument("solve_cauchy_dirichlet: grid domain differs from problem domain");
    }
  }

  auto grid_ptr = std::make_shared<const SpaceTimeGrid>(grid);
  SampledCoefficients coeff{sample_diffusion(problem.field, grid_ptr),
                            sample_drift(problem.field, grid_ptr),
                            sample_scalar(problem.source, grid_ptr)};
  if (problem.mollify_level >= 1) {
    coeff.sigma = mollify(coeff.sigma, problem.mollify_level);
    coeff.drift = mollify(coeff.drift, problem.mollify_level);
    coeff.source = mollify(coeff.source, problem.mollify_level);
  }

  // ellipticity of the (possibly mollified) diffusion at the grid nodes
  {
    const double lo_ev = 1.0 / problem.field.kappa, hi_ev = problem.field.kappa;
    const long total = static_cast<long>(grid.time_nodes()) * grid.space_size();
    const long stride = std::max<long>(1, total / 2048);
    for (long n = 0; n < total; n += stride) {
      const int k = static_cast<int>(n / grid.space_size());
      const long s = n % grid.space_size();
      Mat sg(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) sg(i, j) = coeff.sigma.value(k, s, i * d + j);
      Eigen::SelfAdjointEigenSolver<Mat> es(Mat(sg * sg.transpose()));
      const double emin = es.eigenvalues().minCoeff(), emax = es.eigenvalues().maxCoeff();
      if (emin < lo_ev * (1 - 1e-9) || emax > hi_ev * (1 + 1e-9)) {
        std::ostringstream os;
        os << "solve_cauchy_dirichlet: ellipticity check failed at t=" << grid.time_node(k)
           << ", x=[" << grid.node_point(s).transpose() << "]: eigenvalues in [" << emin << ", "
           << emax << "] vs kappa=" << problem.field.kappa;
        throw std::runtime_error(os.str());
      }
      if (emin < 1e-14) throw std::runtime_error("solve_cauchy_dirichlet: degenerate diffusion");
    }
  }

  ScalarFn g_fn = problem.boundary ? problem.boundary
                                   : ScalarFn([](double, const Vec&) { return 0.0; });
  // terminal/boundary compatibility: g(T, .) must vanish on the boundary
  for (long s = 0; s < grid.space_size(); ++s) {
    if (!grid.is_boundary_node(s)) continue;
    const double gv = g_fn(grid.horizon(), grid.node_point(s));
    if (std::abs(gv) > 1e-8) {
      throw std::invalid_argument(
          "solve_cauchy_dirichlet: boundary data does not vanish at the terminal time");
    }
  }

  PDESolution sol{grid_ptr, GridFunction(grid_ptr, 1), GridFunction(grid_ptr, d),
                  GridFunction(grid_ptr, d * d), {}, 1.0, false, 1e-10};
  const int nt = grid.time_nodes();
  const long ns = grid.space_size();
  const double dt = grid.dt();
  sol.step_residuals.assign(nt - 1, 0.0);

  // terminal level is exactly zero (constructor zero-fills)

  std::vector<double> u_next(ns), u_cur(ns);
  for (long s = 0; s < ns; ++s) u_next[s] = 0.0;

  for (int k = nt - 2; k >= 0; --k) {
    const double t = grid.time_node(k);
    SampledStep st = coeff.at_level(k, d, ns);

    if (d == 1) {
      const double h = grid.dx(0);
      const long n = ns;
      std::vector<double> lower(n, 0), diag(n, 0), upper(n, 0), rhs(n, 0);
      for (long i = 0; i < n; ++i) {
        if (i == 0 || i == n - 1) {
          diag[i] = 1.0;
          rhs[i] = g_fn(t, grid.node_point(i));
          continue;
        }
        const double a = st.a[i];
        const double b = st.b[i];
        const double alpha = dt * a / (2.0 * h * h);
        double dg = 1.0 + 2.0 * alpha, lo = -alpha, up = -alpha;
        if (std::abs(b) * h / a <= 2.0) {
          const double gamma = dt * b / (2.0 * h);
          lo += gamma;
          up -= gamma;
        } else {
          sol.upwind_used = true;
          if (b > 0) {
            up -= dt * b / h;
            dg += dt * b / h;
          } else {
            lo -= dt * (-b) / h;
            dg += dt * (-b) / h;
          }
        }
        lower[i] = lo;
        diag[i] = dg;
        upper[i] = up;
        rhs[i] = u_next[i] + dt * st.f[i];
      }
      std::vector<double> ld = lower, dd = diag, ud = upper, rr = rhs;
      thomas_solve(ld, dd, ud, rr, u_cur);
      double res = 0;
      for (long i = 0; i < n; ++i) {
        double ax = diag[i] * u_cur[i];
        if (i > 0) ax += lower[i] * u_cur[i - 1];
        if (i + 1 < n) ax += upper[i] * u_cur[i + 1];
        res = std::max(res, std::abs(ax - rhs[i]));
      }
      sol.step_residuals[k] = res;
    } else {
      // 2D nine-point SOR sweep
      const double hx = grid.dx(0), hy = grid.dx(1);
      const int nx = grid.space_nodes(0), ny = grid.space_nodes(1);
      auto id = [&](int i, int j) { return static_cast<long>(i) * ny + j; };

      std::vector<double> rhs(ns), dgv(ns), cxm(ns), cxp(ns), cym(ns), cyp(ns), cc(ns);
      for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
          const long s = id(i, j);
          if (i == 0 || i == nx - 1 || j == 0 || j == ny - 1) {
            u_cur[s] = g_fn(t, grid.node_point(s));
            continue;
          }
          const double a00 = st.a[s * 4 + 0], a01 = st.a[s * 4 + 1], a11 = st.a[s * 4 + 3];
          const double b0 = st.b[s * 2 + 0], b1 = st.b[s * 2 + 1];
          const double cx = dt * a00 / (2 * hx * hx), cy = dt * a11 / (2 * hy * hy);
          const double m = dt * a01 / (4 * hx * hy);
          double dg = 1 + 2 * cx + 2 * cy;
          double xm = -cx, xp = -cx, ym = -cy, yp = -cy;
          if (std::abs(b0) * hx / a00 <= 2.0) {
            xm += dt * b0 / (2 * hx);
            xp -= dt * b0 / (2 * hx);
          } else {
            sol.upwind_used = true;
            if (b0 > 0) {
              xp -= dt * b0 / hx;
              dg += dt * b0 / hx;
            } else {
              xm += dt * b0 / hx;
              dg += dt * (-b0) / hx;
            }
          }
          if (std::abs(b1) * hy / a11 <= 2.0) {
            ym += dt * b1 / (2 * hy);
            yp -= dt * b1 / (2 * hy);
          } else {
            sol.upwind_used = true;
            if (b1 > 0) {
              yp -= dt * b1 / hy;
              dg += dt * b1 / hy;
            } else {
              ym += dt * b1 / hy;
              dg += dt * (-b1) / hy;
            }
          }
          dgv[s] = dg;
          cxm[s] = xm;
          cxp[s] = xp;
          cym[s] = ym;
          cyp[s] = yp;
          cc[s] = m;
          rhs[s] = u_next[s] + dt * st.f[s];
          u_cur[s] = u_next[s];  // warm start
        }
      }
      auto apply_offdiag = [&](int i, int j, const std::vector<double>& u) {
        const long s = id(i, j);
        double v = cxm[s] * u[id(i - 1, j)] + cxp[s] * u[id(i + 1, j)] +
                   cym[s] * u[id(i, j - 1)] + cyp[s] * u[id(i, j + 1)];
        v += cc[s] * (-u[id(i + 1, j + 1)] - u[id(i - 1, j - 1)] + u[id(i + 1, j - 1)] +
                      u[id(i - 1, j + 1)]);
        return v;
      };
      const double omega = 1.5;
      const int max_sweeps = 50000;
      double res = 0;
      int sweep = 0;
      for (; sweep < max_sweeps; ++sweep) {
        for (int i = 1; i < nx - 1; ++i) {
          for (int j = 1; j < ny - 1; ++j) {
            const long s = id(i, j);
            const double gs = (rhs[s] - apply_offdiag(i, j, u_cur)) / dgv[s];
            u_cur[s] += omega * (gs - u_cur[s]);
          }
        }
        res = 0;
        for (int i = 1; i < nx - 1; ++i) {
          for (int j = 1; j < ny - 1; ++j) {
            const long s = id(i, j);
            res = std::max(res,
                           std::abs(dgv[s] * u_cur[s] + apply_offdiag(i, j, u_cur) - rhs[s]));
          }
        }
        if (res <= sol.solver_tolerance) break;
      }
      if (res > sol.solver_tolerance) {
        throw std::runtime_error("solve_cauchy_dirichlet: 2D solve did not converge at step " +
                                 std::to_string(k) + " (residual " + std::to_string(res) + ")");
      }
      sol.step_residuals[k] = res;
    }

    for (long s = 0; s < ns; ++s) sol.u.set_value(k, s, 0, u_cur[s]);
    std::swap(u_next, u_cur);
  }

  auto gh = gradient_hessian(sol.u);
  sol.grad = std::move(gh.first);
  sol.hess = std::move(gh.second);
  return sol;
}

std::pair<GridFunction, GridFunction> gradient_hessian(const GridFunction& u) {
  if (u.components() != 1) throw std::invalid_argument("gradient_hessian: scalar input expected");
  const auto& g = u.grid();
  const int d = g.dim();
  for (int a = 0; a < d; ++a) {
    if (g.space_nodes(a) < 3) throw std::invalid_argument("gradient_hessian: need >= 3 nodes");
  }
  GridFunction grad(u.grid_ptr(), d), hess(u.grid_ptr(), d * d);
  std::vector<GridFunction> partials;
  partials.reserve(d);
  for (int a = 0; a < d; ++a) partials.push_back(derivative_axis(u, a));
  for (int a = 0; a < d; ++a) {
    for (int k = 0; k < g.time_nodes(); ++k)
      for (long s = 0; s < g.space_size(); ++s) grad.set_value(k, s, a, partials[a].value(k, s, 0));
  }
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      GridFunction h = derivative_axis(partials[b], a);
      for (int k = 0; k < g.time_nodes(); ++k)
        for (long s = 0; s < g.space_size(); ++s) hess.set_value(k, s, a * d + b, h.value(k, s, 0));
    }
  }
  return {std::move(grad), std::move(hess)};
}

DecayReport verify_decay_estimates(const PDESolution& solution, const PDEProblem& problem,
                                   const std::vector<double>& t_ladder, double holder_exponent) {
  if (t_ladder.size() < 3) {
    throw std::invalid_argument("verify_decay_estimates: ladder needs >= 3 points");
  }
  const auto& g = *solution.grid;
  DecayReport rep;
  for (double t : t_ladder) {
    int k = static_cast<int>(std::lround(t / g.dt()));
    k = std::max(0, std::min(k, g.time_nodes() - 1));
    rep.times.push_back(g.time_node(k));
    double sup = 0;
    for (long s = 0; s < g.space_size(); ++s) sup = std::max(sup, std::abs(solution.u.value(k, s, 0)));
    rep.sup_u.push_back(sup);
    rep.grad_holder.push_back(holder_seminorm_estimate(solution.grad, holder_exponent, k));
  }

  std::vector<double> lx, ly, gx, gy;
  for (size_t i = 0; i < rep.times.size(); ++i) {
    const double gap = problem.horizon - rep.times[i];
    if (gap <= 0) continue;
    if (rep.sup_u[i] > 0) {
      lx.push_back(std::log(gap));
      ly.push_back(std::log(rep.sup_u[i]));
    }
    if (rep.grad_holder[i] > 0) {
      gx.push_back(std::log(gap));
      gy.push_back(std::log(rep.grad_holder[i]));
    }
  }
  if (lx.size() >= 2) {
    auto fit = fit_line(lx, ly);
    rep.fitted_exponent = fit.slope;
    rep.fit_stderr = fit.slope_stderr;
    rep.fit_done = true;
  }
  if (gx.size() >= 2) rep.grad_fitted_exponent = fit_line(gx, gy).slope;

  // monotone decay toward the terminal time, with a small noise allowance
  rep.monotone_decay = true;
  std::vector<size_t> order(rep.times.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return rep.times[a] < rep.times[b]; });
  double peak = 0;
  for (size_t i = 0; i < order.size(); ++i) peak = std::max(peak, rep.sup_u[order[i]]);
  for (size_t i = 0; i + 1 < order.size(); ++i) {
    if (rep.sup_u[order[i + 1]] > rep.sup_u[order[i]] + 0.05 * peak) rep.monotone_decay = false;
  }
  return rep;
}

double sup_operator_norm(const GridFunction& matrix_field) {
  const auto& g = matrix_field.grid();
  const int d = g.dim();
  if (matrix_field.components() != d * d) {
    throw std::invalid_argument("sup_operator_norm: components != d*d");
  }
  double sup = 0;
  for (int k = 0; k < g.time_nodes(); ++k) {
    for (long s = 0; s < g.space_size(); ++s) {
      if (d == 1) {
        sup = std::max(sup, std::abs(matrix_field.value(k, s, 0)));
      } else {
        Mat m(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) m(i, j) = matrix_field.value(k, s, i * d + j);
        Eigen::SelfAdjointEigenSolver<Mat> es(Mat(m * m.transpose()));
        sup = std::max(sup, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())));
      }
    }
  }
  return sup;
}

namespace {

// sup-node operator norm of grad u for the d-component drift problem on one window
double window_grad_norm(const CoefficientField& field, const BoundedDomain& domain, double t0,
                        double eps, const WindowSearchOptions& opts) {
  const int d = field.dim;
  const int nt = std::max(5, static_cast<int>(std::lround(eps / opts.dt_target)) + 1);
  std::vector<int> nx(d, opts.space_nodes);
  SpaceTimeGrid grid(domain, eps, nt, nx);
  auto grid_ptr = std::make_shared<const SpaceTimeGrid>(grid);

  GridFunction grad_all(grid_ptr, d * d);
  for (int l = 0; l < d; ++l) {
    PDEProblem prob;
    prob.field = field;
    prob.field.drift = [&field, t0](double t, const Vec& x) { return field.drift(t0 + t, x); };
    prob.field.diffusion = [&field, t0](double t, const Vec& x) {
      return field.diffusion(t0 + t, x);
    };
    prob.source = [&field, t0, l](double t, const Vec& x) { return field.drift(t0 + t, x)(l); };
    prob.domain = domain;
    prob.horizon = eps;
    PDESolution sol = solve_cauchy_dirichlet(prob, grid);
    for (int a = 0; a < d; ++a)
      for (int k = 0; k < grid.time_nodes(); ++k)
        for (long s = 0; s < grid.space_size(); ++s)
          grad_all.set_value(k, s, l * d + a, sol.grad.value(k, s, a));
  }
  return sup_operator_norm(grad_all);
}

bool window_passes(const CoefficientField& field, const BoundedDomain& domain, double T,
                   double eps, const WindowSearchOptions& opts) {
  std::vector<double> starts;
  const double room = T - eps;
  const int np = std::max(1, opts.probe_starts);
  if (room <= 1e-12 * T) {
    starts.push_back(0.0);
  } else {
    for (int i = 0; i < np; ++i) starts.push_back(room * i / std::max(1, np - 1));
  }
  for (double t0 : starts) {
    if (window_grad_norm(field, domain, t0, eps, opts) > opts.grad_cap) return false;
  }
  return true;
}

}  // namespace

double choose_window(const CoefficientField& field, const BoundedDomain& domain, double T,
                     double drift_norm_cap, const WindowSearchOptions& opts) {
  if (drift_norm_cap > 0) {
    std::vector<int> nx(field.dim, opts.space_nodes);
    auto grid = std::make_shared<const SpaceTimeGrid>(domain, T, 65, nx);
    const double bnorm = lqp_norm(sample_drift(field, grid), field.p, field.q);
    if (bnorm > drift_norm_cap) {
      throw std::invalid_argument("choose_window: ||b|| = " + std::to_string(bnorm) +
                                  " exceeds the cap M = " + std::to_string(drift_norm_cap));
    }
  }

  double eps = T;
  if (window_passes(field, domain, T, eps, opts)) return eps;
  const double floor = 4.0 * opts.dt_target;
  while (true) {
    eps *= 0.5;
    if (eps < floor) {
      throw std::runtime_error(
          "choose_window: no admissible window above 4 time steps; grid too coarse or drift "
          "too large");
    }
    if (window_passes(field, domain, T, eps, opts)) break;
  }
  // push back up toward the first failing length
  double lo = eps, hi = std::min(2.0 * eps, T);
  for (int r = 0; r < opts.bisection_rounds; ++r) {
    const double mid = 0.5 * (lo + hi);
    if (window_passes(field, domain, T, mid, opts)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace sdelab
