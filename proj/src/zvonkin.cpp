#include "sdelab/zvonkin.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sdelab {

double TransformBundle::local_time(double t) const {
  double tau = t - s0_;
  return std::max(0.0, std::min(tau, grid_->horizon()));
}

Vec TransformBundle::phi(double t, const Vec& x) const {
  const double tau = local_time(t);
  Vec out = x;
  for (int l = 0; l < field_.dim; ++l) out(l) += u_.interpolate(tau, x, l);
  return out;
}

Mat TransformBundle::grad_phi(double t, const Vec& x) const {
  const double tau = local_time(t);
  const int d = field_.dim;
  Mat g(d, d);
  for (int l = 0; l < d; ++l)
    for (int a = 0; a < d; ++a)
      g(l, a) = (l == a ? 1.0 : 0.0) + grad_u_.interpolate(tau, x, l * d + a);
  return g;
}

Vec TransformBundle::phi_inverse(double t, const Vec& y, int max_iterations,
                                 int* iterations_used) const {
  const double tau = local_time(t);
  const auto& g = *grid_;
  if (!g.inside_box(y)) {
    std::ostringstream os;
    os << "invert_transform: query y=[" << y.transpose()
       << "] outside the grid box (image audit failed)";
    throw std::runtime_error(os.str());
  }
  Vec x = y;
  for (int k = 0; k < max_iterations; ++k) {
    Vec x_new = y;
    for (int l = 0; l < field_.dim; ++l) x_new(l) -= u_.interpolate(tau, x, l);
    if (!g.inside_box(x_new)) {
      std::ostringstream os;
      os << "invert_transform: iterate left the grid box at step " << k
         << " (image audit failed)";
      throw std::runtime_error(os.str());
    }
    const double step = (x_new - x).norm();
    x = x_new;
    if (step < inverse_tolerance_) {
      if (iterations_used) *iterations_used = k + 1;
      return x;
    }
  }
  throw std::runtime_error("invert_transform: no convergence in " +
                           std::to_string(max_iterations) + " iterations");
}

Mat TransformBundle::theta_at(double t, const Vec& x_hat) const {
  return grad_phi(t, x_hat) * field_.diffusion(t, x_hat);
}

Mat TransformBundle::theta(double t, const Vec& y) const {
  return theta_at(t, phi_inverse(t, y));
}

Vec TransformBundle::exit_state(double t, const Vec& y) const {
  const double tau = local_time(t);
  const auto& g = *grid_;
  Vec yc = y;
  for (int a = 0; a < field_.dim; ++a) {
    yc(a) = std::max(g.domain().lo()(a), std::min(g.domain().hi()(a), yc(a)));
  }
  Vec out = y;
  for (int l = 0; l < field_.dim; ++l) out(l) -= u_.interpolate(tau, yc, l);
  return out;
}

TransformBundle build_transform(const CoefficientField& field, const BoundedDomain& domain,
                                double s0, double t0, const TransformOptions& opts) {
  if (!(t0 > s0)) throw std::invalid_argument("build_transform: need t0 > s0");
  const int d = field.dim;
  const double window = t0 - s0;

  const int nt = std::max(5, static_cast<int>(std::lround(window / opts.dt_target)) + 1);
  std::vector<int> nx(d, opts.space_nodes);
  auto grid = std::make_shared<const SpaceTimeGrid>(domain, window, nt, nx);

  TransformBundle bundle;
  bundle.s0_ = s0;
  bundle.grid_ = grid;
  bundle.field_ = field;
  bundle.field_.drift = [field, s0](double t, const Vec& x) { return field.drift(s0 + t, x); };
  bundle.field_.diffusion = [field, s0](double t, const Vec& x) {
    return field.diffusion(s0 + t, x);
  };
  bundle.inverse_tolerance_ = opts.inverse_tolerance;
  bundle.u_ = GridFunction(grid, d);
  bundle.grad_u_ = GridFunction(grid, d * d);

  double max_hess = 0;
  for (int l = 0; l < d; ++l) {
    PDEProblem prob;
    prob.field = bundle.field_;
    prob.source = [f = bundle.field_, l](double t, const Vec& x) { return f.drift(t, x)(l); };
    prob.domain = domain;
    prob.horizon = window;
    prob.mollify_level = opts.mollify_level;
    PDESolution sol = solve_cauchy_dirichlet(prob, *grid);
    for (int k = 0; k < grid->time_nodes(); ++k) {
      for (long s = 0; s < grid->space_size(); ++s) {
        bundle.u_.set_value(k, s, l, sol.u.value(k, s, 0));
        for (int a = 0; a < d; ++a)
          bundle.grad_u_.set_value(k, s, l * d + a, sol.grad.value(k, s, a));
        for (int c = 0; c < d * d; ++c)
          max_hess = std::max(max_hess, std::abs(sol.hess.value(k, s, c)));
      }
    }
  }

  bundle.sup_grad_norm_ = sup_operator_norm(bundle.grad_u_);
  if (bundle.sup_grad_norm_ > opts.grad_cap) {
    std::ostringstream os;
    os << "build_transform: window [" << s0 << ", " << t0 << "] is too long: sup |grad u| = "
       << bundle.sup_grad_norm_ << " > " << opts.grad_cap
       << "; shrink it with choose_window";
    throw std::runtime_error(os.str());
  }

  // interpolation error bound: h^2/8 curvature per axis plus the linear-in-
  // time error estimated from second time differences
  double max_tt = 0;
  for (int k = 1; k + 1 < grid->time_nodes(); ++k) {
    for (long s = 0; s < grid->space_size(); ++s) {
      for (int l = 0; l < d; ++l) {
        const double second = bundle.u_.value(k + 1, s, l) - 2 * bundle.u_.value(k, s, l) +
                              bundle.u_.value(k - 1, s, l);
        max_tt = std::max(max_tt, std::abs(second) / (grid->dt() * grid->dt()));
      }
    }
  }
  double h2 = 0;
  for (int a = 0; a < d; ++a) h2 += grid->dx(a) * grid->dx(a);
  bundle.interp_error_ =
      std::sqrt(static_cast<double>(d)) *
      (max_hess * h2 / 8.0 + max_tt * grid->dt() * grid->dt() / 8.0);

  // (1/2)|x-y| <= |Phi x - Phi y| <= (3/2)|x-y| on random pairs, with a
  // 2x interpolation-error allowance
  BiLipschitzAudit audit;
  audit.pairs = opts.audit_pairs;
  audit.tolerance = 2.0 * bundle.interp_error_;
  uint64_t seed = opts.audit_seed;
  auto rnd = [&seed]() { return static_cast<double>(splitmix64(seed) >> 11) * 0x1.0p-53; };
  double worst_lo = std::numeric_limits<double>::infinity(), worst_hi = 0;
  for (long n = 0; n < opts.audit_pairs; ++n) {
    const double t = window * rnd();
    Vec x(d), y(d);
    for (int a = 0; a < d; ++a) {
      x(a) = domain.lo()(a) + domain.width(a) * rnd();
      y(a) = domain.lo()(a) + domain.width(a) * rnd();
    }
    const double dist = (x - y).norm();
    if (dist < 1e-9 * domain.diameter()) continue;
    const double image_dist = (bundle.phi(s0 + t, x) - bundle.phi(s0 + t, y)).norm();
    worst_lo = std::min(worst_lo, image_dist / dist);
    worst_hi = std::max(worst_hi, image_dist / dist);
    if (image_dist < 0.5 * dist - audit.tolerance ||
        image_dist > 1.5 * dist + audit.tolerance) {
      ++audit.violations;
    }
  }
  audit.worst_lower_ratio = worst_lo;
  audit.worst_upper_ratio = worst_hi;
  audit.pass = audit.violations == 0;
  bundle.audit_ = audit;
  if (!audit.pass) {
    std::ostringstream os;
    os << "build_transform: bi-Lipschitz audit failed on " << audit.violations << "/"
       << audit.pairs << " pairs (ratios in [" << worst_lo << ", " << worst_hi << "])";
    throw std::runtime_error(os.str());
  }
  return bundle;
}

Vec invert_transform(const TransformBundle& bundle, double t, const Vec& y) {
  return bundle.phi_inverse(t, y);
}

DiffusionFn transformed_diffusion(const TransformBundle& bundle) {
  return [bundle](double t, const Vec& y) { return bundle.theta(t, y); };
}

ThetaEllipticityAudit audit_theta_ellipticity(const TransformBundle& bundle, long samples,
                                              uint64_t seed) {
  const auto& field = bundle.field();
  const int d = field.dim;
  const auto& dom = bundle.grid().domain();
  ThetaEllipticityAudit audit;
  audit.samples = samples;
  audit.eig_min = std::numeric_limits<double>::infinity();
  audit.eig_max = 0;

  const double s = bundle.sup_grad_norm();
  audit.sharp_lo = (1 - s) * (1 - s) / field.kappa;
  audit.sharp_hi = (1 + s) * (1 + s) * field.kappa;
  const double kp = 2.25 * field.kappa;
  audit.nominal_lo = 1.0 / kp;
  audit.nominal_hi = kp;

  auto rnd = [&seed]() { return static_cast<double>(splitmix64(seed) >> 11) * 0x1.0p-53; };
  for (long n = 0; n < samples; ++n) {
    const double t = bundle.window_start() + bundle.grid().horizon() * rnd();
    Vec y(d);
    for (int a = 0; a < d; ++a) y(a) = dom.lo()(a) + dom.width(a) * rnd();
    Mat th = bundle.theta(t, y);
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(th * th.transpose()));
    audit.eig_min = std::min(audit.eig_min, es.eigenvalues().minCoeff());
    audit.eig_max = std::max(audit.eig_max, es.eigenvalues().maxCoeff());
  }
  const double slack = 1e-9;
  audit.within_sharp =
      audit.eig_min >= audit.sharp_lo * (1 - slack) - slack * 0 &&
      audit.eig_max <= audit.sharp_hi * (1 + slack);
  audit.within_nominal = audit.eig_min >= audit.nominal_lo * (1 - slack) &&
                         audit.eig_max <= audit.nominal_hi * (1 + slack);
  return audit;
}

ZvonkinSimulator::ZvonkinSimulator(const CoefficientField& field, const BoundedDomain& domain,
                                   double T, double dt, const TransformOptions& opts)
    : field_(field), domain_(domain), T_(T), dt_(dt) {
  n_steps_ = std::lround(T / dt);
  if (n_steps_ < 1 || std::abs(n_steps_ * dt - T) > 1e-9 * std::max(1.0, T)) {
    throw std::invalid_argument("ZvonkinSimulator: dt must divide T within rounding");
  }

  WindowSearchOptions wopts;
  wopts.space_nodes = opts.space_nodes;
  wopts.dt_target = opts.dt_target;
  wopts.grad_cap = opts.grad_cap;
  const double eps = choose_window(field, domain, T, 0.0, wopts);

  // windows are whole numbers of simulation steps
  steps_per_window_ = static_cast<long>(std::floor(eps / dt + 1e-9));
  steps_per_window_ = std::max<long>(1, std::min(steps_per_window_, n_steps_));

  for (long k0 = 0; k0 < n_steps_; k0 += steps_per_window_) {
    const long k1 = std::min(k0 + steps_per_window_, n_steps_);
    bundles_.push_back(build_transform(field, domain, k0 * dt, k1 * dt, opts));
    window_start_step_.push_back(k0);
  }
}

PathSample ZvonkinSimulator::simulate(const Vec& x0, RngStreamSpec stream,
                                      const SimOptions& sim_opts) const {
  if (!domain_.contains(x0)) throw std::invalid_argument("ZvonkinSimulator: x0 must lie in D");
  PathSample out;
  out.dim = field_.dim;
  out.step_dt = dt_;
  out.stream = stream;
  RngStream rng(stream);
  const double sqrt_dt = std::sqrt(dt_);
  const Vec zero_drift = Vec::Zero(field_.dim);

  auto record = [&](long, double t, const Vec& x) {
    out.times.push_back(t);
    for (int c = 0; c < field_.dim; ++c) out.states.push_back(x(c));
  };
  long last_recorded = -1;
  auto maybe_record = [&](long k, double t, const Vec& x) {
    if (sim_opts.record_stride > 0 && k % sim_opts.record_stride == 0) {
      record(k, t, x);
      last_recorded = k;
    }
  };
  auto finalize = [&](long k, double t, const Vec& x) {
    if (last_recorded != k) record(k, t, x);
  };

  Vec x = x0;
  maybe_record(0, 0.0, x);

  size_t w = 0;
  Vec y = bundles_[w].phi(0.0, x);
  for (long k = 0; k < n_steps_; ++k) {
    // advance to the window containing step k
    while (w + 1 < bundles_.size() && k >= window_start_step_[w + 1]) {
      ++w;
      y = bundles_[w].phi(k * dt_, x);
    }
    const TransformBundle& b = bundles_[w];
    const double t = k * dt_;
    const Vec xi = rng.normal_vec(field_.dim);
    const Mat theta = b.theta_at(t, x);
    em_step(zero_drift, theta, dt_, sqrt_dt, xi, y);
    const double t_next = (k + 1) * dt_;

    bool finite = true;
    for (int c = 0; c < field_.dim; ++c) {
      if (!std::isfinite(y(c))) finite = false;
    }
    if (!finite) {
      out.blew_up = true;
      finalize(k + 1, t_next, y);
      return out;
    }
    if (!b.grid().inside_box(y)) {
      // Y left the image box, so X left D; record the mapped exit state
      x = b.exit_state(t_next, y);
      out.exited = true;
      out.exit_time = t_next;
      finalize(k + 1, t_next, x);
      return out;
    }
    x = b.phi_inverse(t_next, y);
    if (!domain_.contains(x)) {
      out.exited = true;
      out.exit_time = t_next;
      finalize(k + 1, t_next, x);
      return out;
    }
    maybe_record(k + 1, t_next, x);
  }
  finalize(n_steps_, n_steps_ * dt_, x);
  return out;
}

PathSample simulate_via_zvonkin(const CoefficientField& field, const Vec& x0,
                                const BoundedDomain& domain, double T, double dt,
                                RngStreamSpec stream, const TransformOptions& opts,
                                const SimOptions& sim_opts) {
  ZvonkinSimulator sim(field, domain, T, dt, opts);
  return sim.simulate(x0, stream, sim_opts);
}

}  // namespace sdelab
