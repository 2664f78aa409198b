#include "sdelab/verifiers.hpp"

#include "sdelab/norms.hpp"
#include "sdelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sdelab {

namespace {

std::shared_ptr<const SpaceTimeGrid> norm_grid(const BoundedDomain& domain, double T,
                                               int space_nodes, int time_nodes) {
  std::vector<int> nx(domain.dim(), space_nodes);
  return std::make_shared<const SpaceTimeGrid>(domain, T, time_nodes, nx);
}

}  // namespace

KrylovReport krylov_check(const CoefficientField& field, const ScalarFn& f,
                          const BoundedDomain& domain, const Vec& x0, const KrylovOptions& opts) {
  if (!field.admissible_for_krylov()) {
    throw std::invalid_argument("krylov_check: requires d/p + 2/q < 2");
  }
  if (opts.s_ladder.empty()) throw std::invalid_argument("krylov_check: empty ladder");
  const double delta_max = 1.0 - field.dim / (2.0 * field.p) - 1.0 / field.q;
  const double delta = opts.delta > 0 ? opts.delta : 0.5 * delta_max;
  if (!(delta > 0 && delta < delta_max)) {
    throw std::invalid_argument("krylov_check: delta must lie in (0, 1 - d/(2p) - 1/q)");
  }

  std::vector<double> ladder = opts.s_ladder;
  std::sort(ladder.begin(), ladder.end(), std::greater<>());  // decreasing lengths
  for (double s : ladder) {
    if (!(s > opts.r && s <= opts.T)) {
      throw std::invalid_argument("krylov_check: ladder points must lie in (r, T]");
    }
  }

  KrylovReport rep;
  rep.delta = delta;
  rep.f_norm = lqp_norm(
      sample_scalar(f, norm_grid(domain, opts.T, opts.norm_space_nodes, opts.norm_time_nodes)),
      field.p, field.q);

  // per path: trapezoid of |f| along the trajectory, checkpointed at r and
  // at every ladder point
  const long n_checks = static_cast<long>(ladder.size());
  std::vector<std::vector<double>> lhs(n_checks, std::vector<double>(opts.paths, 0.0));
  std::vector<long> survived_to_r(opts.paths, 0);

  parallel_for_index(opts.paths, opts.threads, [&](long pi) {
    double integ = 0;
    double last_val = 0;
    bool first = true;
    std::vector<double> checkpoint(n_checks, -1.0);
    double r_value = -1.0;
    StepObserver observer = [&](long /*k*/, double t, const Vec& x) {
      const double val = std::abs(f(t, x));
      if (first) {
        first = false;
      } else {
        integ += 0.5 * (last_val + val) * opts.dt;
      }
      last_val = val;
      if (r_value < 0 && t >= opts.r - 1e-12) {
        r_value = integ;
      }
      for (long j = 0; j < n_checks; ++j) {
        if (checkpoint[j] < 0 && t >= ladder[j] - 1e-12) checkpoint[j] = integ;
      }
    };
    PathSample p = euler_maruyama_localized(field, x0, domain, opts.T, opts.dt,
                                            {opts.master_seed, static_cast<uint64_t>(pi)},
                                            SimOptions{0}, &observer);
    // checkpoints never reached freeze at the stopped integral
    if (r_value < 0) r_value = integ;
    survived_to_r[pi] = (!p.exited || !p.exit_time || *p.exit_time > opts.r) ? 1 : 0;
    for (long j = 0; j < n_checks; ++j) {
      const double cj = checkpoint[j] < 0 ? integ : checkpoint[j];
      lhs[j][pi] = cj - r_value;
    }
  });

  long survivors = 0;
  for (long v : survived_to_r) survivors += v;
  if (survivors == 0) {
    throw std::runtime_error(
        "krylov_check: every path exited before r; enlarge D or reduce r");
  }

  std::vector<double> log_len, log_lhs;
  double c_dom = 0;
  bool all_zero = true;
  for (long j = 0; j < n_checks; ++j) {
    auto ms = mean_stderr(lhs[j]);
    KrylovRow row{opts.r, ladder[j], ms.mean, ms.se, 0.0};
    rep.rows.push_back(row);
    if (ms.mean > 0) {
      all_zero = false;
      log_len.push_back(std::log(ladder[j] - opts.r));
      log_lhs.push_back(std::log(ms.mean));
      if (rep.f_norm > 0) {
        c_dom = std::max(c_dom, ms.mean / (std::pow(ladder[j] - opts.r, delta) * rep.f_norm));
      }
    }
  }
  rep.c_hat = c_dom;
  for (auto& row : rep.rows) {
    row.rhs = rep.c_hat * std::pow(row.s - row.r, delta) * rep.f_norm;
  }

  if (all_zero) {
    rep.fit_done = false;
    rep.pass = true;  // f = 0 on the visited set: nothing to bound
  } else if (log_len.size() >= 2) {
    auto fit = fit_line(log_len, log_lhs);
    rep.delta_hat = fit.slope;
    rep.delta_se = fit.slope_stderr;
    rep.fit_done = true;
    bool dominated = std::isfinite(rep.c_hat);
    for (const auto& row : rep.rows) {
      if (row.lhs > row.rhs * (1 + 1e-12)) dominated = false;
    }
    rep.pass = (rep.delta_hat >= delta - rep.delta_se) && dominated;
  } else {
    rep.fit_done = false;
    rep.pass = false;
  }

  // conditional form spot check: restart fresh sub-paths from sampled
  // (r, X_r) states and compare against the fitted bound
  if (opts.restart_samples > 0 && !all_zero && !ladder.empty()) {
    const double s_big = ladder.front();
    for (long m = 0; m < opts.restart_samples; ++m) {
      PathSample head =
          euler_maruyama_localized(field, x0, domain, std::max(opts.r, opts.dt), opts.dt,
                                   {opts.master_seed, 1'000'000 + static_cast<uint64_t>(m)});
      if (head.exited) continue;  // no conditional state to restart from
      const Vec xr = head.last_state();
      double integ = 0, last_val = 0;
      bool first = true;
      StepObserver observer = [&](long, double t, const Vec& x) {
        const double val = std::abs(f(opts.r + t, x));
        if (first) {
          first = false;
        } else {
          integ += 0.5 * (last_val + val) * opts.dt;
        }
        last_val = val;
      };
      euler_maruyama_localized(field, xr, domain, s_big - opts.r, opts.dt,
                               {opts.master_seed, 2'000'000 + static_cast<uint64_t>(m)},
                               SimOptions{0}, &observer);
      rep.restart_lhs.push_back(integ);
      if (integ > 5.0 * rep.c_hat * std::pow(s_big - opts.r, delta) * rep.f_norm) {
        ++rep.restart_violations;
      }
    }
  }
  return rep;
}

StabilityReport stability_check(const CoefficientField& base, const DriftFn& h_b,
                                const DiffusionFn& h_sigma, const BoundedDomain& domain,
                                const Vec& x0, const StabilityOptions& opts) {
  if (!base.admissible_for_zvonkin()) {
    throw std::invalid_argument("stability_check: requires d/p + 2/q < 1");
  }
  if (opts.eps_ladder.empty()) throw std::invalid_argument("stability_check: empty ladder");

  auto ngrid = norm_grid(domain, opts.T, opts.norm_space_nodes, opts.norm_time_nodes);
  const int d = base.dim;
  GridFunction hb_sampled(ngrid, d), hs_sampled(ngrid, d * d);
  for (int k = 0; k < ngrid->time_nodes(); ++k) {
    for (long s = 0; s < ngrid->space_size(); ++s) {
      const double t = ngrid->time_node(k);
      const Vec x = ngrid->node_point(s);
      const Vec hb = h_b ? h_b(t, x) : Vec(Vec::Zero(d));
      const Mat hs = h_sigma ? h_sigma(t, x) : Mat(Mat::Zero(d, d));
      for (int c = 0; c < d; ++c) hb_sampled.set_value(k, s, c, hb(c));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) hs_sampled.set_value(k, s, i * d + j, hs(i, j));
    }
  }
  const double hb_norm = lqp_norm(hb_sampled, base.p, base.q);
  const double hs_norm = lqp_norm(hs_sampled, base.p, base.q);

  StabilityReport rep;
  rep.p0 = opts.p0;

  std::vector<double> log_n, log_m;
  for (double eps : opts.eps_ladder) {
    CoefficientField pert = base;
    if (h_b) {
      pert.drift = [&base, &h_b, eps](double t, const Vec& x) {
        return Vec(base.drift(t, x) + eps * h_b(t, x));
      };
    }
    if (h_sigma) {
      pert.diffusion = [&base, &h_sigma, eps](double t, const Vec& x) {
        return Mat(base.diffusion(t, x) + eps * h_sigma(t, x));
      };
      // perturbed combination must stay admissible
      std::vector<int> nx(d, 33);
      SpaceTimeGrid check_grid(domain, opts.T, 9, nx);
      auto er = ellipticity_check(pert, check_grid, 512);
      if (!er.pass) {
        throw std::invalid_argument("stability_check: perturbed diffusion violates ellipticity at eps=" +
                                    std::to_string(eps));
      }
    }

    std::vector<double> sup_gap(opts.pairs, 0.0);
    std::vector<long> early_exit(opts.pairs, 0);
    parallel_for_index(opts.pairs, opts.threads, [&](long pi) {
      auto [pa, pb] = simulate_tied_pair(base, pert, x0, domain, opts.T, opts.dt,
                                         {opts.master_seed, static_cast<uint64_t>(pi)});
      double sup = 0;
      const size_t n = std::min(pa.size(), pb.size());
      for (size_t k = 0; k < n; ++k) {
        sup = std::max(sup, (pa.state(k) - pb.state(k)).norm());
      }
      sup_gap[pi] = std::pow(sup, opts.p0);
      early_exit[pi] = (pa.exit_time && *pa.exit_time <= 2 * opts.dt) ? 1 : 0;
    });

    long early = 0;
    for (long e : early_exit) early += e;
    if (2 * early > opts.pairs) {
      throw std::runtime_error("stability_check: more than half the pairs exit immediately");
    }

    auto ms = mean_stderr(sup_gap);
    const double n_eps = std::pow(eps * (hb_norm + hs_norm), opts.p0);
    rep.rows.push_back({eps, ms.mean, ms.se, n_eps});
    if (ms.mean > 0 && n_eps > 0) {
      log_n.push_back(std::log(n_eps));
      log_m.push_back(std::log(ms.mean));
      rep.c_hat = std::max(rep.c_hat, ms.mean / n_eps);
    }
  }

  if (log_n.size() >= 2) {
    auto fit = fit_line(log_n, log_m);
    rep.slope = fit.slope;
    rep.slope_se = fit.slope_stderr;
    rep.fit_done = true;
    rep.pass = rep.slope >= 0.8 && rep.slope <= 1.2 && std::isfinite(rep.c_hat);
  }
  return rep;
}

namespace {

double path_beta_integral(const PathSample& p, const ScalarFn& beta, size_t from, size_t to) {
  double integ = 0;
  for (size_t k = from; k + 1 <= to && k + 1 < p.size(); ++k) {
    const double b0 = beta(p.times[k], p.state(k));
    const double b1 = beta(p.times[k + 1], p.state(k + 1));
    if (b0 < 0 || b1 < 0) {
      throw std::runtime_error("exponential moment: beta < 0 observed along a path");
    }
    integ += 0.5 * (b0 + b1) * (p.times[k + 1] - p.times[k]);
  }
  return integ;
}

}  // namespace

double estimate_kappa0(const std::vector<PathSample>& paths, const ScalarFn& beta, int halvings) {
  if (paths.empty()) throw std::invalid_argument("estimate_kappa0: no paths");
  const double T = paths.front().times.back();
  double kappa0 = 0;
  for (int lvl = 1; lvl <= halvings; ++lvl) {
    const double h = T / std::pow(2.0, lvl);
    double worst = 0;
    const int windows = (1 << lvl);
    for (int w = 0; w < windows; ++w) {
      const double s = w * h, t = (w + 1) * h;
      double acc = 0;
      for (const auto& p : paths) {
        // indices of the recorded grid covering [s, t]
        size_t from = 0, to = p.size() - 1;
        while (from + 1 < p.size() && p.times[from + 1] <= s + 1e-12) ++from;
        while (to > 0 && p.times[to - 1] >= t - 1e-12) --to;
        if (to > from) acc += path_beta_integral(p, beta, from, to);
      }
      worst = std::max(worst, acc / paths.size());
    }
    kappa0 = worst;  // smallest h wins; loop ends at the finest level
  }
  return kappa0;
}

ExpMomentReport exponential_moment_check(const std::vector<PathSample>& paths,
                                         const ScalarFn& beta,
                                         const std::vector<double>& lambda_ladder,
                                         double kappa0) {
  if (paths.empty()) throw std::invalid_argument("exponential_moment_check: no paths");
  ExpMomentReport rep;
  rep.kappa0 = kappa0;
  const double lambda_cap = kappa0 > 0 ? 1.0 / kappa0 : std::numeric_limits<double>::infinity();

  std::vector<double> integrals;
  integrals.reserve(paths.size());
  for (const auto& p : paths) integrals.push_back(path_beta_integral(p, beta, 0, p.size() - 1));

  std::vector<long> sizes = {1000, 10000, 100000};
  sizes.erase(std::remove_if(sizes.begin(), sizes.end(),
                             [&](long s) { return s > static_cast<long>(paths.size()); }),
              sizes.end());
  if (sizes.empty() || sizes.back() != static_cast<long>(paths.size())) {
    sizes.push_back(static_cast<long>(paths.size()));
  }

  rep.pass = true;
  for (double lam : lambda_ladder) {
    if (lam >= lambda_cap) {
      rep.skipped_lambdas.push_back(lam);
      continue;
    }
    rep.lambdas.push_back(lam);
    std::vector<std::pair<long, double>> ests;
    double acc = 0;
    long upto = 0;
    for (long size : sizes) {
      for (; upto < size; ++upto) acc += std::exp(lam * integrals[upto]);
      ests.emplace_back(size, acc / size);
    }
    bool stable = true;
    if (ests.size() >= 2) {
      const double a = ests[ests.size() - 2].second, b = ests.back().second;
      stable = std::abs(b - a) < 0.10 * std::abs(b);
    }
    rep.estimates.push_back(std::move(ests));
    rep.stabilized.push_back(stable);
    rep.pass = rep.pass && stable;
  }
  return rep;
}

}  // namespace sdelab
