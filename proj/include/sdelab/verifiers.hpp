#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/geometry.hpp"
#include "sdelab/simulate.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace sdelab {

struct KrylovOptions {
  double r = 0.0;
  std::vector<double> s_ladder;  // interval ends; sorted to decreasing lengths
  double delta = 0;              // 0 picks 1/2 - d/(2p) - 1/q
  long paths = 1000;
  double dt = 1e-3;
  double T = 1.0;
  uint64_t master_seed = 1;
  int threads = 1;
  long restart_samples = 8;
  int norm_space_nodes = 201;
  int norm_time_nodes = 65;
};

struct KrylovRow {
  double r = 0, s = 0;
  double lhs = 0, lhs_se = 0;
  double rhs = 0;  // c_hat (s-r)^delta ||f||
};

struct KrylovReport {
  std::vector<KrylovRow> rows;
  double f_norm = 0;
  double delta = 0;
  double delta_hat = 0, delta_se = 0;
  double c_hat = 0;  // smallest constant dominating the ladder at exponent delta
  bool fit_done = false;
  bool pass = false;
  std::vector<double> restart_lhs;  // conditional spot checks via restarts
  long restart_violations = 0;
};

// Monte Carlo check of the localized Krylov bound: path-averaged trapezoid
// estimates of E int_{r^tau}^{s^tau} |f(eta, X_eta)| d eta against
// C (s-r)^delta ||f||, with a log-log exponent fit over the ladder.
KrylovReport krylov_check(const CoefficientField& field, const ScalarFn& f,
                          const BoundedDomain& domain, const Vec& x0, const KrylovOptions& opts);

struct StabilityOptions {
  std::vector<double> eps_ladder;
  double p0 = 1.0;
  long pairs = 1000;
  double dt = 1e-3;
  double T = 1.0;
  uint64_t master_seed = 1;
  int threads = 1;
  int norm_space_nodes = 201;
  int norm_time_nodes = 65;
};

struct StabilityRow {
  double eps = 0;
  double m = 0, m_se = 0;  // E sup_{t <= T ^ tau} |X - X'|^{p0}
  double n = 0;            // (||eps h_b|| + ||eps h_sigma||)^{p0}
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  double p0 = 1;
  double slope = 0, slope_se = 0;
  double c_hat = 0;  // max M / N over the ladder
  bool fit_done = false;
  bool pass = false;
};

// Tied-pair stability in a perturbation direction (h_b, h_sigma): pairs
// share increments and stop jointly; passes when log M vs log N has slope
// in [0.8, 1.2] and a single constant dominates the ladder.
StabilityReport stability_check(const CoefficientField& base, const DriftFn& h_b,
                                const DiffusionFn& h_sigma, const BoundedDomain& domain,
                                const Vec& x0, const StabilityOptions& opts);

struct ExpMomentReport {
  double kappa0 = 0;
  std::vector<double> lambdas;                           // the ones below 1/kappa0
  std::vector<double> skipped_lambdas;                   // at or above 1/kappa0
  std::vector<std::vector<std::pair<long, double>>> estimates;  // per lambda: (size, mean)
  std::vector<bool> stabilized;
  bool pass = false;
};

// kappa0 per the exponential-moment lemma: the small-interval limit of the
// window supremum of rho(s, t) = mean int_{s^tau}^{t^tau} beta
double estimate_kappa0(const std::vector<PathSample>& paths, const ScalarFn& beta,
                       int halvings = 5);

// Running means of exp(lambda int_0^{T^tau} beta) at sample sizes
// 10^3, 10^4, 10^5 (capped by the collection size); a lambda passes when the
// last two sizes agree within 10% relative.
ExpMomentReport exponential_moment_check(const std::vector<PathSample>& paths,
                                         const ScalarFn& beta,
                                         const std::vector<double>& lambda_ladder, double kappa0);

}  // namespace sdelab
