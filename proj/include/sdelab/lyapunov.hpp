#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/geometry.hpp"
#include "sdelab/simulate.hpp"

#include <functional>
#include <vector>

namespace sdelab {

// Candidate Lyapunov function with user-supplied derivatives; no automatic
// differentiation here, the scenario author owns the C^{1,2} data.
struct LyapunovSpec {
  ScalarFn V;
  ScalarFn dt_V;
  DriftFn grad_V;     // reused vector-map alias
  DiffusionFn hess_V; // reused matrix-map alias
  double claimed_C = 0;
  std::function<double(double)> radial_infimum;  // R -> inf_{t, |x| = R} V
};

// dt_V + b . grad V + (1/2) tr(sigma sigma^T hess V) at (t, x)
double generator_apply(const CoefficientField& field, const LyapunovSpec& spec, double t,
                       const Vec& x);

struct LyapunovSampleOptions {
  int nodes_per_axis = 201;
  std::vector<double> time_samples = {0.0};
};

struct LyapunovReport {
  bool pass = false;
  double worst_gap = 0;   // max of L_t V - C V over samples
  double worst_time = 0;
  Vec worst_point;
  double c_hat = 0;       // max of (L_t V) / V over samples
  long samples = 0;
  bool v_zero_violation = false;  // V = 0 with L_t V > 0 observed
  Vec v_zero_point;
};

LyapunovReport verify_lyapunov(const CoefficientField& field, const LyapunovSpec& spec,
                               const BoundedDomain& region, double C,
                               const LyapunovSampleOptions& opts = {});

// min(1, e^{C N} V(0, x0) / radial_infimum(R)); returns 1 with a warning
// when the infimum vanishes
double explosion_bound(const LyapunovSpec& spec, double C, const Vec& x0, double N, double R);

struct SupermartingaleReport {
  std::vector<double> times;
  std::vector<double> means;    // E e^{-C(t ^ tau)} V(t ^ tau, X_{t ^ tau})
  std::vector<double> stderrs;
  std::vector<bool> ok;         // mean <= V(0, x0) + 3 se
  double v0 = 0;
  bool pass = false;
};

// Tests the stopped supermartingale from the Ito argument on recorded
// paths; needs at least 10^3 paths and ladder times on the recorded grid.
SupermartingaleReport supermartingale_check(const std::vector<PathSample>& paths,
                                            const LyapunovSpec& spec, double C,
                                            const std::vector<double>& t_ladder);

}  // namespace sdelab
