#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/geometry.hpp"
#include "sdelab/pde.hpp"
#include "sdelab/simulate.hpp"

#include <memory>

namespace sdelab {

struct TransformOptions {
  int space_nodes = 201;
  double dt_target = 1e-3;     // PDE step target for the window solves
  double inverse_tolerance = 1e-12;
  long audit_pairs = 1000;
  uint64_t audit_seed = 0x5eedULL;
  int mollify_level = 0;
  double grad_cap = 0.5;       // window admissibility threshold
};

struct BiLipschitzAudit {
  long pairs = 0;
  long violations = 0;
  double worst_lower_ratio = 1;  // min |Phi x - Phi y| / |x - y|
  double worst_upper_ratio = 1;  // max |Phi x - Phi y| / |x - y|
  double tolerance = 0;          // 2x the interpolation error bound
  bool pass = false;
};

// Per-window Zvonkin data: u solves the drift-source vector problem with
// zero boundary data and terminal value 0 at the window end, and
// Phi(t, x) = x + u(t, x).
class TransformBundle {
 public:
  double window_start() const { return s0_; }
  double window_end() const { return s0_ + grid_->horizon(); }
  const SpaceTimeGrid& grid() const { return *grid_; }
  const CoefficientField& field() const { return field_; }
  const GridFunction& displacement() const { return u_; }
  const GridFunction& displacement_gradient() const { return grad_u_; }
  double sup_grad_norm() const { return sup_grad_norm_; }
  double inverse_tolerance() const { return inverse_tolerance_; }
  const BiLipschitzAudit& audit() const { return audit_; }
  double interpolation_error_bound() const { return interp_error_; }

  Vec phi(double t, const Vec& x) const;
  Mat grad_phi(double t, const Vec& x) const;
  // fixed point x_{k+1} = y - u(t, x_k) from x_0 = y; the 1/2 contraction
  // halves the error per iteration
  Vec phi_inverse(double t, const Vec& y, int max_iterations = 60,
                  int* iterations_used = nullptr) const;
  Mat theta(double t, const Vec& y) const;
  // theta with the inverse point already known (hot path of the simulator)
  Mat theta_at(double t, const Vec& x_hat) const;
  // one clamped displacement correction, used to map a state that already
  // left the box back to X coordinates when recording an exit
  Vec exit_state(double t, const Vec& y) const;

  friend TransformBundle build_transform(const CoefficientField& field,
                                         const BoundedDomain& domain, double s0, double t0,
                                         const TransformOptions& opts);

 private:
  double local_time(double t) const;

  double s0_ = 0;
  std::shared_ptr<const SpaceTimeGrid> grid_;
  CoefficientField field_;
  GridFunction u_;        // d components
  GridFunction grad_u_;   // d*d components, (l, a) -> d_a u^l
  double sup_grad_norm_ = 0;
  double inverse_tolerance_ = 1e-12;
  double interp_error_ = 0;
  BiLipschitzAudit audit_;
};

// Solves the d window problems, assembles Phi and grad Phi, and audits the
// bi-Lipschitz bounds on random pairs; throws if the window is inadmissible
// (sup |grad u| > cap) or any audited pair violates the bounds beyond the
// interpolation tolerance.
TransformBundle build_transform(const CoefficientField& field, const BoundedDomain& domain,
                                double s0, double t0, const TransformOptions& opts = {});

Vec invert_transform(const TransformBundle& bundle, double t, const Vec& y);

// evaluator for the drift-free diffusion (grad Phi . sigma) o Phi^{-1}
DiffusionFn transformed_diffusion(const TransformBundle& bundle);

struct ThetaEllipticityAudit {
  double eig_min = 0, eig_max = 0;
  double sharp_lo = 0, sharp_hi = 0;      // from the measured sup |grad u|
  double nominal_lo = 0, nominal_hi = 0;  // kappa' = (3/2)^2 kappa interval
  bool within_sharp = false;
  bool within_nominal = false;
  long samples = 0;
};

ThetaEllipticityAudit audit_theta_ellipticity(const TransformBundle& bundle, long samples,
                                              uint64_t seed = 0xabcdULL);

// Window plan for drift-free simulation: choose_window picks the admissible
// length, the horizon is split into whole-step windows, and one bundle per
// window is built up front. The plan is immutable; any number of paths may
// share it concurrently.
class ZvonkinSimulator {
 public:
  ZvonkinSimulator(const CoefficientField& field, const BoundedDomain& domain, double T,
                   double dt, const TransformOptions& opts = {});

  // per window, map Y = Phi(t, X), run Euler-Maruyama on dY = Theta dB off
  // the shared stream, and map back through Phi^{-1} at every grid time for
  // the exit test
  PathSample simulate(const Vec& x0, RngStreamSpec stream,
                      const SimOptions& sim_opts = {}) const;

  double window_length() const { return steps_per_window_ * dt_; }
  const std::vector<TransformBundle>& bundles() const { return bundles_; }

 private:
  CoefficientField field_;
  BoundedDomain domain_;
  double T_, dt_;
  long n_steps_ = 0, steps_per_window_ = 0;
  std::vector<TransformBundle> bundles_;
  std::vector<long> window_start_step_;
};

// one-shot convenience wrapper around ZvonkinSimulator
PathSample simulate_via_zvonkin(const CoefficientField& field, const Vec& x0,
                                const BoundedDomain& domain, double T, double dt,
                                RngStreamSpec stream, const TransformOptions& opts = {},
                                const SimOptions& sim_opts = {});

}  // namespace sdelab
