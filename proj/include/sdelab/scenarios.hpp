#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/lyapunov.hpp"

#include <vector>

namespace sdelab {

// Threshold Ornstein-Uhlenbeck drift (1D): on the regime
// theta_{i-1} <= x < theta_i the drift is beta_i - alpha_i x, with
// theta_0 = -inf and theta_n = +inf; only the interior thresholds are
// configured. The indicator convention is left-closed.
CoefficientField make_threshold_ou(const std::vector<double>& betas,
                                   const std::vector<double>& alphas,
                                   const std::vector<double>& thresholds, double sigma,
                                   double p = 4.0, double q = 4.0, double kappa = 0.0);

// Piecewise polynomial drift (1D): on regime k the drift is
// sum_j coeffs[k][j] x^{j+1} (coeffs[k][j] multiplies x^{j+1}).
CoefficientField make_piecewise_poly(const std::vector<std::vector<double>>& coeffs,
                                     const std::vector<double>& thresholds, double sigma,
                                     double p = 4.0, double q = 4.0, double kappa = 0.0);

// 1D field with tabulated drift/diffusion samples, interpolated in space.
CoefficientField make_tabulated_field(std::shared_ptr<const SpaceTimeGrid> grid,
                                      GridFunction drift_samples, GridFunction sigma_samples,
                                      double p, double q, double kappa);

// V(t, x) = 1 + |x|^2 with its derivatives and the analytic radial infimum.
// The paper's bare |x|^2 fails the pointwise inequality at the origin when
// sigma does not vanish there; the +1 repairs that and changes nothing else.
LyapunovSpec make_quadratic_lyapunov(int dim);

}  // namespace sdelab
