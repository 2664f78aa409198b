#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/geometry.hpp"

#include <limits>

namespace sdelab {

inline constexpr double kInfExponent = std::numeric_limits<double>::infinity();

// Mixed-integrability norm (time-outer L^q, space-inner L^p) of the pointwise
// Euclidean magnitude of f, by composite midpoint quadrature on grid cells.
// Midpoint samples are corner averages of |f|, which keeps the functional
// monotone in the nodewise magnitudes. p or q = infinity uses grid suprema.
double lqp_norm(const GridFunction& f, double p, double q);

struct EllipticityReport {
  bool pass = false;
  double eig_min = 0;
  double eig_max = 0;
  double worst_eigenvalue = 0;  // the eigenvalue closest to / beyond a bound
  double worst_time = 0;
  Vec worst_point;
  long samples_used = 0;
};

// Samples sigma sigma^T over grid nodes and checks the eigenvalue range
// against [1/kappa, kappa]. Throws if sigma sigma^T comes back asymmetric.
EllipticityReport ellipticity_check(const CoefficientField& field, const SpaceTimeGrid& grid,
                                    long samples);

// Pair-sampled lower estimate of the spatial alpha-Holder seminorm at one
// time level. Scans all node pairs when the node count is <= 10^4, otherwise
// falls back to a fixed-seed random pair sample.
double holder_seminorm_estimate(const GridFunction& f, double alpha, int t_idx);

}  // namespace sdelab
