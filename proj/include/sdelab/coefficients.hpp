#pragma once

#include "sdelab/geometry.hpp"

#include <functional>

namespace sdelab {

using DriftFn = std::function<Vec(double, const Vec&)>;
using DiffusionFn = std::function<Mat(double, const Vec&)>;
using ScalarFn = std::function<double(double, const Vec&)>;

// Drift b(t,x), diffusion sigma(t,x) and the regularity metadata the
// estimates depend on: ellipticity bound kappa > 1 for a = sigma sigma^T,
// Holder exponent alpha, integrability exponents (p, q).
struct CoefficientField {
  int dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  double kappa = 2.0;
  double alpha = 1.0;
  double p = 4.0;
  double q = 4.0;

  double parabolic_index() const { return dim / p + 2.0 / q; }
  // hypothesis of the localized Krylov estimate
  bool admissible_for_krylov() const { return parabolic_index() < 2.0; }
  // hypothesis of the Zvonkin/stability theorems
  bool admissible_for_zvonkin() const { return parabolic_index() < 1.0; }

  Mat a_matrix(double t, const Vec& x) const {
    Mat s = diffusion(t, x);
    return s * s.transpose();
  }
};

CoefficientField constant_field(int dim, const Vec& drift, const Mat& sigma,
                                double kappa, double p = 4.0, double q = 4.0);

// pointwise evaluation of a scalar map at all grid nodes
GridFunction sample_scalar(const ScalarFn& f, std::shared_ptr<const SpaceTimeGrid> grid);
// drift sampled into a d-component GridFunction
GridFunction sample_drift(const CoefficientField& field, std::shared_ptr<const SpaceTimeGrid> grid);
// diffusion sampled into a d*d-component GridFunction (row-major)
GridFunction sample_diffusion(const CoefficientField& field,
                              std::shared_ptr<const SpaceTimeGrid> grid);

}  // namespace sdelab
