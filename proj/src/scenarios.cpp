#include "sdelab/scenarios.hpp"

#include <cmath>
#include <stdexcept>

namespace sdelab {

namespace {

void check_thresholds(const std::vector<double>& thresholds) {
  for (size_t i = 0; i + 1 < thresholds.size(); ++i) {
    if (!(thresholds[i] < thresholds[i + 1])) {
      throw std::invalid_argument("thresholds not increasing");
    }
  }
}

// regime index under the left-closed convention theta_{i-1} <= x < theta_i
size_t regime_of(const std::vector<double>& thresholds, double x) {
  size_t i = 0;
  while (i < thresholds.size() && x >= thresholds[i]) ++i;
  return i;
}

double default_kappa(double sigma) {
  const double s2 = sigma * sigma;
  return std::max({s2, 1.0 / s2, 1.0}) * 1.5;
}

CoefficientField scalar_sigma_field(DriftFn drift, double sigma, double p, double q,
                                    double kappa) {
  CoefficientField f;
  f.dim = 1;
  f.drift = std::move(drift);
  Mat sg(1, 1);
  sg(0, 0) = sigma;
  f.diffusion = [sg](double, const Vec&) { return sg; };
  f.kappa = kappa > 1.0 ? kappa : default_kappa(sigma);
  f.p = p;
  f.q = q;
  return f;
}

}  // namespace

CoefficientField make_threshold_ou(const std::vector<double>& betas,
                                   const std::vector<double>& alphas,
                                   const std::vector<double>& thresholds, double sigma, double p,
                                   double q, double kappa) {
  if (betas.empty() || betas.size() != alphas.size() || thresholds.size() + 1 != betas.size()) {
    throw std::invalid_argument(
        "threshold_ou: need n regimes (betas, alphas) and n-1 interior thresholds");
  }
  check_thresholds(thresholds);
  DriftFn drift = [betas, alphas, thresholds](double, const Vec& x) {
    const size_t i = regime_of(thresholds, x(0));
    Vec b(1);
    b(0) = betas[i] - alphas[i] * x(0);
    return b;
  };
  return scalar_sigma_field(std::move(drift), sigma, p, q, kappa);
}

CoefficientField make_piecewise_poly(const std::vector<std::vector<double>>& coeffs,
                                     const std::vector<double>& thresholds, double sigma, double p,
                                     double q, double kappa) {
  if (coeffs.empty() || thresholds.size() + 1 != coeffs.size()) {
    throw std::invalid_argument(
        "piecewise_poly: need n coefficient rows and n-1 interior thresholds");
  }
  check_thresholds(thresholds);
  DriftFn drift = [coeffs, thresholds](double, const Vec& x) {
    const size_t i = regime_of(thresholds, x(0));
    double acc = 0;
    double xp = x(0);
    for (double c : coeffs[i]) {
      acc += c * xp;
      xp *= x(0);
    }
    Vec b(1);
    b(0) = acc;
    return b;
  };
  return scalar_sigma_field(std::move(drift), sigma, p, q, kappa);
}

CoefficientField make_tabulated_field(std::shared_ptr<const SpaceTimeGrid> grid,
                                      GridFunction drift_samples, GridFunction sigma_samples,
                                      double p, double q, double kappa) {
  const int d = grid->dim();
  if (drift_samples.components() != d || sigma_samples.components() != d * d) {
    throw std::invalid_argument("make_tabulated_field: component counts do not match dimension");
  }
  CoefficientField f;
  f.dim = d;
  const double T = grid->horizon();
  f.drift = [g = std::move(drift_samples), T](double t, const Vec& x) {
    return g.interpolate_vec(std::min(std::max(t, 0.0), T), x);
  };
  f.diffusion = [g = std::move(sigma_samples), T](double t, const Vec& x) {
    return g.interpolate_mat(std::min(std::max(t, 0.0), T), x);
  };
  f.kappa = kappa;
  f.p = p;
  f.q = q;
  return f;
}

LyapunovSpec make_quadratic_lyapunov(int dim) {
  LyapunovSpec spec;
  spec.V = [](double, const Vec& x) { return 1.0 + x.squaredNorm(); };
  spec.dt_V = [](double, const Vec&) { return 0.0; };
  spec.grad_V = [](double, const Vec& x) { return Vec(2.0 * x); };
  spec.hess_V = [dim](double, const Vec&) { return Mat(2.0 * Mat::Identity(dim, dim)); };
  spec.radial_infimum = [](double R) { return 1.0 + R * R; };
  return spec;
}

}  // namespace sdelab
