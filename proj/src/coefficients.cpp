#include "sdelab/coefficients.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sdelab {

CoefficientField constant_field(int dim, const Vec& drift, const Mat& sigma, double kappa,
                                double p, double q) {
  CoefficientField f;
  f.dim = dim;
  f.drift = [drift](double, const Vec&) { return drift; };
  f.diffusion = [sigma](double, const Vec&) { return sigma; };
  f.kappa = kappa;
  f.p = p;
  f.q = q;
  return f;
}

namespace {

template <typename Eval>
GridFunction sample_impl(std::shared_ptr<const SpaceTimeGrid> grid, int ncomp, Eval eval,
                         const char* what) {
  GridFunction out(grid, ncomp);
  const auto& g = *grid;
  for (int k = 0; k < g.time_nodes(); ++k) {
    const double t = g.time_node(k);
    for (long s = 0; s < g.space_size(); ++s) {
      const Vec x = g.node_point(s);
      eval(t, x, k, s, out);
    }
  }
  out.check_finite(what);
  return out;
}

}  // namespace

GridFunction sample_scalar(const ScalarFn& f, std::shared_ptr<const SpaceTimeGrid> grid) {
  return sample_impl(
      grid, 1,
      [&](double t, const Vec& x, int k, long s, GridFunction& out) {
        out.set_value(k, s, 0, f(t, x));
      },
      "sample_scalar");
}

GridFunction sample_drift(const CoefficientField& field,
                          std::shared_ptr<const SpaceTimeGrid> grid) {
  const int d = field.dim;
  return sample_impl(
      grid, d,
      [&](double t, const Vec& x, int k, long s, GridFunction& out) {
        Vec b = field.drift(t, x);
        for (int c = 0; c < d; ++c) out.set_value(k, s, c, b(c));
      },
      "sample_drift");
}

GridFunction sample_diffusion(const CoefficientField& field,
                              std::shared_ptr<const SpaceTimeGrid> grid) {
  const int d = field.dim;
  return sample_impl(
      grid, d * d,
      [&](double t, const Vec& x, int k, long s, GridFunction& out) {
        Mat m = field.diffusion(t, x);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) out.set_value(k, s, i * d + j, m(i, j));
      },
      "sample_diffusion");
}

}  // namespace sdelab
