#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/geometry.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace sdelab {

// Backward problem  dt_u + (1/2) a^ij d_i d_j u + b . grad u + f = 0  on
// (0,T) x D, u(T,.) = 0, u = g on the lateral boundary. Callers with the
// "= f" sign convention negate their source.
struct PDEProblem {
  CoefficientField field;
  ScalarFn source;              // f
  ScalarFn boundary;            // g; empty means 0
  BoundedDomain domain{vec1(0.0), vec1(1.0)};
  double horizon = 1.0;
  int mollify_level = 0;        // 0 = no mollification of b, sigma, f
};

struct PDESolution {
  std::shared_ptr<const SpaceTimeGrid> grid;
  GridFunction u;
  GridFunction grad;            // d components
  GridFunction hess;            // d*d components
  std::vector<double> step_residuals;  // max |A u - rhs| per backward step
  double theta = 1.0;
  bool upwind_used = false;
  double solver_tolerance = 1e-10;

  double max_residual() const;
};

// Space-time convolution with a normalized compactly supported bump of
// radius T/level in time and diam(D)/level in space. Near the boundary the
// kernel is renormalized over the offsets that stay on the grid. A radius
// below the grid spacing cannot be resolved; the input is returned
// unchanged with a warning on stderr.
GridFunction mollify(const GridFunction& f, int level);

// Fully implicit backward march; centered convection while the cell Peclet
// number |b| dx / a stays <= 2, first-order upwind past that. 1D steps use
// a tridiagonal solve, 2D steps SOR to the solver tolerance.
PDESolution solve_cauchy_dirichlet(const PDEProblem& problem, const SpaceTimeGrid& grid);

// Second-order differences: central in the interior, one-sided at the
// boundary. The Hessian is the derivative operator applied to the gradient
// components, so it is exact for quadratics away from the boundary.
std::pair<GridFunction, GridFunction> gradient_hessian(const GridFunction& u);

struct DecayReport {
  std::vector<double> times;
  std::vector<double> sup_u;          // sup_x |u(t, x)|
  std::vector<double> grad_holder;    // spatial Holder seminorm of grad u
  bool fit_done = false;
  double fitted_exponent = 0;   // slope of log sup|u| vs log(T - t)
  double fit_stderr = 0;
  double grad_fitted_exponent = 0;
  bool monotone_decay = false;  // sup|u| decreasing towards T within noise
};

DecayReport verify_decay_estimates(const PDESolution& solution, const PDEProblem& problem,
                                   const std::vector<double>& t_ladder, double holder_exponent);

struct WindowSearchOptions {
  int space_nodes = 201;        // per axis, for the probe solves
  double dt_target = 1e-3;      // probe grid time step
  int probe_starts = 3;         // window positions tested inside [0, T]
  double grad_cap = 0.5;        // admissibility threshold on sup |grad u|
  int bisection_rounds = 6;
};

// Largest tested window length epsilon such that the vector problem
// f = b_l, g = 0 solved on every probe window keeps the nodewise operator
// norm of grad u below the cap. Throws when even 4 probe time steps fail.
double choose_window(const CoefficientField& field, const BoundedDomain& domain, double T,
                     double drift_norm_cap, const WindowSearchOptions& opts = {});

// sup over nodes of the operator norm of the d x d matrix field
double sup_operator_norm(const GridFunction& matrix_field);

}  // namespace sdelab
