#pragma once

#include "sdelab/geometry.hpp"

#include <string>
#include <vector>

namespace sdelab {

// Discrete maximal-operator output. The radius ladder at a node x is
// r = m * min_dx, m = 1, 2, ..., with r < dist(x, D^c) in the local variant
// and r <= diam(box) in the global one. A ball of radius r collects the grid
// nodes with |y - x| < r, so the m = 1 ball is the node itself and the
// operator dominates |f| wherever the ladder is nonempty. Nodes with an
// empty ladder carry |f(x)|.
struct MaximalReport {
  std::string input_id;
  GridFunction output;
  std::vector<int> radius_count;  // per (time level, node), flattened time-major
  double norm_exponent = 2;
  double operator_norm_ratio = 0;  // ||M f||_p / ||f||_p over the grid, 0 if f = 0
};

MaximalReport local_maximal(const GridFunction& f, const std::string& input_id = "",
                            double norm_exponent = 2);
MaximalReport global_maximal(const GridFunction& f, const std::string& input_id = "",
                             double norm_exponent = 2);

struct ExtensionResult {
  GridFunction extended;          // on the enlarged grid; equals f on D bitwise
  std::vector<double> margin;     // per-axis margin actually used (node-aligned)
  double holder_alpha = 0;
  double holder_ratio = 0;        // measured seminorm(Qf) / seminorm(f), inf if f constant
};

// Even reflection across every box face followed by a C^2 piecewise-quintic
// cutoff that is 1 on D and 0 at the outer edge of the margin.
ExtensionResult extend_reflection(const GridFunction& f, double margin, double holder_alpha);

}  // namespace sdelab
