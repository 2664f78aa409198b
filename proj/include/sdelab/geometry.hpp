#pragma once

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace sdelab {

// Spatial dimension cap. Keeps Vec/Mat stack-allocated; the PDE solver
// itself only supports d <= 2.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

inline Vec vec1(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

inline Vec vec2(double x, double y) {
  Vec v(2);
  v(0) = x;
  v(1) = y;
  return v;
}

// Open axis-aligned box. Membership is strict: lo_i < x_i < hi_i on every axis.
class BoundedDomain {
 public:
  BoundedDomain(Vec lo, Vec hi, std::string label = "");

  int dim() const { return static_cast<int>(lo_.size()); }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  const std::string& label() const { return label_; }

  bool contains(const Vec& x) const;
  // distance from x to the complement of the box (0 if x outside)
  double boundary_distance(const Vec& x) const;
  double diameter() const;
  double width(int axis) const { return hi_(axis) - lo_(axis); }
  double volume() const;

  // box (-R, R)^d, the discrete stand-in for the ball of radius R
  static BoundedDomain centered_box(int dim, double radius, std::string label = "");

 private:
  Vec lo_, hi_;
  std::string label_;
};

// Uniform discretization of (0,T) x D. Node coordinates are precomputed and
// strictly increasing per axis.
class SpaceTimeGrid {
 public:
  SpaceTimeGrid(BoundedDomain domain, double horizon, int time_nodes,
                std::vector<int> space_nodes);

  const BoundedDomain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  double horizon() const { return horizon_; }
  int time_nodes() const { return nt_; }
  int space_nodes(int axis) const { return nx_[axis]; }
  double dt() const { return dt_; }
  double dx(int axis) const { return dx_[axis]; }
  double min_dx() const;

  double time_node(int k) const { return t_nodes_[k]; }
  double space_node(int axis, int i) const { return x_nodes_[axis][i]; }

  long space_size() const { return space_size_; }

  long flatten(const std::array<int, kMaxDim>& idx) const;
  std::array<int, kMaxDim> unflatten(long flat) const;
  Vec node_point(long flat) const;
  bool is_boundary_node(long flat) const;

  // cell index i and weight w for coordinate x on the given axis, such that
  // node(i) <= x <= node(i+1) and w = (x - node(i)) / dx, clamped to [0,1]
  void locate(int axis, double x, int* cell, double* weight) const;
  void locate_time(double t, int* cell, double* weight) const;

  bool inside_box(const Vec& x) const;  // closure of the box, with tiny slack

 private:
  BoundedDomain domain_;
  double horizon_;
  int nt_;
  std::vector<int> nx_;
  double dt_;
  std::array<double, kMaxDim> dx_{};
  std::vector<double> t_nodes_;
  std::array<std::vector<double>, kMaxDim> x_nodes_;
  long space_size_;
};

// Scalar/vector/matrix field sampled on a SpaceTimeGrid. Values are stored
// time-major; multilinear interpolation in space, linear in time. Treated as
// immutable once filled.
class GridFunction {
 public:
  GridFunction() = default;  // empty placeholder; assign before use
  GridFunction(std::shared_ptr<const SpaceTimeGrid> grid, int components);

  const SpaceTimeGrid& grid() const { return *grid_; }
  std::shared_ptr<const SpaceTimeGrid> grid_ptr() const { return grid_; }
  int components() const { return ncomp_; }

  double value(int t_idx, long space_flat, int comp = 0) const {
    return values_[(static_cast<long>(t_idx) * grid_->space_size() + space_flat) * ncomp_ + comp];
  }
  void set_value(int t_idx, long space_flat, int comp, double v) {
    values_[(static_cast<long>(t_idx) * grid_->space_size() + space_flat) * ncomp_ + comp] = v;
  }

  // out-of-box queries throw; exact at nodes
  double interpolate(double t, const Vec& x, int comp = 0) const;
  Vec interpolate_vec(double t, const Vec& x) const;
  Mat interpolate_mat(double t, const Vec& x) const;  // components = d*d, row-major

  bool all_finite() const;
  void check_finite(const std::string& what) const;  // throws naming the node

  const std::vector<double>& raw() const { return values_; }
  std::vector<double>& raw_mut() { return values_; }

 private:
  double interp_space(int t_idx, const Vec& x, int comp) const;

  std::shared_ptr<const SpaceTimeGrid> grid_;
  int ncomp_ = 0;
  std::vector<double> values_;
};

}  // namespace sdelab
