#include "sdelab/geometry.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sdelab {

BoundedDomain::BoundedDomain(Vec lo, Vec hi, std::string label)
    : lo_(std::move(lo)), hi_(std::move(hi)), label_(std::move(label)) {
  if (lo_.size() == 0 || lo_.size() > kMaxDim) {
    throw std::invalid_argument("BoundedDomain: dimension must be in [1, " +
                                std::to_string(kMaxDim) + "]");
  }
  if (lo_.size() != hi_.size()) {
    throw std::invalid_argument("BoundedDomain: lo/hi dimension mismatch");
  }
  for (int i = 0; i < dim(); ++i) {
    if (!(lo_(i) < hi_(i)) || !std::isfinite(lo_(i)) || !std::isfinite(hi_(i))) {
      throw std::invalid_argument("BoundedDomain: need finite lo < hi on axis " +
                                  std::to_string(i));
    }
  }
}

bool BoundedDomain::contains(const Vec& x) const {
  for (int i = 0; i < dim(); ++i) {
    if (!(lo_(i) < x(i) && x(i) < hi_(i))) return false;
  }
  return true;
}

double BoundedDomain::boundary_distance(const Vec& x) const {
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim(); ++i) {
    d = std::min(d, std::min(x(i) - lo_(i), hi_(i) - x(i)));
  }
  return std::max(d, 0.0);
}

double BoundedDomain::diameter() const { return (hi_ - lo_).norm(); }

double BoundedDomain::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= width(i);
  return v;
}

BoundedDomain BoundedDomain::centered_box(int dim, double radius, std::string label) {
  Vec lo(dim), hi(dim);
  lo.setConstant(-radius);
  hi.setConstant(radius);
  return BoundedDomain(lo, hi, std::move(label));
}

SpaceTimeGrid::SpaceTimeGrid(BoundedDomain domain, double horizon, int time_nodes,
                             std::vector<int> space_nodes)
    : domain_(std::move(domain)), horizon_(horizon), nt_(time_nodes), nx_(std::move(space_nodes)) {
  if (!(horizon_ > 0) || !std::isfinite(horizon_)) {
    throw std::invalid_argument("SpaceTimeGrid: horizon must be positive");
  }
  if (nt_ < 2) throw std::invalid_argument("SpaceTimeGrid: need at least 2 time nodes");
  if (static_cast<int>(nx_.size()) != domain_.dim()) {
    throw std::invalid_argument("SpaceTimeGrid: node counts do not match domain dimension");
  }
  dt_ = horizon_ / (nt_ - 1);
  t_nodes_.resize(nt_);
  for (int k = 0; k < nt_; ++k) t_nodes_[k] = (k == nt_ - 1) ? horizon_ : k * dt_;

  space_size_ = 1;
  for (int a = 0; a < domain_.dim(); ++a) {
    if (nx_[a] < 3) throw std::invalid_argument("SpaceTimeGrid: need >= 3 nodes per axis");
    dx_[a] = domain_.width(a) / (nx_[a] - 1);
    x_nodes_[a].resize(nx_[a]);
    for (int i = 0; i < nx_[a]; ++i) {
      x_nodes_[a][i] = (i == nx_[a] - 1) ? domain_.hi()(a) : domain_.lo()(a) + i * dx_[a];
    }
    for (int i = 0; i + 1 < nx_[a]; ++i) {
      if (!(x_nodes_[a][i] < x_nodes_[a][i + 1])) {
        throw std::invalid_argument("SpaceTimeGrid: node coordinates not increasing");
      }
    }
    space_size_ *= nx_[a];
  }
}

double SpaceTimeGrid::min_dx() const {
  double m = dx_[0];
  for (int a = 1; a < dim(); ++a) m = std::min(m, dx_[a]);
  return m;
}

long SpaceTimeGrid::flatten(const std::array<int, kMaxDim>& idx) const {
  long flat = 0;
  for (int a = 0; a < dim(); ++a) flat = flat * nx_[a] + idx[a];
  return flat;
}

std::array<int, kMaxDim> SpaceTimeGrid::unflatten(long flat) const {
  std::array<int, kMaxDim> idx{};
  for (int a = dim() - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % nx_[a]);
    flat /= nx_[a];
  }
  return idx;
}

Vec SpaceTimeGrid::node_point(long flat) const {
  auto idx = unflatten(flat);
  Vec x(dim());
  for (int a = 0; a < dim(); ++a) x(a) = x_nodes_[a][idx[a]];
  return x;
}

bool SpaceTimeGrid::is_boundary_node(long flat) const {
  auto idx = unflatten(flat);
  for (int a = 0; a < dim(); ++a) {
    if (idx[a] == 0 || idx[a] == nx_[a] - 1) return true;
  }
  return false;
}

void SpaceTimeGrid::locate(int axis, double x, int* cell, double* weight) const {
  const auto& nodes = x_nodes_[axis];
  int i = static_cast<int>(std::floor((x - nodes.front()) / dx_[axis]));
  i = std::max(0, std::min(i, nx_[axis] - 2));
  // guard against 1-ulp misplacement from the division
  while (i > 0 && x < nodes[i]) --i;
  while (i < nx_[axis] - 2 && x > nodes[i + 1]) ++i;
  double w = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
  *cell = i;
  *weight = std::max(0.0, std::min(1.0, w));
}

void SpaceTimeGrid::locate_time(double t, int* cell, double* weight) const {
  int k = static_cast<int>(std::floor(t / dt_));
  k = std::max(0, std::min(k, nt_ - 2));
  while (k > 0 && t < t_nodes_[k]) --k;
  while (k < nt_ - 2 && t > t_nodes_[k + 1]) ++k;
  double w = (t - t_nodes_[k]) / (t_nodes_[k + 1] - t_nodes_[k]);
  *cell = k;
  *weight = std::max(0.0, std::min(1.0, w));
}

bool SpaceTimeGrid::inside_box(const Vec& x) const {
  for (int a = 0; a < dim(); ++a) {
    double slack = 1e-12 * domain_.width(a);
    if (x(a) < domain_.lo()(a) - slack || x(a) > domain_.hi()(a) + slack) return false;
  }
  return true;
}

GridFunction::GridFunction(std::shared_ptr<const SpaceTimeGrid> grid, int components)
    : grid_(std::move(grid)), ncomp_(components) {
  if (!grid_) throw std::invalid_argument("GridFunction: null grid");
  if (ncomp_ < 1) throw std::invalid_argument("GridFunction: need >= 1 component");
  values_.assign(static_cast<size_t>(grid_->time_nodes()) * grid_->space_size() * ncomp_, 0.0);
}

namespace {
// lerp in the v0 + w*(v1-v0) form: exact at w=0 and for v0 == v1
inline double lerp(double v0, double v1, double w) { return v0 + w * (v1 - v0); }
}  // namespace

double GridFunction::interp_space(int t_idx, const Vec& x, int comp) const {
  const auto& g = *grid_;
  const int d = g.dim();
  int cell[kMaxDim];
  double w[kMaxDim];
  for (int a = 0; a < d; ++a) g.locate(a, x(a), &cell[a], &w[a]);

  // gather the 2^d cell corners, then lerp one axis at a time
  double corner[1 << kMaxDim];
  const int ncorner = 1 << d;
  std::array<int, kMaxDim> idx{};
  for (int c = 0; c < ncorner; ++c) {
    for (int a = 0; a < d; ++a) idx[a] = cell[a] + ((c >> a) & 1);
    corner[c] = value(t_idx, g.flatten(idx), comp);
  }
  for (int a = d - 1; a >= 0; --a) {
    const int half = 1 << a;
    for (int c = 0; c < half; ++c) corner[c] = lerp(corner[c], corner[c + half], w[a]);
  }
  return corner[0];
}

double GridFunction::interpolate(double t, const Vec& x, int comp) const {
  const auto& g = *grid_;
  if (t < -1e-12 * g.horizon() || t > g.horizon() * (1 + 1e-12) || !g.inside_box(x)) {
    std::ostringstream os;
    os << "GridFunction::interpolate: query (t=" << t << ", x=[" << x.transpose()
       << "]) outside the space-time box";
    throw std::out_of_range(os.str());
  }
  int k;
  double wt;
  g.locate_time(t, &k, &wt);
  double v0 = interp_space(k, x, comp);
  if (wt == 0.0) return v0;
  double v1 = interp_space(k + 1, x, comp);
  return lerp(v0, v1, wt);
}

Vec GridFunction::interpolate_vec(double t, const Vec& x) const {
  Vec out(ncomp_);
  for (int c = 0; c < ncomp_; ++c) out(c) = interpolate(t, x, c);
  return out;
}

Mat GridFunction::interpolate_mat(double t, const Vec& x) const {
  const int d = grid_->dim();
  if (ncomp_ != d * d) throw std::logic_error("interpolate_mat: components != d*d");
  Mat out(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out(i, j) = interpolate(t, x, i * d + j);
  return out;
}

bool GridFunction::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void GridFunction::check_finite(const std::string& what) const {
  const auto& g = *grid_;
  for (int k = 0; k < g.time_nodes(); ++k) {
    for (long s = 0; s < g.space_size(); ++s) {
      for (int c = 0; c < ncomp_; ++c) {
        if (!std::isfinite(value(k, s, c))) {
          std::ostringstream os;
          os << what << ": non-finite value at t=" << g.time_node(k) << ", x=["
             << g.node_point(s).transpose() << "], component " << c;
          throw std::runtime_error(os.str());
        }
      }
    }
  }
}

}  // namespace sdelab
