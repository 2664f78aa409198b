#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/geometry.hpp"
#include "sdelab/rng.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace sdelab {

// One simulated trajectory. With record_stride == 1 the time array is the
// full uniform step grid; larger strides keep every stride-th state plus the
// initial and stopping states.
struct PathSample {
  int dim = 1;
  double step_dt = 0;
  std::vector<double> times;
  std::vector<double> states;  // times.size() * dim
  std::optional<double> exit_time;
  bool exited = false;
  bool blew_up = false;
  RngStreamSpec stream;

  size_t size() const { return times.size(); }
  Vec state(size_t k) const {
    Vec x(dim);
    for (int c = 0; c < dim; ++c) x(c) = states[k * dim + c];
    return x;
  }
  Vec last_state() const { return state(size() - 1); }
};

struct SimOptions {
  int record_stride = 1;  // 0 keeps only the initial and final states
};

// called with (step index, t_k, X_k) for every computed state, k = 0 first
using StepObserver = std::function<void(long, double, const Vec&)>;

// the one shared Euler-Maruyama update; every simulator routes through this
// so that coinciding inputs give bitwise-identical states
inline void em_step(const Vec& drift, const Mat& sigma, double dt, double sqrt_dt, const Vec& xi,
                    Vec& x) {
  x += drift * dt + sigma * (sqrt_dt * xi);
}

// Euler-Maruyama on D, stopped at the first grid time outside D. Drift is
// evaluated pointwise; discontinuities are taken as-is. Non-finite states
// mark the sample as blown up rather than throwing.
PathSample euler_maruyama_localized(const CoefficientField& field, const Vec& x0,
                                    const BoundedDomain& domain, double T, double dt,
                                    RngStreamSpec stream, const SimOptions& opts = {},
                                    const StepObserver* observer = nullptr);

// Two solutions driven by the identical increment sequence, jointly stopped
// at the first grid time either path leaves D. exit_time on both samples is
// the joint stopping time; the per-path `exited` flag records which one left.
std::pair<PathSample, PathSample> simulate_tied_pair(const CoefficientField& field_a,
                                                     const CoefficientField& field_b,
                                                     const Vec& x0, const BoundedDomain& domain,
                                                     double T, double dt, RngStreamSpec stream,
                                                     const SimOptions& opts = {});

struct GlobalizationReport {
  std::vector<double> schedule;      // the configured radii
  std::vector<double> level_exits;   // tau_R for every level the path outgrew
  int levels_used = 1;               // smallest prefix of the schedule containing the path
  bool exhausted = false;            // left the last ball before T
  bool blew_up = false;
  bool flagged_explosive() const { return exhausted || blew_up; }
};

// Simulation over the growing ball ladder D_R. The path continues across
// escalations with the same stream and state; each outgrown level's exit
// time is recorded.
std::pair<PathSample, GlobalizationReport> simulate_global(const CoefficientField& field,
                                                           const Vec& x0, double T, double dt,
                                                           RngStreamSpec stream,
                                                           const std::vector<double>& r_schedule,
                                                           const SimOptions& opts = {});

// Static block partition over [0, n); results must be written by index.
void parallel_for_index(long n, int threads, const std::function<void(long)>& body);

}  // namespace sdelab
