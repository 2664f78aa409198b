#include "sdelab/simulate.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace sdelab {

namespace {

long step_count(double T, double dt) {
  if (!(dt > 0) || !(T > 0)) throw std::invalid_argument("simulate: need T > 0 and dt > 0");
  const double ratio = T / dt;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(n - ratio) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("simulate: dt must divide T within rounding");
  }
  return n;
}

inline bool finite_state(const Vec& x) {
  for (int i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x(i))) return false;
  }
  return true;
}

struct Recorder {
  PathSample* out;
  int stride;
  long last_recorded = -1;

  void record(long k, double t, const Vec& x) {
    out->times.push_back(t);
    for (int c = 0; c < x.size(); ++c) out->states.push_back(x(c));
    last_recorded = k;
  }
  void maybe_record(long k, double t, const Vec& x) {
    if (stride > 0 && k % stride == 0) record(k, t, x);
  }
  void finalize(long k, double t, const Vec& x) {
    if (last_recorded != k) record(k, t, x);
  }
};

}  // namespace

PathSample euler_maruyama_localized(const CoefficientField& field, const Vec& x0,
                                    const BoundedDomain& domain, double T, double dt,
                                    RngStreamSpec stream, const SimOptions& opts,
                                    const StepObserver* observer) {
  if (!domain.contains(x0)) {
    throw std::invalid_argument("euler_maruyama_localized: x0 must lie in D");
  }
  const long n_steps = step_count(T, dt);
  const double sqrt_dt = std::sqrt(dt);

  PathSample out;
  out.dim = field.dim;
  out.step_dt = dt;
  out.stream = stream;
  RngStream rng(stream);

  Recorder rec{&out, opts.record_stride};
  Vec x = x0;
  rec.maybe_record(0, 0.0, x);
  if (observer) (*observer)(0, 0.0, x);

  for (long k = 0; k < n_steps; ++k) {
    const double t = k * dt;
    const Vec xi = rng.normal_vec(field.dim);
    em_step(field.drift(t, x), field.diffusion(t, x), dt, sqrt_dt, xi, x);
    const double t_next = (k + 1) * dt;

    if (!finite_state(x)) {
      out.blew_up = true;
      rec.finalize(k + 1, t_next, x);
      if (observer) (*observer)(k + 1, t_next, x);
      return out;
    }
    if (!domain.contains(x)) {
      out.exited = true;
      out.exit_time = t_next;
      rec.finalize(k + 1, t_next, x);
      if (observer) (*observer)(k + 1, t_next, x);
      return out;
    }
    rec.maybe_record(k + 1, t_next, x);
    if (observer) (*observer)(k + 1, t_next, x);
  }
  rec.finalize(n_steps, n_steps * dt, x);
  return out;
}

std::pair<PathSample, PathSample> simulate_tied_pair(const CoefficientField& field_a,
                                                     const CoefficientField& field_b,
                                                     const Vec& x0, const BoundedDomain& domain,
                                                     double T, double dt, RngStreamSpec stream,
                                                     const SimOptions& opts) {
  if (field_a.dim != field_b.dim) {
    throw std::invalid_argument("simulate_tied_pair: field dimension mismatch");
  }
  if (!domain.contains(x0)) throw std::invalid_argument("simulate_tied_pair: x0 must lie in D");
  const long n_steps = step_count(T, dt);
  const double sqrt_dt = std::sqrt(dt);

  PathSample pa, pb;
  pa.dim = pb.dim = field_a.dim;
  pa.step_dt = pb.step_dt = dt;
  pa.stream = pb.stream = stream;
  RngStream rng(stream);

  Recorder ra{&pa, opts.record_stride}, rb{&pb, opts.record_stride};
  Vec xa = x0, xb = x0;
  ra.maybe_record(0, 0.0, xa);
  rb.maybe_record(0, 0.0, xb);

  for (long k = 0; k < n_steps; ++k) {
    const double t = k * dt;
    const Vec xi = rng.normal_vec(field_a.dim);
    em_step(field_a.drift(t, xa), field_a.diffusion(t, xa), dt, sqrt_dt, xi, xa);
    em_step(field_b.drift(t, xb), field_b.diffusion(t, xb), dt, sqrt_dt, xi, xb);
    const double t_next = (k + 1) * dt;

    const bool bad = !finite_state(xa) || !finite_state(xb);
    const bool a_out = bad || !domain.contains(xa);
    const bool b_out = bad || !domain.contains(xb);
    if (bad || a_out || b_out) {
      // the paper's tied stopping rule: stop when either leaves D
      pa.blew_up = pb.blew_up = bad;
      if (!bad) {
        pa.exited = a_out;
        pb.exited = b_out;
        pa.exit_time = pb.exit_time = t_next;
      }
      ra.finalize(k + 1, t_next, xa);
      rb.finalize(k + 1, t_next, xb);
      return {std::move(pa), std::move(pb)};
    }
    ra.maybe_record(k + 1, t_next, xa);
    rb.maybe_record(k + 1, t_next, xb);
  }
  ra.finalize(n_steps, n_steps * dt, xa);
  rb.finalize(n_steps, n_steps * dt, xb);
  return {std::move(pa), std::move(pb)};
}

std::pair<PathSample, GlobalizationReport> simulate_global(const CoefficientField& field,
                                                           const Vec& x0, double T, double dt,
                                                           RngStreamSpec stream,
                                                           const std::vector<double>& r_schedule,
                                                           const SimOptions& opts) {
  if (r_schedule.empty()) throw std::invalid_argument("simulate_global: empty radius schedule");
  for (size_t i = 0; i + 1 < r_schedule.size(); ++i) {
    if (!(r_schedule[i] < r_schedule[i + 1])) {
      throw std::invalid_argument("simulate_global: schedule must be strictly increasing");
    }
  }
  std::vector<BoundedDomain> balls;
  balls.reserve(r_schedule.size());
  for (double r : r_schedule) balls.push_back(BoundedDomain::centered_box(field.dim, r));
  if (!balls.front().contains(x0)) {
    throw std::invalid_argument("simulate_global: x0 must lie in the first ball");
  }

  const long n_steps = step_count(T, dt);
  const double sqrt_dt = std::sqrt(dt);

  PathSample out;
  out.dim = field.dim;
  out.step_dt = dt;
  out.stream = stream;
  GlobalizationReport rep;
  rep.schedule = r_schedule;

  RngStream rng(stream);
  Recorder rec{&out, opts.record_stride};
  Vec x = x0;
  rec.maybe_record(0, 0.0, x);
  size_t level = 0;

  for (long k = 0; k < n_steps; ++k) {
    const double t = k * dt;
    const Vec xi = rng.normal_vec(field.dim);
    em_step(field.drift(t, x), field.diffusion(t, x), dt, sqrt_dt, xi, x);
    const double t_next = (k + 1) * dt;

    if (!finite_state(x)) {
      rep.blew_up = true;
      out.blew_up = true;
      rec.finalize(k + 1, t_next, x);
      break;
    }
    bool stopped = false;
    while (!balls[level].contains(x)) {
      rep.level_exits.push_back(t_next);
      if (level + 1 == balls.size()) {
        rep.exhausted = true;
        out.exited = true;
        out.exit_time = t_next;
        rec.finalize(k + 1, t_next, x);
        stopped = true;
        break;
      }
      ++level;
    }
    if (stopped) break;
    rec.maybe_record(k + 1, t_next, x);
    if (k + 1 == n_steps) rec.finalize(n_steps, n_steps * dt, x);
  }
  rep.levels_used = static_cast<int>(level) + 1;
  return {std::move(out), rep};
}

void parallel_for_index(long n, int threads, const std::function<void(long)>& body) {
  if (threads <= 1 || n < 2) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  const int nw = static_cast<int>(std::min<long>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&, w]() {
      for (long i = w; i < n; i += nw) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace sdelab
