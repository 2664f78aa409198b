#include "sdelab/runner.hpp"

#include "sdelab/csv.hpp"
#include "sdelab/lyapunov.hpp"
#include "sdelab/norms.hpp"
#include "sdelab/pde.hpp"
#include "sdelab/scenarios.hpp"
#include "sdelab/stats.hpp"
#include "sdelab/verifiers.hpp"
#include "sdelab/zvonkin.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace sdelab {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunContext {
  const ScenarioConfig& cfg;
  fs::path out;
  json summary;
  std::vector<std::string> files;
  RunManifest* manifest;

  std::string path(const std::string& name) {
    files.push_back(name);
    return (out / name).string();
  }
  void check(bool ok, const std::string& what) {
    if (!ok) {
      manifest->all_checks_ok = false;
      manifest->check_failures.push_back(what);
    }
  }
};

std::vector<std::string> vec_cells(const Vec& x) {
  std::vector<std::string> cells;
  for (int i = 0; i < x.size(); ++i) cells.push_back(csv_cell(x(i)));
  return cells;
}

Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) x(static_cast<int>(i)) = v[i];
  return x;
}

void run_simulate(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& blk = cfg.simulate;
  const CoefficientField field = cfg.make_field();
  const BoundedDomain domain = cfg.make_domain();
  const Vec x0 = to_vec(blk.x0);
  json& out = ctx.summary["simulate"];

  if (!blk.r_schedule.empty()) {
    std::vector<PathSample> paths(blk.paths);
    std::vector<GlobalizationReport> reps(blk.paths);
    parallel_for_index(blk.paths, cfg.threads, [&](long i) {
      auto [p, r] = simulate_global(field, x0, cfg.T, cfg.dt,
                                    {cfg.seed, static_cast<uint64_t>(i)}, blk.r_schedule,
                                    SimOptions{blk.record_stride});
      paths[i] = std::move(p);
      reps[i] = std::move(r);
    });
    CsvWriter csv(ctx.path("global_summary.csv"));
    csv.header({"path", "levels_used", "exhausted", "blew_up", "flagged", "final_time"});
    long flagged = 0;
    for (long i = 0; i < blk.paths; ++i) {
      flagged += reps[i].flagged_explosive() ? 1 : 0;
      csv.row({csv_cell(static_cast<long long>(i)), csv_cell(static_cast<long long>(reps[i].levels_used)),
               csv_cell(static_cast<long long>(reps[i].exhausted)),
               csv_cell(static_cast<long long>(reps[i].blew_up)),
               csv_cell(static_cast<long long>(reps[i].flagged_explosive())),
               csv_cell(paths[i].times.back())});
    }
    CsvWriter exits(ctx.path("global_exits.csv"));
    exits.header({"path", "level_radius", "exit_time"});
    for (long i = 0; i < blk.paths; ++i) {
      for (size_t l = 0; l < reps[i].level_exits.size(); ++l) {
        exits.row({csv_cell(static_cast<long long>(i)), csv_cell(blk.r_schedule[l]),
                   csv_cell(reps[i].level_exits[l])});
      }
    }
    out["mode"] = "global";
    out["paths"] = blk.paths;
    out["flagged_explosive"] = flagged;
    out["flagged_fraction"] = static_cast<double>(flagged) / blk.paths;
    return;
  }

  std::vector<PathSample> paths(blk.paths);
  parallel_for_index(blk.paths, cfg.threads, [&](long i) {
    paths[i] = euler_maruyama_localized(field, x0, domain, cfg.T, cfg.dt,
                                        {cfg.seed, static_cast<uint64_t>(i)},
                                        SimOptions{blk.record_stride});
  });
  CsvWriter csv(ctx.path("simulate_summary.csv"));
  std::vector<std::string> hdr = {"path", "exited", "blew_up", "exit_time"};
  for (int c = 0; c < field.dim; ++c) hdr.push_back("final_x" + std::to_string(c));
  csv.header(hdr);
  std::vector<double> exit_times;
  long exited = 0;
  for (long i = 0; i < blk.paths; ++i) {
    const auto& p = paths[i];
    std::vector<std::string> cells = {csv_cell(static_cast<long long>(i)),
                                      csv_cell(static_cast<long long>(p.exited)),
                                      csv_cell(static_cast<long long>(p.blew_up)),
                                      csv_cell(p.exit_time.value_or(-1.0))};
    for (const auto& c : vec_cells(p.last_state())) cells.push_back(c);
    csv.row(cells);
    if (p.exited) {
      ++exited;
      exit_times.push_back(*p.exit_time);
    }
  }
  if (blk.write_trajectories) {
    CsvWriter traj(ctx.path("simulate_paths.csv"));
    std::vector<std::string> thdr = {"path", "t"};
    for (int c = 0; c < field.dim; ++c) thdr.push_back("x" + std::to_string(c));
    traj.header(thdr);
    for (long i = 0; i < blk.paths; ++i) {
      for (size_t k = 0; k < paths[i].size(); ++k) {
        std::vector<std::string> cells = {csv_cell(static_cast<long long>(i)),
                                          csv_cell(paths[i].times[k])};
        for (const auto& c : vec_cells(paths[i].state(k))) cells.push_back(c);
        traj.row(cells);
      }
    }
  }
  out["mode"] = "localized";
  out["paths"] = blk.paths;
  out["exited"] = exited;
  if (!exit_times.empty()) {
    auto ms = mean_stderr(exit_times);
    out["mean_exit_time"] = ms.mean;
    out["mean_exit_time_se"] = ms.se;
  }
}

void run_pde(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& blk = cfg.pde;
  PDEProblem prob;
  prob.field = cfg.make_field();
  prob.domain = cfg.make_domain();
  prob.horizon = cfg.T;
  prob.mollify_level = blk.mollify_level;
  if (blk.source == "drift") {
    prob.source = [f = prob.field](double t, const Vec& x) { return f.drift(t, x)(0); };
  } else if (blk.source == "constant") {
    prob.source = [v = blk.constant_value](double, const Vec&) { return v; };
  } else {
    throw std::invalid_argument("pde block: source must be 'drift' or 'constant'");
  }
  SpaceTimeGrid grid = cfg.make_grid();
  PDESolution sol = solve_cauchy_dirichlet(prob, grid);

  CsvWriter csv(ctx.path("pde_slice.csv"));
  std::vector<std::string> hdr = {"t"};
  for (int a = 0; a < grid.dim(); ++a) hdr.push_back("x" + std::to_string(a));
  hdr.push_back("u");
  for (int a = 0; a < grid.dim(); ++a) hdr.push_back("du_dx" + std::to_string(a));
  csv.header(hdr);
  for (double ts : blk.slice_times) {
    int k = static_cast<int>(std::lround(ts / grid.dt()));
    k = std::max(0, std::min(k, grid.time_nodes() - 1));
    for (long s = 0; s < grid.space_size(); ++s) {
      std::vector<std::string> cells = {csv_cell(grid.time_node(k))};
      for (const auto& c : vec_cells(grid.node_point(s))) cells.push_back(c);
      cells.push_back(csv_cell(sol.u.value(k, s, 0)));
      for (int a = 0; a < grid.dim(); ++a) cells.push_back(csv_cell(sol.grad.value(k, s, a)));
      csv.row(cells);
    }
  }

  json& out = ctx.summary["pde"];
  out["max_residual"] = sol.max_residual();
  out["upwind_used"] = sol.upwind_used;
  if (!blk.decay_ladder.empty()) {
    DecayReport rep = verify_decay_estimates(sol, prob, blk.decay_ladder, blk.holder_exponent);
    CsvWriter dcsv(ctx.path("pde_decay.csv"));
    dcsv.header({"t", "sup_u", "grad_holder"});
    for (size_t i = 0; i < rep.times.size(); ++i) {
      dcsv.row({csv_cell(rep.times[i]), csv_cell(rep.sup_u[i]), csv_cell(rep.grad_holder[i])});
    }
    out["decay_fit_done"] = rep.fit_done;
    out["decay_exponent"] = rep.fitted_exponent;
    out["decay_exponent_se"] = rep.fit_stderr;
    out["grad_decay_exponent"] = rep.grad_fitted_exponent;
    out["monotone_decay"] = rep.monotone_decay;
  }
}

void run_zvonkin(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& blk = cfg.zvonkin;
  const CoefficientField field = cfg.make_field();
  const BoundedDomain domain = cfg.make_domain();
  const Vec x0 = to_vec(blk.x0);

  TransformOptions topts;
  topts.space_nodes = blk.space_nodes;
  topts.dt_target = blk.dt_target;
  topts.audit_pairs = blk.audit_pairs;

  ZvonkinSimulator sim(field, domain, cfg.T, cfg.dt, topts);
  std::vector<PathSample> zv(blk.paths), di(blk.paths);
  parallel_for_index(blk.paths, cfg.threads, [&](long i) {
    zv[i] = sim.simulate(x0, {cfg.seed, static_cast<uint64_t>(i)}, SimOptions{0});
  });
  if (blk.compare_direct) {
    parallel_for_index(blk.paths, cfg.threads, [&](long i) {
      di[i] = euler_maruyama_localized(field, x0, domain, cfg.T, cfg.dt,
                                       {cfg.seed, static_cast<uint64_t>(i)}, SimOptions{0});
    });
  }

  CsvWriter csv(ctx.path("zvonkin_compare.csv"));
  std::vector<std::string> hdr = {"path", "zv_exited", "zv_exit_time"};
  for (int c = 0; c < field.dim; ++c) hdr.push_back("zv_final_x" + std::to_string(c));
  if (blk.compare_direct) {
    hdr.push_back("dir_exited");
    hdr.push_back("dir_exit_time");
    for (int c = 0; c < field.dim; ++c) hdr.push_back("dir_final_x" + std::to_string(c));
    hdr.push_back("bitwise_equal");
  }
  csv.header(hdr);

  std::vector<double> zv_term, di_term, zv_tau, di_tau;
  long bitwise_equal = 0;
  for (long i = 0; i < blk.paths; ++i) {
    std::vector<std::string> cells = {csv_cell(static_cast<long long>(i)),
                                      csv_cell(static_cast<long long>(zv[i].exited)),
                                      csv_cell(zv[i].exit_time.value_or(-1.0))};
    for (const auto& c : vec_cells(zv[i].last_state())) cells.push_back(c);
    zv_term.push_back(zv[i].last_state()(0));
    zv_tau.push_back(zv[i].exit_time.value_or(cfg.T));
    if (blk.compare_direct) {
      cells.push_back(csv_cell(static_cast<long long>(di[i].exited)));
      cells.push_back(csv_cell(di[i].exit_time.value_or(-1.0)));
      for (const auto& c : vec_cells(di[i].last_state())) cells.push_back(c);
      di_term.push_back(di[i].last_state()(0));
      di_tau.push_back(di[i].exit_time.value_or(cfg.T));
      const bool eq = zv[i].exited == di[i].exited &&
                      zv[i].exit_time.value_or(-1.0) == di[i].exit_time.value_or(-1.0) &&
                      (zv[i].last_state() - di[i].last_state()).cwiseAbs().maxCoeff() == 0.0;
      bitwise_equal += eq ? 1 : 0;
      cells.push_back(csv_cell(static_cast<long long>(eq)));
    }
    csv.row(cells);
  }

  json& out = ctx.summary["zvonkin"];
  out["paths"] = blk.paths;
  out["windows"] = sim.bundles().size();
  out["window_length"] = sim.window_length();
  double sup_grad = 0, worst_lo = 2, worst_hi = 0;
  for (const auto& b : sim.bundles()) {
    sup_grad = std::max(sup_grad, b.sup_grad_norm());
    worst_lo = std::min(worst_lo, b.audit().worst_lower_ratio);
    worst_hi = std::max(worst_hi, b.audit().worst_upper_ratio);
  }
  out["sup_grad_norm"] = sup_grad;
  out["audit_worst_lower_ratio"] = worst_lo;
  out["audit_worst_upper_ratio"] = worst_hi;
  if (blk.compare_direct) {
    auto mz = mean_stderr(zv_term), md = mean_stderr(di_term);
    const double se = std::sqrt(mz.se * mz.se + md.se * md.se);
    out["terminal_mean_zvonkin"] = mz.mean;
    out["terminal_mean_direct"] = md.mean;
    out["terminal_mean_combined_se"] = se;
    const bool mean_ok = std::abs(mz.mean - md.mean) <= 3.0 * std::max(se, 1e-300);
    out["terminal_mean_ok"] = mean_ok;
    ctx.check(mean_ok, "zvonkin: terminal mean disagrees with direct beyond 3 se");
    const double ks = ks_statistic(zv_tau, di_tau);
    const double crit = ks_critical(1.628, zv_tau.size(), di_tau.size());
    out["exit_ks_statistic"] = ks;
    out["exit_ks_critical_1pc"] = crit;
    out["exit_ks_ok"] = ks < crit;
    ctx.check(ks < crit, "zvonkin: exit-time KS statistic above the 1% critical value");
    out["bitwise_equal_paths"] = bitwise_equal;
  }
}

void run_krylov(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& blk = cfg.krylov;
  const CoefficientField field = cfg.make_field();
  const BoundedDomain domain = cfg.make_domain();

  ScalarFn f;
  if (blk.f == "one") {
    f = [](double, const Vec&) { return 1.0; };
  } else if (blk.f == "indicator_above") {
    f = [th = blk.threshold](double, const Vec& x) { return x(0) > th ? 1.0 : 0.0; };
  } else {
    throw std::invalid_argument("krylov block: f must be 'one' or 'indicator_above'");
  }

  KrylovOptions opts;
  opts.r = blk.r;
  opts.s_ladder = blk.s_ladder;
  opts.delta = blk.delta;
  opts.paths = blk.paths;
  opts.dt = cfg.dt;
  opts.T = cfg.T;
  opts.master_seed = cfg.seed;
  opts.threads = cfg.threads;
  KrylovReport rep = krylov_check(field, f, domain, to_vec(blk.x0), opts);

  CsvWriter csv(ctx.path("krylov_report.csv"));
  csv.header({"r", "s", "lhs", "lhs_se", "rhs"});
  for (const auto& row : rep.rows) {
    csv.row({csv_cell(row.r), csv_cell(row.s), csv_cell(row.lhs), csv_cell(row.lhs_se),
             csv_cell(row.rhs)});
  }
  json& out = ctx.summary["krylov"];
  out["f_norm"] = rep.f_norm;
  out["delta"] = rep.delta;
  out["delta_hat"] = rep.delta_hat;
  out["delta_se"] = rep.delta_se;
  out["c_hat"] = rep.c_hat;
  out["fit_done"] = rep.fit_done;
  out["pass"] = rep.pass;
  out["restart_violations"] = rep.restart_violations;
  ctx.check(rep.pass, "krylov: exponent/domination check failed");
}

void run_stability(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& blk = cfg.stability;
  const CoefficientField field = cfg.make_field();
  const BoundedDomain domain = cfg.make_domain();

  DriftFn h_b;
  DiffusionFn h_sigma;
  if (blk.direction == "drift") {
    h_b = [d = field.dim](double, const Vec&) { return Vec(Vec::Ones(d)); };
  } else if (blk.direction == "sigma") {
    h_sigma = [d = field.dim](double, const Vec&) { return Mat(Mat::Identity(d, d)); };
  } else {
    throw std::invalid_argument("stability block: direction must be 'drift' or 'sigma'");
  }

  StabilityOptions opts;
  opts.eps_ladder = blk.eps_ladder;
  opts.p0 = blk.p0;
  opts.pairs = blk.pairs;
  opts.dt = cfg.dt;
  opts.T = cfg.T;
  opts.master_seed = cfg.seed;
  opts.threads = cfg.threads;
  StabilityReport rep = stability_check(field, h_b, h_sigma, domain, to_vec(blk.x0), opts);

  CsvWriter csv(ctx.path("stability_report.csv"));
  csv.header({"eps", "m", "m_se", "n"});
  for (const auto& row : rep.rows) {
    csv.row({csv_cell(row.eps), csv_cell(row.m), csv_cell(row.m_se), csv_cell(row.n)});
  }
  json& out = ctx.summary["stability"];
  out["direction"] = blk.direction;
  out["p0"] = rep.p0;
  out["slope"] = rep.slope;
  out["slope_se"] = rep.slope_se;
  out["c_hat"] = rep.c_hat;
  out["pass"] = rep.pass;
  ctx.check(rep.pass, "stability: slope outside [0.8, 1.2]");
}

void run_lyapunov(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& blk = cfg.lyapunov;
  const CoefficientField field = cfg.make_field();
  const LyapunovSpec spec = cfg.make_lyapunov();
  const BoundedDomain region = BoundedDomain::centered_box(cfg.dim(), blk.region_radius, "region");
  const Vec x0 = Vec::Zero(cfg.dim());

  LyapunovReport ver = verify_lyapunov(field, spec, region, 1.0, {});
  const double c_used = blk.C > 0 ? blk.C : ver.c_hat;
  LyapunovReport ver_used = verify_lyapunov(field, spec, region, c_used, {});

  json& out = ctx.summary["lyapunov"];
  out["c_hat"] = ver.c_hat;
  out["c_used"] = c_used;
  out["certificate_pass"] = ver_used.pass;
  ctx.check(ver_used.pass, "lyapunov: L_t V <= C V fails on the region at the used C");

  const long n_steps = std::lround(cfg.T / cfg.dt);
  const int stride = static_cast<int>(std::max<long>(1, n_steps / 100));
  std::vector<PathSample> paths(blk.paths);
  parallel_for_index(blk.paths, cfg.threads, [&](long i) {
    paths[i] = euler_maruyama_localized(field, x0, region, cfg.T, cfg.dt,
                                        {cfg.seed, static_cast<uint64_t>(i)}, SimOptions{stride});
  });
  std::vector<double> ladder = blk.t_ladder;
  if (ladder.empty()) {
    for (int i = 1; i <= 20; ++i) ladder.push_back(cfg.T * i / 20.0);
  }
  SupermartingaleReport sm = supermartingale_check(paths, spec, c_used, ladder);
  CsvWriter csv(ctx.path("lyapunov_ladder.csv"));
  csv.header({"t", "mean", "se", "ok"});
  for (size_t i = 0; i < sm.times.size(); ++i) {
    csv.row({csv_cell(sm.times[i]), csv_cell(sm.means[i]), csv_cell(sm.stderrs[i]),
             csv_cell(static_cast<long long>(sm.ok[i]))});
  }
  out["v0"] = sm.v0;
  out["supermartingale_pass"] = sm.pass;
  ctx.check(sm.pass, "lyapunov: supermartingale check failed at the used C");

  // explosion bound vs empirical exit frequency on growing boxes
  CsvWriter bcsv(ctx.path("lyapunov_bounds.csv"));
  bcsv.header({"R", "bound", "empirical"});
  const double N = blk.horizon_count;
  json bounds = json::array();
  for (double R : blk.explosion_R) {
    const double bound = explosion_bound(spec, c_used, x0, N, R);
    const BoundedDomain ball = BoundedDomain::centered_box(cfg.dim(), R);
    std::vector<long> exited(blk.paths, 0);
    parallel_for_index(blk.paths, cfg.threads, [&](long i) {
      PathSample p = euler_maruyama_localized(field, x0, ball, N, cfg.dt,
                                              {cfg.seed + 7, static_cast<uint64_t>(i)},
                                              SimOptions{0});
      exited[i] = p.exited ? 1 : 0;
    });
    long count = 0;
    for (long e : exited) count += e;
    const double freq = static_cast<double>(count) / blk.paths;
    bcsv.row({csv_cell(R), csv_cell(bound), csv_cell(freq)});
    json row;
    row["R"] = R;
    row["bound"] = bound;
    row["empirical"] = freq;
    row["ok"] = freq <= bound;
    bounds.push_back(row);
    ctx.check(freq <= bound, "lyapunov: empirical exit frequency exceeds the bound at R=" +
                                 std::to_string(R));
  }
  out["explosion"] = bounds;
}

}  // namespace

RunManifest run(const ScenarioConfig& cfg, const std::string& raw_config_text,
                const std::vector<std::string>& only_blocks) {
  const auto t_start = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.config_hash = fnv1a64_hex(raw_config_text);

  fs::create_directories(cfg.out_dir);
  RunContext ctx{cfg, fs::path(cfg.out_dir), json::object(), {}, &manifest};
  ctx.summary["config_hash"] = manifest.config_hash;
  ctx.summary["version"] = kArtifactVersion;

  for (const auto& name : cfg.block_order) {
    if (!only_blocks.empty() &&
        std::find(only_blocks.begin(), only_blocks.end(), name) == only_blocks.end()) {
      continue;
    }
    try {
      if (name == "simulate") run_simulate(ctx);
      else if (name == "pde") run_pde(ctx);
      else if (name == "zvonkin") run_zvonkin(ctx);
      else if (name == "krylov") run_krylov(ctx);
      else if (name == "stability") run_stability(ctx);
      else if (name == "lyapunov") run_lyapunov(ctx);
    } catch (const std::exception& e) {
      throw std::runtime_error("block [" + name + "]: " + e.what());
    }
  }

  ctx.summary["all_checks_ok"] = manifest.all_checks_ok;
  ctx.summary["check_failures"] = manifest.check_failures;
  write_text_file((ctx.out / "summary.json").string(), ctx.summary.dump(2) + "\n");
  ctx.files.push_back("summary.json");

  for (const auto& name : ctx.files) {
    manifest.files.push_back({name, file_checksum((ctx.out / name).string())});
  }
  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  json mj;
  mj["config_hash"] = manifest.config_hash;
  mj["version"] = manifest.version;
  mj["wall_clock_seconds"] = manifest.wall_clock_seconds;
  mj["all_checks_ok"] = manifest.all_checks_ok;
  mj["check_failures"] = manifest.check_failures;
  json files = json::array();
  for (const auto& f : manifest.files) {
    json e;
    e["name"] = f.name;
    e["checksum"] = f.checksum;
    files.push_back(e);
  }
  mj["files"] = files;
  write_text_file((ctx.out / "manifest.json").string(), mj.dump(2) + "\n");
  return manifest;
}

bool verify_manifest(const std::string& out_dir, std::string* message) {
  const fs::path out(out_dir);
  json mj;
  try {
    mj = json::parse(read_text_file((out / "manifest.json").string()));
  } catch (const std::exception& e) {
    if (message) *message = std::string("cannot read manifest: ") + e.what();
    return false;
  }
  bool ok = true;
  std::string msg;
  for (const auto& f : mj["files"]) {
    const std::string name = f["name"], expect = f["checksum"];
    std::string got;
    try {
      got = file_checksum((out / name).string());
    } catch (const std::exception&) {
      got = "<missing>";
    }
    if (got != expect) {
      ok = false;
      msg += name + ": checksum mismatch (" + got + " vs " + expect + ")\n";
    } else {
      msg += name + ": ok\n";
    }
  }
  msg += std::string("checks: ") + (mj.value("all_checks_ok", false) ? "all ok" : "failures recorded");
  if (message) *message = msg;
  return ok;
}

}  // namespace sdelab
