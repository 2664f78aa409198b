#include "sdelab/config.hpp"

#include "sdelab/csv.hpp"
#include "sdelab/scenarios.hpp"
#include "sdelab/toml.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sdelab {

namespace {

using toml::Table;
using toml::Value;

void reject_unknown(const Table& t, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [k, v] : t.entries) {
    if (!allowed.count(k)) {
      throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
    }
  }
}

std::vector<std::vector<double>> as_nested(const Value& v) {
  std::vector<std::vector<double>> out;
  for (const auto& row : v.as_array()) out.push_back(row.as_double_array());
  return out;
}

std::string fmt_array(const std::vector<double>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += toml::format_double(v[i]);
  }
  return s + "]";
}

std::string fmt_array_int(const std::vector<int>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

std::string fmt_nested(const std::vector<std::vector<double>>& v) {
  std::string s = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt_array(v[i]);
  }
  return s + "]";
}

// 1D tabulated scenario: CSV rows "x,value" matching the grid nodes
GridFunction load_table_csv(const std::string& path, std::shared_ptr<const SpaceTimeGrid> grid) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("table csv: expected x,value rows");
    vals.push_back(std::stod(line.substr(comma + 1)));
  }
  if (static_cast<long>(vals.size()) != grid->space_size()) {
    throw std::invalid_argument("table csv '" + path + "': " + std::to_string(vals.size()) +
                                " rows but the grid has " + std::to_string(grid->space_size()) +
                                " nodes");
  }
  GridFunction g(grid, 1);
  for (int k = 0; k < grid->time_nodes(); ++k)
    for (long s = 0; s < grid->space_size(); ++s) g.set_value(k, s, 0, vals[s]);
  return g;
}

}  // namespace

BoundedDomain ScenarioConfig::make_domain() const {
  Vec lo(dim()), hi(dim());
  for (int a = 0; a < dim(); ++a) {
    lo(a) = domain_lo[a];
    hi(a) = domain_hi[a];
  }
  return BoundedDomain(lo, hi, scenario);
}

SpaceTimeGrid ScenarioConfig::make_grid() const {
  return SpaceTimeGrid(make_domain(), T, grid_time_nodes, grid_space_nodes);
}

CoefficientField ScenarioConfig::make_field() const {
  CoefficientField f;
  if (scenario == "threshold_ou") {
    f = make_threshold_ou(betas, alphas, thetas, sigma, p, q, kappa);
  } else if (scenario == "piecewise_poly") {
    f = make_piecewise_poly(coeffs, thetas, sigma, p, q, kappa);
  } else if (scenario == "custom") {
    auto grid = std::make_shared<const SpaceTimeGrid>(make_grid());
    f = make_tabulated_field(grid, load_table_csv(drift_csv, grid),
                             load_table_csv(sigma_csv, grid), p, q,
                             kappa > 1 ? kappa : 4.0);
  } else {
    throw std::invalid_argument("config: unknown scenario '" + scenario + "'");
  }
  f.alpha = alpha;
  return f;
}

LyapunovSpec ScenarioConfig::make_lyapunov() const { return make_quadratic_lyapunov(dim()); }

ScenarioConfig parse_config_text(const std::string& text) {
  toml::Document doc = toml::parse(text);
  ScenarioConfig cfg;

  reject_unknown(doc.root, {"scenario", "seed", "T", "dt", "out_dir", "threads", "bit_exact"},
                 "the top level");
  if (!doc.root.has("scenario")) throw std::invalid_argument("config: missing scenario");
  cfg.scenario = doc.root.at("scenario").as_string();
  if (!doc.root.has("seed")) {
    throw std::invalid_argument("config: missing seed (runs must be reproducible)");
  }
  cfg.seed = static_cast<uint64_t>(doc.root.at("seed").as_integer());
  if (doc.root.has("T")) cfg.T = doc.root.at("T").as_double();
  if (doc.root.has("dt")) cfg.dt = doc.root.at("dt").as_double();
  if (doc.root.has("out_dir")) cfg.out_dir = doc.root.at("out_dir").as_string();
  if (doc.root.has("threads")) cfg.threads = static_cast<int>(doc.root.at("threads").as_integer());
  if (doc.root.has("bit_exact")) cfg.bit_exact = doc.root.at("bit_exact").as_boolean();
  if (!(cfg.T > 0) || !(cfg.dt > 0)) throw std::invalid_argument("config: need T > 0 and dt > 0");

  for (const auto& [name, table] : doc.tables) {
    if (name == "domain") {
      reject_unknown(table, {"lo", "hi"}, "[domain]");
      cfg.domain_lo = table.at("lo").as_double_array();
      cfg.domain_hi = table.at("hi").as_double_array();
    } else if (name == "grid") {
      reject_unknown(table, {"time_nodes", "space_nodes"}, "[grid]");
      if (table.has("time_nodes"))
        cfg.grid_time_nodes = static_cast<int>(table.at("time_nodes").as_integer());
      if (table.has("space_nodes")) cfg.grid_space_nodes = table.at("space_nodes").as_int_array();
    } else if (name == "coefficients") {
      reject_unknown(table,
                     {"betas", "alphas", "thetas", "coeffs", "sigma", "p", "q", "kappa", "alpha",
                      "drift_csv", "sigma_csv"},
                     "[coefficients]");
      if (table.has("betas")) cfg.betas = table.at("betas").as_double_array();
      if (table.has("alphas")) cfg.alphas = table.at("alphas").as_double_array();
      if (table.has("thetas")) cfg.thetas = table.at("thetas").as_double_array();
      if (table.has("coeffs")) cfg.coeffs = as_nested(table.at("coeffs"));
      if (table.has("sigma")) cfg.sigma = table.at("sigma").as_double();
      if (table.has("p")) cfg.p = table.at("p").as_double();
      if (table.has("q")) cfg.q = table.at("q").as_double();
      if (table.has("kappa")) cfg.kappa = table.at("kappa").as_double();
      if (table.has("alpha")) cfg.alpha = table.at("alpha").as_double();
      if (table.has("drift_csv")) cfg.drift_csv = table.at("drift_csv").as_string();
      if (table.has("sigma_csv")) cfg.sigma_csv = table.at("sigma_csv").as_string();
    } else if (name == "simulate") {
      reject_unknown(table, {"paths", "x0", "record_stride", "write_trajectories", "r_schedule"},
                     "[simulate]");
      cfg.simulate.present = true;
      cfg.block_order.push_back(name);
      if (table.has("paths")) cfg.simulate.paths = table.at("paths").as_integer();
      if (table.has("x0")) cfg.simulate.x0 = table.at("x0").as_double_array();
      if (table.has("record_stride"))
        cfg.simulate.record_stride = static_cast<int>(table.at("record_stride").as_integer());
      if (table.has("write_trajectories"))
        cfg.simulate.write_trajectories = table.at("write_trajectories").as_boolean();
      if (table.has("r_schedule")) cfg.simulate.r_schedule = table.at("r_schedule").as_double_array();
    } else if (name == "pde") {
      reject_unknown(table,
                     {"source", "constant_value", "mollify_level", "slice_times", "decay_ladder",
                      "holder_exponent"},
                     "[pde]");
      cfg.pde.present = true;
      cfg.block_order.push_back(name);
      if (table.has("source")) cfg.pde.source = table.at("source").as_string();
      if (table.has("constant_value")) cfg.pde.constant_value = table.at("constant_value").as_double();
      if (table.has("mollify_level"))
        cfg.pde.mollify_level = static_cast<int>(table.at("mollify_level").as_integer());
      if (table.has("slice_times")) cfg.pde.slice_times = table.at("slice_times").as_double_array();
      if (table.has("decay_ladder")) cfg.pde.decay_ladder = table.at("decay_ladder").as_double_array();
      if (table.has("holder_exponent"))
        cfg.pde.holder_exponent = table.at("holder_exponent").as_double();
    } else if (name == "zvonkin") {
      reject_unknown(table, {"paths", "x0", "compare_direct", "audit_pairs", "space_nodes", "dt_target"},
                     "[zvonkin]");
      cfg.zvonkin.present = true;
      cfg.block_order.push_back(name);
      if (table.has("paths")) cfg.zvonkin.paths = table.at("paths").as_integer();
      if (table.has("x0")) cfg.zvonkin.x0 = table.at("x0").as_double_array();
      if (table.has("compare_direct"))
        cfg.zvonkin.compare_direct = table.at("compare_direct").as_boolean();
      if (table.has("audit_pairs")) cfg.zvonkin.audit_pairs = table.at("audit_pairs").as_integer();
      if (table.has("space_nodes"))
        cfg.zvonkin.space_nodes = static_cast<int>(table.at("space_nodes").as_integer());
      if (table.has("dt_target")) cfg.zvonkin.dt_target = table.at("dt_target").as_double();
    } else if (name == "krylov") {
      reject_unknown(table, {"f", "threshold", "r", "s_ladder", "delta", "paths", "x0"}, "[krylov]");
      cfg.krylov.present = true;
      cfg.block_order.push_back(name);
      if (table.has("f")) cfg.krylov.f = table.at("f").as_string();
      if (table.has("threshold")) cfg.krylov.threshold = table.at("threshold").as_double();
      if (table.has("r")) cfg.krylov.r = table.at("r").as_double();
      if (table.has("s_ladder")) cfg.krylov.s_ladder = table.at("s_ladder").as_double_array();
      if (table.has("delta")) cfg.krylov.delta = table.at("delta").as_double();
      if (table.has("paths")) cfg.krylov.paths = table.at("paths").as_integer();
      if (table.has("x0")) cfg.krylov.x0 = table.at("x0").as_double_array();
    } else if (name == "stability") {
      reject_unknown(table, {"direction", "eps_ladder", "p0", "pairs", "x0"}, "[stability]");
      cfg.stability.present = true;
      cfg.block_order.push_back(name);
      if (table.has("direction")) cfg.stability.direction = table.at("direction").as_string();
      if (table.has("eps_ladder")) cfg.stability.eps_ladder = table.at("eps_ladder").as_double_array();
      if (table.has("p0")) cfg.stability.p0 = table.at("p0").as_double();
      if (table.has("pairs")) cfg.stability.pairs = table.at("pairs").as_integer();
      if (table.has("x0")) cfg.stability.x0 = table.at("x0").as_double_array();
    } else if (name == "lyapunov") {
      reject_unknown(table,
                     {"C", "region_radius", "paths", "t_ladder", "explosion_R", "horizon_count"},
                     "[lyapunov]");
      cfg.lyapunov.present = true;
      cfg.block_order.push_back(name);
      if (table.has("C")) cfg.lyapunov.C = table.at("C").as_double();
      if (table.has("region_radius"))
        cfg.lyapunov.region_radius = table.at("region_radius").as_double();
      if (table.has("paths")) cfg.lyapunov.paths = table.at("paths").as_integer();
      if (table.has("t_ladder")) cfg.lyapunov.t_ladder = table.at("t_ladder").as_double_array();
      if (table.has("explosion_R")) cfg.lyapunov.explosion_R = table.at("explosion_R").as_double_array();
      if (table.has("horizon_count")) cfg.lyapunov.horizon_count = table.at("horizon_count").as_double();
    } else {
      throw std::invalid_argument("config: unknown table [" + name + "]");
    }
  }

  // validation
  if (cfg.domain_lo.size() != cfg.domain_hi.size() ||
      cfg.domain_lo.size() != cfg.grid_space_nodes.size()) {
    throw std::invalid_argument("config: domain/grid dimension mismatch");
  }
  for (size_t i = 0; i + 1 < cfg.thetas.size(); ++i) {
    if (!(cfg.thetas[i] < cfg.thetas[i + 1])) {
      throw std::invalid_argument("config: thresholds not increasing");
    }
  }
  if (cfg.scenario == "threshold_ou" && (cfg.betas.empty() || cfg.betas.size() != cfg.alphas.size())) {
    throw std::invalid_argument("config: threshold_ou needs matching betas and alphas");
  }
  if (cfg.scenario == "piecewise_poly" && cfg.coeffs.empty()) {
    throw std::invalid_argument("config: piecewise_poly needs a coefficient table");
  }
  if (cfg.scenario == "custom" && (cfg.drift_csv.empty() || cfg.sigma_csv.empty())) {
    throw std::invalid_argument("config: custom scenario needs drift_csv and sigma_csv");
  }
  const double index = cfg.dim() / cfg.p + 2.0 / cfg.q;
  if (cfg.krylov.present && !(index < 2.0)) {
    throw std::invalid_argument("config: krylov block requires d/p + 2/q < 2, got " +
                                std::to_string(index));
  }
  if ((cfg.stability.present || cfg.zvonkin.present) && !(index < 1.0)) {
    throw std::invalid_argument("config: stability/zvonkin blocks require d/p + 2/q < 1, got " +
                                std::to_string(index));
  }
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

std::string ScenarioConfig::to_toml() const {
  std::ostringstream os;
  os << "scenario = \"" << scenario << "\"\n";
  os << "seed = " << seed << "\n";
  os << "T = " << toml::format_double(T) << "\n";
  os << "dt = " << toml::format_double(dt) << "\n";
  os << "out_dir = \"" << out_dir << "\"\n";
  os << "threads = " << threads << "\n";
  os << "bit_exact = " << (bit_exact ? "true" : "false") << "\n";
  os << "\n[domain]\nlo = " << fmt_array(domain_lo) << "\nhi = " << fmt_array(domain_hi) << "\n";
  os << "\n[grid]\ntime_nodes = " << grid_time_nodes
     << "\nspace_nodes = " << fmt_array_int(grid_space_nodes) << "\n";
  os << "\n[coefficients]\n";
  if (!betas.empty()) os << "betas = " << fmt_array(betas) << "\n";
  if (!alphas.empty()) os << "alphas = " << fmt_array(alphas) << "\n";
  if (!thetas.empty()) os << "thetas = " << fmt_array(thetas) << "\n";
  if (!coeffs.empty()) os << "coeffs = " << fmt_nested(coeffs) << "\n";
  if (!drift_csv.empty()) os << "drift_csv = \"" << drift_csv << "\"\n";
  if (!sigma_csv.empty()) os << "sigma_csv = \"" << sigma_csv << "\"\n";
  os << "sigma = " << toml::format_double(sigma) << "\n";
  os << "p = " << toml::format_double(p) << "\nq = " << toml::format_double(q) << "\n";
  os << "kappa = " << toml::format_double(kappa) << "\nalpha = " << toml::format_double(alpha)
     << "\n";
  for (const auto& name : block_order) {
    if (name == "simulate") {
      os << "\n[simulate]\npaths = " << simulate.paths << "\nx0 = " << fmt_array(simulate.x0)
         << "\nrecord_stride = " << simulate.record_stride << "\nwrite_trajectories = "
         << (simulate.write_trajectories ? "true" : "false");
      if (!simulate.r_schedule.empty()) os << "\nr_schedule = " << fmt_array(simulate.r_schedule);
      os << "\n";
    } else if (name == "pde") {
      os << "\n[pde]\nsource = \"" << pde.source << "\"\nconstant_value = "
         << toml::format_double(pde.constant_value) << "\nmollify_level = " << pde.mollify_level
         << "\nslice_times = " << fmt_array(pde.slice_times);
      if (!pde.decay_ladder.empty()) os << "\ndecay_ladder = " << fmt_array(pde.decay_ladder);
      os << "\nholder_exponent = " << toml::format_double(pde.holder_exponent) << "\n";
    } else if (name == "zvonkin") {
      os << "\n[zvonkin]\npaths = " << zvonkin.paths << "\nx0 = " << fmt_array(zvonkin.x0)
         << "\ncompare_direct = " << (zvonkin.compare_direct ? "true" : "false")
         << "\naudit_pairs = " << zvonkin.audit_pairs << "\nspace_nodes = " << zvonkin.space_nodes
         << "\ndt_target = " << toml::format_double(zvonkin.dt_target) << "\n";
    } else if (name == "krylov") {
      os << "\n[krylov]\nf = \"" << krylov.f << "\"\nthreshold = "
         << toml::format_double(krylov.threshold) << "\nr = " << toml::format_double(krylov.r)
         << "\ns_ladder = " << fmt_array(krylov.s_ladder)
         << "\ndelta = " << toml::format_double(krylov.delta) << "\npaths = " << krylov.paths
         << "\nx0 = " << fmt_array(krylov.x0) << "\n";
    } else if (name == "stability") {
      os << "\n[stability]\ndirection = \"" << stability.direction
         << "\"\neps_ladder = " << fmt_array(stability.eps_ladder)
         << "\np0 = " << toml::format_double(stability.p0) << "\npairs = " << stability.pairs
         << "\nx0 = " << fmt_array(stability.x0) << "\n";
    } else if (name == "lyapunov") {
      os << "\n[lyapunov]\nC = " << toml::format_double(lyapunov.C)
         << "\nregion_radius = " << toml::format_double(lyapunov.region_radius)
         << "\npaths = " << lyapunov.paths;
      if (!lyapunov.t_ladder.empty()) os << "\nt_ladder = " << fmt_array(lyapunov.t_ladder);
      os << "\nexplosion_R = " << fmt_array(lyapunov.explosion_R)
         << "\nhorizon_count = " << toml::format_double(lyapunov.horizon_count) << "\n";
    }
  }
  return os.str();
}

}  // namespace sdelab
