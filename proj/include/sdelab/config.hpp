#pragma once

#include "sdelab/coefficients.hpp"
#include "sdelab/geometry.hpp"
#include "sdelab/lyapunov.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sdelab {

struct SimulateBlock {
  bool present = false;
  long paths = 1000;
  std::vector<double> x0{0.0};
  int record_stride = 1;
  bool write_trajectories = false;
  std::vector<double> r_schedule;  // nonempty switches to the globalization run
};

struct PdeBlock {
  bool present = false;
  std::string source = "drift";  // "drift" (component 0) or "constant"
  double constant_value = 1.0;
  int mollify_level = 0;
  std::vector<double> slice_times{0.0};
  std::vector<double> decay_ladder;
  double holder_exponent = 0.5;
};

struct ZvonkinBlock {
  bool present = false;
  long paths = 100;
  std::vector<double> x0{0.0};
  bool compare_direct = true;
  long audit_pairs = 1000;
  int space_nodes = 201;
  double dt_target = 1e-3;
};

struct KrylovBlock {
  bool present = false;
  std::string f = "one";  // "one" or "indicator_above"
  double threshold = 0.0;
  double r = 0.0;
  std::vector<double> s_ladder;
  double delta = 0.0;  // 0 picks the default delta
  long paths = 1000;
  std::vector<double> x0{0.0};
};

struct StabilityBlock {
  bool present = false;
  std::string direction = "drift";  // "drift" or "sigma"
  std::vector<double> eps_ladder{0.01, 0.02, 0.04, 0.08};
  double p0 = 1.0;
  long pairs = 1000;
  std::vector<double> x0{0.0};
};

struct LyapunovBlock {
  bool present = false;
  double C = 0.0;  // 0 uses the measured c_hat
  double region_radius = 5.0;
  long paths = 10000;
  std::vector<double> t_ladder;
  std::vector<double> explosion_R{5.0, 10.0};
  double horizon_count = 1.0;
};

struct ScenarioConfig {
  std::string scenario;  // threshold_ou | piecewise_poly | custom
  uint64_t seed = 0;
  double T = 1.0;
  double dt = 1e-3;
  std::string out_dir = "out";
  int threads = 1;
  bool bit_exact = false;

  std::vector<double> domain_lo{-5.0};
  std::vector<double> domain_hi{5.0};
  int grid_time_nodes = 101;
  std::vector<int> grid_space_nodes{201};

  // coefficient parameters
  std::vector<double> betas, alphas, thetas;
  std::vector<std::vector<double>> coeffs;
  std::string drift_csv, sigma_csv;  // custom scenario tables
  double sigma = 1.0;
  double p = 4.0, q = 4.0;
  double kappa = 0.0;  // 0 = derived from sigma
  double alpha = 1.0;

  std::vector<std::string> block_order;  // declared experiment tables
  SimulateBlock simulate;
  PdeBlock pde;
  ZvonkinBlock zvonkin;
  KrylovBlock krylov;
  StabilityBlock stability;
  LyapunovBlock lyapunov;

  int dim() const { return static_cast<int>(domain_lo.size()); }
  BoundedDomain make_domain() const;
  SpaceTimeGrid make_grid() const;
  CoefficientField make_field() const;
  LyapunovSpec make_lyapunov() const;

  std::string to_toml() const;
};

ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig parse_config(const std::string& path);

}  // namespace sdelab
