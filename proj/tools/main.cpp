#include "sdelab/config.hpp"
#include "sdelab/csv.hpp"
#include "sdelab/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{
      "sdelab: localized simulation, Zvonkin transforms and estimate checks for SDEs with "
      "discontinuous unbounded drift"};
  app.require_subcommand(0, 1);

  std::string config_path, out_override;
  long long seed_override = -1;
  int threads_override = 0;
  bool bit_exact = false;
  app.add_option("--config", config_path, "TOML scenario configuration");
  app.add_option("--seed", seed_override, "override the master seed");
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--threads", threads_override, "worker threads for path generation");
  app.add_flag("--bit-exact", bit_exact, "force fixed-order accumulation (single worker)");

  std::vector<std::string> block_names = {"simulate", "pde",       "zvonkin",
                                          "krylov",   "stability", "lyapunov"};
  for (const auto& name : block_names) {
    app.add_subcommand(name, "run only the [" + name + "] block of the config");
  }
  auto* report_cmd = app.add_subcommand("report", "verify manifest checksums in --out");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report_cmd->parsed()) {
      std::string dir = out_override.empty() ? "out" : out_override;
      std::string msg;
      const bool ok = sdelab::verify_manifest(dir, &msg);
      std::printf("%s\n", msg.c_str());
      return ok ? 0 : 1;
    }

    if (config_path.empty()) {
      std::fprintf(stderr, "error: --config is required\n");
      return 2;
    }
    const std::string raw = sdelab::read_text_file(config_path);
    sdelab::ScenarioConfig cfg = sdelab::parse_config_text(raw);
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (threads_override > 0) cfg.threads = threads_override;
    if (bit_exact) {
      cfg.bit_exact = true;
      cfg.threads = 1;
    }

    std::vector<std::string> only;
    for (const auto& name : block_names) {
      if (app.get_subcommand(name)->parsed()) {
        if (!std::count(cfg.block_order.begin(), cfg.block_order.end(), name)) {
          std::fprintf(stderr, "error: config has no [%s] block\n", name.c_str());
          return 2;
        }
        only.push_back(name);
      }
    }

    sdelab::RunManifest manifest = sdelab::run(cfg, raw, only);
    std::printf("wrote %zu files to %s (%.2fs); checks: %s\n", manifest.files.size(),
                cfg.out_dir.c_str(), manifest.wall_clock_seconds,
                manifest.all_checks_ok ? "all ok" : "FAILURES RECORDED");
    for (const auto& f : manifest.check_failures) std::printf("  check failed: %s\n", f.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
