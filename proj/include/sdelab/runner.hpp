#pragma once

#include "sdelab/config.hpp"

#include <string>
#include <vector>

namespace sdelab {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct ManifestEntry {
  std::string name;
  std::string checksum;
};

struct RunManifest {
  std::string config_hash;
  std::string version = kArtifactVersion;
  std::vector<ManifestEntry> files;
  double wall_clock_seconds = 0;
  bool all_checks_ok = true;            // estimate-check failures land here, not in exit codes
  std::vector<std::string> check_failures;
};

// Executes the declared experiment blocks in order, writes their CSV files
// plus summary.json and manifest.json under cfg.out_dir, and returns the
// manifest. Block errors are rethrown with the block name attached.
RunManifest run(const ScenarioConfig& cfg, const std::string& raw_config_text,
                const std::vector<std::string>& only_blocks = {});

// `report`: recompute checksums against manifest.json and print a rollup.
bool verify_manifest(const std::string& out_dir, std::string* message);

}  // namespace sdelab
