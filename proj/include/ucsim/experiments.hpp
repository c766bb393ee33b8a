#pragma once

#include <string>
#include <vector>

#include "ucsim/config.hpp"

namespace ucsim {

inline constexpr const char* kLibraryVersion = "1.0.0";

// Runs the experiment named by the config and writes its artifacts under
// cfg.output_dir: CSV tables and JSON reports per subcommand, plus a
// manifest.json recording the config hash, library version, seed and wall
// time. Returns the artifact file names relative to the output directory,
// manifest last. CSV and JSON bodies depend only on the config and seed;
// timestamps stay confined to the manifest.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg);

}  // namespace ucsim
