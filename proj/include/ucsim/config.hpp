#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ucsim/gates.hpp"
#include "ucsim/model.hpp"
#include "ucsim/propagate.hpp"
#include "ucsim/pulses.hpp"

namespace ucsim {

// Validated experiment description. Numeric config fields use lab units
// (GHz, MHz, us, ns); the builders convert to rad/ns and ns. The validated
// document is kept verbatim so serialization round-trips exactly.
struct ExperimentConfig {
  SystemModel model;               // levels already resolved from `truncation`
  std::optional<PulseSchedule> schedule;
  std::optional<NoiseSpec> noise;
  MagnusConfig solver;
  std::string experiment;          // empty when no experiment section
  std::string output_dir = "out";
  unsigned seed = 12345;
  nlohmann::ordered_json raw;

  bool operator==(const ExperimentConfig& other) const { return raw == other.raw; }
};

// Parses and validates a config document. Unknown keys, wrong types, missing
// required fields and out-of-range values raise ConfigError naming the
// offending path (e.g. "system.modes[2].frequency_ghz").
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Serializes the validated document (2-space indent, trailing newline).
std::string serialize_config(const ExperimentConfig& cfg);

// Command-line style overrides applied onto the raw document before
// revalidation; values are parsed according to the key.
// Global keys: seed, dt_ns, truncation, output_dir, experiment, threads.
// Experiment keys: mode, initial, after_optimize (flag), scan
// ("start:stop:points" in GHz or "default", applied to both coupler axes).
ExperimentConfig apply_override(const ExperimentConfig& cfg, const std::string& key,
                                const std::string& value);

// FNV-1a hash of the serialized document, hex-encoded; stamped into manifests.
std::string config_hash(const ExperimentConfig& cfg);

// Typed access to the validated experiment section with fallbacks for keys
// that are absent. Paths are relative to "experiment".
double experiment_number(const ExperimentConfig& cfg, const std::string& key,
                         double fallback);
int experiment_int(const ExperimentConfig& cfg, const std::string& key, int fallback);
bool experiment_flag(const ExperimentConfig& cfg, const std::string& key, bool fallback);
std::string experiment_string(const ExperimentConfig& cfg, const std::string& key,
                              const std::string& fallback);
std::vector<double> experiment_numbers(const ExperimentConfig& cfg, const std::string& key,
                                       const std::vector<double>& fallback);
std::vector<int> experiment_ints(const ExperimentConfig& cfg, const std::string& key,
                                 const std::vector<int>& fallback);

// Inclusive linear grid written as {"start": a, "stop": b, "points": n};
// n = 0 denotes an empty sweep, n = 1 collapses onto `start`.
struct GridSpec {
  double start = 0.0;
  double stop = 0.0;
  int points = 0;

  std::vector<double> values() const;
};
std::optional<GridSpec> experiment_grid(const ExperimentConfig& cfg,
                                        const std::string& key);

}  // namespace ucsim
