#include "ucsim/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ucsim {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config " + (path.empty() ? std::string("(top level)") : path) +
                    ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string element(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : required) known = known || item.key() == k;
    for (const char* k : optional) known = known || item.key() == k;
    if (!known) fail(path, "unknown key '" + item.key() + "'");
  }
  for (const char* k : required)
    if (!j.contains(k)) fail(path, "missing required key '" + std::string(k) + "'");
}

double get_number(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  return v.get<double>();
}

double number_or(const json& j, const std::string& path, const char* key, double fb) {
  return j.contains(key) ? get_number(j, path, key) : fb;
}

long long get_integer(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
  return v.get<long long>();
}

long long integer_or(const json& j, const std::string& path, const char* key,
                     long long fb) {
  return j.contains(key) ? get_integer(j, path, key) : fb;
}

std::string get_string(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_string()) fail(join(path, key), "expected a string");
  return v.get<std::string>();
}

void check_flag(const json& j, const std::string& path, const char* key) {
  if (j.contains(key) && !j.at(key).is_boolean())
    fail(join(path, key), "expected true or false");
}

const json& get_array(const json& j, const std::string& path, const char* key) {
  const json& v = j.at(key);
  if (!v.is_array()) fail(join(path, key), "expected an array");
  return v;
}

void check_grid(const json& j, const std::string& path) {
  check_keys(j, path, {"start", "stop", "points"}, {});
  get_number(j, path, "start");
  get_number(j, path, "stop");
  const long long n = get_integer(j, path, "points");
  if (n < 0) fail(join(path, "points"), "expected a nonnegative count");
}

// ---------------------------------------------------------------------------
// sections

SystemModel parse_system(const json& sys) {
  check_keys(sys, "system", {"modes", "couplings"}, {"truncation"});

  int default_levels = 3;
  std::map<std::string, int> level_override;
  if (sys.contains("truncation")) {
    const json& tr = sys.at("truncation");
    if (!tr.is_object()) fail("system.truncation", "expected an object");
    for (const auto& item : tr.items()) {
      if (!item.value().is_number_integer())
        fail(join("system.truncation", item.key()), "expected an integer");
      const long long d = item.value().get<long long>();
      if (d < 2 || d > 9)
        fail(join("system.truncation", item.key()), "levels must be in [2, 9]");
      if (item.key() == "default")
        default_levels = static_cast<int>(d);
      else
        level_override[item.key()] = static_cast<int>(d);
    }
  }

  SystemModel m;
  const json& modes = get_array(sys, "system", "modes");
  if (modes.empty()) fail("system.modes", "expected at least one mode");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string path = element("system.modes", i);
    check_keys(modes[i], path, {"label", "frequency_ghz", "anharmonicity_mhz"}, {});
    Mode mode;
    mode.label = get_string(modes[i], path, "label");
    if (mode.label.empty()) fail(join(path, "label"), "expected a nonempty label");
    if (!seen.insert(mode.label).second)
      fail(join(path, "label"), "duplicate mode label '" + mode.label + "'");
    const double f = get_number(modes[i], path, "frequency_ghz");
    if (f <= 0.0) fail(join(path, "frequency_ghz"), "expected a positive frequency");
    mode.omega = ghz_to_radns(f);
    mode.alpha = mhz_to_radns(get_number(modes[i], path, "anharmonicity_mhz"));
    auto it = level_override.find(mode.label);
    mode.levels = it == level_override.end() ? default_levels : it->second;
    m.modes.push_back(std::move(mode));
  }
  for (const auto& [label, d] : level_override) {
    (void)d;
    if (!seen.count(label))
      fail(join("system.truncation", label), "no mode with this label");
  }

  const json& couplings = get_array(sys, "system", "couplings");
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    const std::string path = element("system.couplings", i);
    check_keys(couplings[i], path, {"a", "b", "beta"}, {});
    Coupling cp;
    const std::string a = get_string(couplings[i], path, "a");
    const std::string b = get_string(couplings[i], path, "b");
    cp.a = m.index_of(a);
    cp.b = m.index_of(b);
    if (cp.a < 0) fail(join(path, "a"), "unknown mode '" + a + "'");
    if (cp.b < 0) fail(join(path, "b"), "unknown mode '" + b + "'");
    cp.beta = get_number(couplings[i], path, "beta");
    if (cp.beta == 0.0) fail(join(path, "beta"), "expected a nonzero coupling");
    m.couplings.push_back(cp);
  }
  m.validate();
  return m;
}

PulseSchedule parse_schedule(const json& sched, const SystemModel& m) {
  check_keys(sched, "schedule", {"duration_ns"}, {"flux", "drives"});
  PulseSchedule ps;
  ps.n_modes = m.modes.size();
  ps.duration = get_number(sched, "schedule", "duration_ns");
  if (ps.duration <= 0.0)
    fail("schedule.duration_ns", "expected a positive duration");

  if (sched.contains("flux")) {
    const json& flux = get_array(sched, "schedule", "flux");
    for (std::size_t i = 0; i < flux.size(); ++i) {
      const std::string path = element("schedule.flux", i);
      check_keys(flux[i], path, {"mode", "amplitude_mhz", "sigma_ns", "flat_ns"},
                 {"start_ns"});
      PulseSchedule::FluxEntry e;
      const std::string label = get_string(flux[i], path, "mode");
      e.mode = m.index_of(label);
      if (e.mode < 0) fail(join(path, "mode"), "unknown mode '" + label + "'");
      e.start = number_or(flux[i], path, "start_ns", 0.0);
      e.pulse.amplitude = mhz_to_radns(get_number(flux[i], path, "amplitude_mhz"));
      e.pulse.sigma = get_number(flux[i], path, "sigma_ns");
      e.pulse.tau_c = get_number(flux[i], path, "flat_ns");
      if (e.pulse.sigma <= 0.0) fail(join(path, "sigma_ns"), "expected a positive width");
      if (e.pulse.tau_c < 0.0)
        fail(join(path, "flat_ns"), "expected a nonnegative duration");
      ps.flux.push_back(e);
    }
  }
  if (sched.contains("drives")) {
    const json& drives = get_array(sched, "schedule", "drives");
    for (std::size_t i = 0; i < drives.size(); ++i) {
      const std::string path = element("schedule.drives", i);
      check_keys(drives[i], path,
                 {"mode", "amplitude_mhz", "sigma_ns", "duration_ns", "frequency_ghz"},
                 {"phase_rad", "start_ns"});
      PulseSchedule::DriveEntry e;
      const std::string label = get_string(drives[i], path, "mode");
      e.mode = m.index_of(label);
      if (e.mode < 0) fail(join(path, "mode"), "unknown mode '" + label + "'");
      e.start = number_or(drives[i], path, "start_ns", 0.0);
      e.drive.amplitude = mhz_to_radns(get_number(drives[i], path, "amplitude_mhz"));
      e.drive.sigma = get_number(drives[i], path, "sigma_ns");
      e.drive.duration = get_number(drives[i], path, "duration_ns");
      e.drive.omega_d = ghz_to_radns(get_number(drives[i], path, "frequency_ghz"));
      e.drive.phase = number_or(drives[i], path, "phase_rad", 0.0);
      if (e.drive.sigma <= 0.0)
        fail(join(path, "sigma_ns"), "expected a positive width");
      if (e.drive.duration <= 0.0)
        fail(join(path, "duration_ns"), "expected a positive duration");
      ps.drives.push_back(e);
    }
  }
  ps.validate();
  return ps;
}

NoiseSpec parse_noise(const json& noise, const SystemModel& m) {
  check_keys(noise, "noise", {"t1_us", "t2_star_us"}, {"temperature_k", "per_mode"});
  const double t1 = get_number(noise, "noise", "t1_us");
  const double t2 = get_number(noise, "noise", "t2_star_us");
  if (t1 < 0.0) fail("noise.t1_us", "expected a nonnegative time");
  if (t2 < 0.0) fail("noise.t2_star_us", "expected a nonnegative time");
  NoiseSpec spec = NoiseSpec::uniform(m, 1e3 * t1, 1e3 * t2);

  if (noise.contains("per_mode")) {
    const json& per = get_array(noise, "noise", "per_mode");
    for (std::size_t i = 0; i < per.size(); ++i) {
      const std::string path = element("noise.per_mode", i);
      check_keys(per[i], path, {"mode", "t1_us", "t2_star_us"}, {});
      const std::string label = get_string(per[i], path, "mode");
      const int idx = m.index_of(label);
      if (idx < 0) fail(join(path, "mode"), "unknown mode '" + label + "'");
      const double mt1 = get_number(per[i], path, "t1_us");
      const double mt2 = get_number(per[i], path, "t2_star_us");
      if (mt1 < 0.0) fail(join(path, "t1_us"), "expected a nonnegative time");
      if (mt2 < 0.0) fail(join(path, "t2_star_us"), "expected a nonnegative time");
      spec.entries[static_cast<std::size_t>(idx)].t1 = 1e3 * mt1;
      spec.entries[static_cast<std::size_t>(idx)].t2_star = 1e3 * mt2;
    }
  }
  const double kelvin = number_or(noise, "noise", "temperature_k", 0.0);
  if (kelvin < 0.0) fail("noise.temperature_k", "expected a nonnegative temperature");
  if (kelvin > 0.0) spec.set_temperature(m, kelvin);
  return spec;
}

MagnusConfig parse_solver(const json& solver) {
  check_keys(solver, "solver", {}, {"dt_ns", "krylov_dim", "krylov_tol"});
  MagnusConfig cfg;
  cfg.dt = number_or(solver, "solver", "dt_ns", cfg.dt);
  if (cfg.dt <= 0.0) fail("solver.dt_ns", "expected a positive step");
  const long long kd = integer_or(solver, "solver", "krylov_dim", cfg.krylov_dim);
  if (kd < 2 || kd > 40) fail("solver.krylov_dim", "expected a dimension in [2, 40]");
  cfg.krylov_dim = static_cast<int>(kd);
  cfg.krylov_tol = number_or(solver, "solver", "krylov_tol", cfg.krylov_tol);
  if (cfg.krylov_tol <= 0.0) fail("solver.krylov_tol", "expected a positive tolerance");
  return cfg;
}

struct ExperimentSchema {
  std::vector<const char*> keys;  // all optional besides "name"
};

const std::map<std::string, ExperimentSchema>& experiment_schemas() {
  static const std::map<std::string, ExperimentSchema> schemas = {
      {"calibrate", {{"scan_a_ghz", "scan_b_ghz"}}},
      {"analytics", {{"tau_ns", "sigma_q_ns", "sigma_c_ns"}}},
      {"cz-optimize",
       {{"tau_ns", "sigma_q_ns", "sigma_c_ns", "vary_sigma_c", "max_evals",
         "search_dt_ns", "final_dt_ns", "sample_points", "qubit_a", "qubit_b"}}},
      {"cz-run",
       {{"after_optimize", "initial", "tau_ns", "sigma_q_ns", "sigma_c_ns",
         "a_q1_mhz", "a_q2_mhz", "a_c1_mhz", "a_c2_mhz", "sample_points", "qubit_a",
         "qubit_b", "max_evals", "search_dt_ns", "final_dt_ns", "vary_sigma_c"}}},
      {"sqg-scan", {{"scan_ghz", "mode", "target", "companion", "tau_ns", "sigma_ns"}}},
      {"decoherence", {{"tau_ns", "g2_mhz", "dt_ns", "t1_grid_us", "t2_ratio"}}},
      {"spectators",
       {{"qubit_counts", "sigma_c_grid_ns", "tau_ns", "sigma_q_ns", "max_evals"}}},
      {"ipr", {{}}},
      {"occupations", {{}}},
      {"dump-pulse", {{"dt_ns"}}},
  };
  return schemas;
}

void parse_experiment(const json& expt, const SystemModel& m) {
  if (!expt.is_object()) fail("experiment", "expected an object");
  if (!expt.contains("name")) fail("experiment", "missing required key 'name'");
  const std::string name = get_string(expt, "experiment", "name");
  const auto& schemas = experiment_schemas();
  auto it = schemas.find(name);
  if (it == schemas.end()) {
    std::string known;
    for (const auto& [n, s] : schemas) {
      (void)s;
      known += known.empty() ? n : ", " + n;
    }
    fail("experiment.name", "unknown experiment '" + name + "' (one of: " + known + ")");
  }
  for (const auto& item : expt.items()) {
    if (item.key() == "name") continue;
    bool known = false;
    for (const char* k : it->second.keys) known = known || item.key() == k;
    if (!known) fail("experiment", "unknown key '" + item.key() + "'");
  }

  // per-experiment value checks beyond key presence
  auto check_positive = [&](const char* key) {
    if (expt.contains(key) && get_number(expt, "experiment", key) <= 0.0)
      fail(join("experiment", key), "expected a positive value");
  };
  auto check_mode_label = [&](const char* key) {
    if (!expt.contains(key)) return;
    const std::string label = get_string(expt, "experiment", key);
    if (m.index_of(label) < 0)
      fail(join("experiment", key), "unknown mode '" + label + "'");
  };
  check_positive("tau_ns");
  check_positive("sigma_q_ns");
  check_positive("sigma_c_ns");
  check_positive("sigma_ns");
  check_positive("search_dt_ns");
  check_positive("final_dt_ns");
  check_positive("dt_ns");
  check_positive("g2_mhz");
  check_positive("t2_ratio");
  if (expt.contains("t1_grid_us")) {
    check_grid(expt.at("t1_grid_us"), "experiment.t1_grid_us");
    if (expt.at("t1_grid_us").at("start").get<double>() <= 0.0)
      fail("experiment.t1_grid_us.start", "expected a positive time");
  }
  check_mode_label("qubit_a");
  check_mode_label("qubit_b");
  check_mode_label("target");
  check_mode_label("companion");
  check_flag(expt, "experiment", "after_optimize");
  check_flag(expt, "experiment", "vary_sigma_c");
  for (const char* key : {"max_evals", "sample_points"})
    if (expt.contains(key) && get_integer(expt, "experiment", key) < 0)
      fail(join("experiment", key), "expected a nonnegative count");

  if (name == "calibrate") {
    for (const char* key : {"scan_a_ghz", "scan_b_ghz"})
      if (expt.contains(key)) check_grid(expt.at(key), join("experiment", key));
  }
  if (name == "sqg-scan") {
    if (expt.contains("scan_ghz")) check_grid(expt.at("scan_ghz"), "experiment.scan_ghz");
    if (expt.contains("mode")) {
      const std::string mode = get_string(expt, "experiment", "mode");
      if (mode != "plain" && mode != "parallel-q2" && mode != "drive-center" &&
          mode != "excited-center")
        fail("experiment.mode",
             "expected one of plain, parallel-q2, drive-center, excited-center");
    }
  }
  if (name == "cz-run" && expt.contains("initial")) {
    const std::string init = get_string(expt, "experiment", "initial");
    if (init != "probe" && init != "00" && init != "01" && init != "10" && init != "11")
      fail("experiment.initial", "expected one of probe, 00, 01, 10, 11");
  }
  if (name == "spectators") {
    if (expt.contains("qubit_counts")) {
      const json& counts = get_array(expt, "experiment", "qubit_counts");
      for (std::size_t i = 0; i < counts.size(); ++i) {
        if (!counts[i].is_number_integer() || counts[i].get<long long>() < 1 ||
            counts[i].get<long long>() > 6)
          fail(element("experiment.qubit_counts", i), "expected an integer in [1, 6]");
      }
    }
    if (expt.contains("sigma_c_grid_ns")) {
      const json& grid = get_array(expt, "experiment", "sigma_c_grid_ns");
      for (std::size_t i = 0; i < grid.size(); ++i)
        if (!grid[i].is_number() || grid[i].get<double>() <= 0.0)
          fail(element("experiment.sigma_c_grid_ns", i), "expected a positive width");
    }
  }
}

ExperimentConfig parse_document(json doc) {
  ExperimentConfig cfg;
  check_keys(doc, "",
             {"system"},
             {"schedule", "noise", "solver", "experiment", "output_dir", "seed",
              "threads"});
  cfg.model = parse_system(doc.at("system"));
  if (doc.contains("schedule"))
    cfg.schedule = parse_schedule(doc.at("schedule"), cfg.model);
  if (doc.contains("noise")) cfg.noise = parse_noise(doc.at("noise"), cfg.model);
  if (doc.contains("solver")) cfg.solver = parse_solver(doc.at("solver"));
  if (doc.contains("experiment")) {
    parse_experiment(doc.at("experiment"), cfg.model);
    cfg.experiment = doc.at("experiment").at("name").get<std::string>();
  }
  if (doc.contains("output_dir")) {
    if (!doc.at("output_dir").is_string() ||
        doc.at("output_dir").get<std::string>().empty())
      fail("output_dir", "expected a nonempty string");
    cfg.output_dir = doc.at("output_dir").get<std::string>();
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0)
      fail("seed", "expected a nonnegative integer");
    cfg.seed = static_cast<unsigned>(doc.at("seed").get<long long>());
  }
  if (doc.contains("threads")) {
    if (!doc.at("threads").is_number_integer() || doc.at("threads").get<long long>() < 1)
      fail("threads", "expected a positive integer");
  }
  cfg.raw = std::move(doc);
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_document(std::move(doc));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  return cfg.raw.dump(2) + "\n";
}

ExperimentConfig apply_override(const ExperimentConfig& cfg, const std::string& key,
                                const std::string& value) {
  json doc = cfg.raw;
  const auto as_number = [&]() {
    try {
      std::size_t pos = 0;
      const double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("override " + key + ": '" + value + "' is not a number");
    }
  };
  const auto as_integer = [&]() {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("override " + key + ": '" + value + "' is not an integer");
    }
  };
  if (key == "seed") {
    doc["seed"] = as_integer();
  } else if (key == "dt_ns") {
    doc["solver"]["dt_ns"] = as_number();
  } else if (key == "truncation") {
    doc["system"]["truncation"]["default"] = as_integer();
  } else if (key == "output_dir") {
    doc["output_dir"] = value;
  } else if (key == "experiment") {
    doc["experiment"]["name"] = value;
  } else if (key == "threads") {
    doc["threads"] = as_integer();
  } else if (key == "mode" || key == "initial") {
    doc["experiment"][key] = value;
  } else if (key == "after_optimize") {
    if (value == "1" || value == "true")
      doc["experiment"]["after_optimize"] = true;
    else if (value == "0" || value == "false")
      doc["experiment"]["after_optimize"] = false;
    else
      throw ConfigError("override after_optimize: '" + value + "' is not a flag");
  } else if (key == "scan") {
    // "start:stop:points" in GHz, applied to both coupler axes
    double start = 3.55, stop = 3.75;
    long long points = 41;
    if (value != "default") {
      const auto c1 = value.find(':');
      const auto c2 = value.rfind(':');
      try {
        if (c1 == std::string::npos || c2 == c1) throw std::invalid_argument(value);
        start = std::stod(value.substr(0, c1));
        stop = std::stod(value.substr(c1 + 1, c2 - c1 - 1));
        points = std::stoll(value.substr(c2 + 1));
      } catch (const std::exception&) {
        throw ConfigError("override scan: expected start:stop:points, got '" + value +
                          "'");
      }
    }
    const json grid = {{"start", start}, {"stop", stop}, {"points", points}};
    doc["experiment"]["scan_a_ghz"] = grid;
    doc["experiment"]["scan_b_ghz"] = grid;
  } else {
    throw ConfigError("override " + key + ": unsupported key");
  }
  return parse_document(std::move(doc));
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace {

const json* experiment_value(const ExperimentConfig& cfg, const std::string& key) {
  if (!cfg.raw.contains("experiment")) return nullptr;
  const json& expt = cfg.raw.at("experiment");
  auto it = expt.find(key);
  return it == expt.end() ? nullptr : &*it;
}

}  // namespace

double experiment_number(const ExperimentConfig& cfg, const std::string& key,
                         double fallback) {
  const json* v = experiment_value(cfg, key);
  return v ? v->get<double>() : fallback;
}

int experiment_int(const ExperimentConfig& cfg, const std::string& key, int fallback) {
  const json* v = experiment_value(cfg, key);
  return v ? static_cast<int>(v->get<long long>()) : fallback;
}

bool experiment_flag(const ExperimentConfig& cfg, const std::string& key, bool fallback) {
  const json* v = experiment_value(cfg, key);
  return v ? v->get<bool>() : fallback;
}

std::string experiment_string(const ExperimentConfig& cfg, const std::string& key,
                              const std::string& fallback) {
  const json* v = experiment_value(cfg, key);
  return v ? v->get<std::string>() : fallback;
}

std::vector<double> experiment_numbers(const ExperimentConfig& cfg, const std::string& key,
                                       const std::vector<double>& fallback) {
  const json* v = experiment_value(cfg, key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : *v) out.push_back(item.get<double>());
  return out;
}

std::vector<int> experiment_ints(const ExperimentConfig& cfg, const std::string& key,
                                 const std::vector<int>& fallback) {
  const json* v = experiment_value(cfg, key);
  if (!v) return fallback;
  std::vector<int> out;
  for (const auto& item : *v) out.push_back(static_cast<int>(item.get<long long>()));
  return out;
}

std::vector<double> GridSpec::values() const {
  std::vector<double> out;
  if (points <= 0) return out;
  if (points == 1) return {start};
  out.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    out.push_back(start + (stop - start) * static_cast<double>(i) / (points - 1));
  return out;
}

std::optional<GridSpec> experiment_grid(const ExperimentConfig& cfg,
                                        const std::string& key) {
  const json* v = experiment_value(cfg, key);
  if (!v) return std::nullopt;
  GridSpec g;
  g.start = v->at("start").get<double>();
  g.stop = v->at("stop").get<double>();
  g.points = static_cast<int>(v->at("points").get<long long>());
  return g;
}

}  // namespace ucsim
