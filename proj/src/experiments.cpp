#include "ucsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "ucsim/analysis.hpp"
#include "ucsim/calibrate.hpp"
#include "ucsim/effective.hpp"
#include "ucsim/gates.hpp"
#include "ucsim/pulses.hpp"

namespace ucsim {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string label_string(const std::vector<int>& occ) {
  std::string s;
  for (int n : occ) s += static_cast<char>('0' + n);
  return s;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write artifact '" + path.string() + "'");
  out << content;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream body;
  for (std::size_t i = 0; i < header.size(); ++i)
    body << (i ? "," : "") << header[i];
  body << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) body << (i ? "," : "") << row[i];
    body << "\n";
  }
  write_text(path, body.str());
}

void write_json(const fs::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

int thread_count(const ExperimentConfig& cfg) {
  return cfg.raw.contains("threads") ? cfg.raw.at("threads").get<int>() : 1;
}

// Worker pool over [0, n); results must be written to per-index slots so the
// collected output does not depend on scheduling.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

LabeledSpectrum labeled_cell(const SystemModel& m, int max_total) {
  const FockSpace s = fock_space(m);
  EigensolveOptions eo;
  eo.dense_cap = 16384;
  if (s.dim > eo.dense_cap)
    throw ConfigError(
        "state space of " + std::to_string(s.dim) +
        " exceeds the dense eigensolve budget; lower the truncation");
  const Spectrum sp = eigensolve(assemble_hamiltonian_real(m, s, m.idle_frequencies()), eo);
  return label_eigenstates(sp, s, max_total);
}

PulseSchedule static_window(const SystemModel& m, double duration) {
  PulseSchedule ps;
  ps.duration = duration;
  ps.n_modes = m.modes.size();
  return ps;
}

json leakage_json(const LeakageReport& leak) {
  json out;
  out["max_qubit_delta"] = leak.max_qubit_delta;
  out["max_coupler_delta"] = leak.max_coupler_delta;
  out["center_residual"] = leak.center_residual;
  return out;
}

// t_ns, per-mode occupations, per-tracked-state populations; plus the
// conditional-phase trace in a companion file.
void write_gate_series(const fs::path& dir, const std::string& prefix,
                       const SystemModel& m, const GateResult& gate,
                       std::vector<std::string>& artifacts) {
  std::vector<std::string> header = {"t_ns"};
  for (const auto& mode : m.modes) header.push_back("occ_" + mode.label);
  for (const auto& lab : gate.tracked_labels) header.push_back("p_" + label_string(lab));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < gate.times.size(); ++i) {
    std::vector<std::string> row = {num(gate.times[i])};
    for (Eigen::Index l = 0; l < gate.populations.rows(); ++l)
      row.push_back(num(gate.populations(l, static_cast<Eigen::Index>(i))));
    for (Eigen::Index t = 0; t < gate.tracked_populations.rows(); ++t)
      row.push_back(num(gate.tracked_populations(t, static_cast<Eigen::Index>(i))));
    rows.push_back(std::move(row));
  }
  write_csv(dir / (prefix + "_populations.csv"), header, rows);
  artifacts.push_back(prefix + "_populations.csv");

  std::vector<std::vector<std::string>> phase;
  for (std::size_t i = 0; i < gate.times.size(); ++i)
    phase.push_back({num(gate.times[i]), num(gate.phi_cp_trace[i])});
  write_csv(dir / (prefix + "_phase.csv"), {"t_ns", "phi_cp_rad"}, phase);
  artifacts.push_back(prefix + "_phase.csv");
}

double khz(double radns) { return radns / two_pi * 1e6; }
double mhz(double radns) { return radns / two_pi * 1e3; }
double ghz(double radns) { return radns / two_pi; }

// ---------------------------------------------------------------------------
// calibrate

void run_calibrate(const ExperimentConfig& cfg, const fs::path& dir,
                   std::vector<std::string>& artifacts) {
  const IdleResult idle = find_idle_configuration(cfg.model);

  json rep;
  json omegas = json::object();
  for (const auto& [label, omega] : idle.coupler_omega) omegas[label] = ghz(omega);
  rep["coupler_omega_ghz"] = omegas;
  auto pairs_json = [](const ZzReport& zz) {
    json arr = json::array();
    for (const auto& p : zz.pairs)
      arr.push_back({{"a", p.a}, {"b", p.b}, {"zeta_khz", khz(p.zeta)}});
    return arr;
  };
  rep["reduced"] = pairs_json(idle.reduced);
  rep["verification"] = pairs_json(idle.verification);
  rep["max_abs_khz"] = khz(idle.verification.max_abs());
  rep["warnings"] = idle.warnings;
  write_json(dir / "idle.json", rep);
  artifacts.push_back("idle.json");

  std::vector<std::vector<std::string>> rows;
  for (const auto& p : idle.verification.pairs)
    rows.push_back({p.a, p.b, num(khz(p.zeta)), num(std::abs(khz(p.zeta)))});
  write_csv(dir / "zz_report.csv", {"pair_a", "pair_b", "zeta_khz", "abs_zeta_khz"},
            rows);
  artifacts.push_back("zz_report.csv");

  const auto ga = experiment_grid(cfg, "scan_a_ghz");
  const auto gb = experiment_grid(cfg, "scan_b_ghz");
  if (ga && gb) {
    std::vector<double> wc1, wc2;
    for (double f : ga->values()) wc1.push_back(two_pi * f);
    for (double f : gb->values()) wc2.push_back(two_pi * f);
    const std::vector<ZzScanPoint> scan = zz_landscape(cfg.model, wc1, wc2);
    std::vector<std::vector<std::string>> srows;
    for (const auto& p : scan)
      srows.push_back({num(ghz(p.wc1)), num(ghz(p.wc2)), num(khz(p.zq1c)),
                       num(khz(p.zq2c)), num(khz(p.zq1q2))});
    write_csv(dir / "zz_scan.csv",
              {"wc1_ghz", "wc2_ghz", "zeta_q1c_khz", "zeta_q2c_khz", "zeta_q1q2_khz"},
              srows);
    artifacts.push_back("zz_scan.csv");
  }
}

// ---------------------------------------------------------------------------
// analytics

void run_analytics(const ExperimentConfig& cfg, const fs::path& dir,
                   std::vector<std::string>& artifacts) {
  const SystemModel& m = cfg.model;
  const double tau = experiment_number(cfg, "tau_ns", 60.0);
  const double sigma_q = experiment_number(cfg, "sigma_q_ns", 1.0);
  const double sigma_c = experiment_number(cfg, "sigma_c_ns", 3.0);
  const CzParameters seed = seed_cz_parameters(m, tau, sigma_q, sigma_c);

  std::vector<double> omega = m.idle_frequencies();
  omega[static_cast<std::size_t>(m.require("q1"))] += seed.a_q1;
  omega[static_cast<std::size_t>(m.require("q2"))] += seed.a_q2;
  omega[static_cast<std::size_t>(m.require("c1"))] += seed.a_c1;
  omega[static_cast<std::size_t>(m.require("c2"))] += seed.a_c2;

  const EffectiveModel eff = schrieffer_wolff(m, omega);
  const ManifoldModel mm = manifold_hamiltonians(eff);
  const ResonanceCheck rc = resonance_ratio_check(eff.g_cq1, eff.g_cq2);
  const DurationComparison dc = duration_comparison(std::abs(eff.g_cq1));

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es1(mm.h1), es2(mm.h2);

  json rep;
  rep["seed"] = {{"tau_ns", tau},
                 {"sigma_q_ns", sigma_q},
                 {"sigma_c_ns", seed.sigma_c},
                 {"a_q1_mhz", mhz(seed.a_q1)},
                 {"a_q2_mhz", mhz(seed.a_q2)},
                 {"a_c1_mhz", mhz(seed.a_c1)},
                 {"a_c2_mhz", mhz(seed.a_c2)}};
  rep["effective"] = {{"omega_q1_ghz", ghz(eff.omega_q1)},
                      {"omega_q2_ghz", ghz(eff.omega_q2)},
                      {"omega_c_ghz", ghz(eff.omega_c)},
                      {"omega_c1_ghz", ghz(eff.omega_c1)},
                      {"omega_c2_ghz", ghz(eff.omega_c2)},
                      {"g_cq1_mhz", mhz(eff.g_cq1)},
                      {"g_cq2_mhz", mhz(eff.g_cq2)},
                      {"g_c1c2_mhz", mhz(eff.g_c1c2)}};
  json h1 = json::array(), h2 = json::array();
  for (int i = 0; i < 3; ++i) h1.push_back(ghz(es1.eigenvalues()(i)));
  for (int i = 0; i < 3; ++i) h2.push_back(ghz(es2.eigenvalues()(i)));
  rep["manifolds"] = {{"single_excitation_ghz", h1},
                      {"double_excitation_ghz", h2},
                      {"omega_rabi_mhz", mhz(mm.omega_rabi)},
                      {"two_g2_mhz", mhz(2.0 * std::abs(eff.g_cq2))},
                      {"rabi_over_two_g2_minus_1",
                       mm.omega_rabi / (2.0 * std::abs(eff.g_cq2)) - 1.0},
                      {"coupling_ratio_deviation", rc.deviation}};
  rep["durations"] = {{"simultaneous_ns", dc.tau_new},
                      {"move_cz_move_ns", dc.tau_mcm},
                      {"ratio", dc.ratio},
                      {"ratio_closed_form", (std::sqrt(2.0) + 1.0) / std::sqrt(3.0)}};
  write_json(dir / "analytics.json", rep);
  artifacts.push_back("analytics.json");
}

// ---------------------------------------------------------------------------
// cz-optimize / cz-run

CzOptimizeOptions cz_options(const ExperimentConfig& cfg) {
  CzOptimizeOptions opts;
  opts.tau = experiment_number(cfg, "tau_ns", 60.0);
  opts.sigma_q = experiment_number(cfg, "sigma_q_ns", 1.0);
  opts.seed_sigma_c = experiment_number(cfg, "sigma_c_ns", 3.0);
  opts.vary_sigma_c = experiment_flag(cfg, "vary_sigma_c", true);
  opts.search_solver.dt = experiment_number(cfg, "search_dt_ns", 0.04);
  opts.final_solver.dt = experiment_number(cfg, "final_dt_ns", cfg.solver.dt);
  opts.final_solver.krylov_dim = cfg.solver.krylov_dim;
  opts.final_solver.krylov_tol = cfg.solver.krylov_tol;
  opts.nm.max_evals = experiment_int(cfg, "max_evals", 400);
  opts.nm.seed = cfg.seed;
  opts.final_sample_points = experiment_int(cfg, "sample_points", 240);
  opts.qubit_a = experiment_string(cfg, "qubit_a", "q1");
  opts.qubit_b = experiment_string(cfg, "qubit_b", "q2");
  return opts;
}

json cz_parameters_json(const CzParameters& p) {
  return {{"a_q1_mhz", mhz(p.a_q1)},
          {"a_q2_mhz", mhz(p.a_q2)},
          {"a_c1_mhz", mhz(p.a_c1)},
          {"a_c2_mhz", mhz(p.a_c2)},
          {"sigma_c_ns", p.sigma_c}};
}

void run_cz_optimize(const ExperimentConfig& cfg, const fs::path& dir,
                     std::vector<std::string>& artifacts) {
  const CzOptimizeOptions opts = cz_options(cfg);
  const LabeledSpectrum ls = labeled_cell(cfg.model, 4);
  const CzOptimizeResult r = optimize_cz(cfg.model, ls, opts);

  json rep;
  rep["tau_ns"] = opts.tau;
  rep["sigma_q_ns"] = opts.sigma_q;
  rep["parameters"] = cz_parameters_json(r.params);
  rep["infidelity"] = r.infidelity;
  rep["search_infidelity"] = r.search_infidelity;
  rep["seed_infidelity"] = r.seed_infidelity;
  rep["evaluations"] = r.evaluations;
  rep["fidelity"] = r.gate.fidelity;
  rep["phi_cp_rad"] = r.gate.phi_cp;
  rep["trace_2q"] = r.gate.trace_2q;
  rep["leakage"] = leakage_json(r.gate.leakage);
  write_json(dir / "optimum.json", rep);
  artifacts.push_back("optimum.json");

  std::vector<std::vector<std::string>> conv;
  for (const auto& [eval, best] : r.trace)
    conv.push_back({std::to_string(eval), num(best)});
  write_csv(dir / "cz_convergence.csv", {"evaluation", "best_infidelity"}, conv);
  artifacts.push_back("cz_convergence.csv");

  write_gate_series(dir, "cz", cfg.model, r.gate, artifacts);
}

void run_cz_run(const ExperimentConfig& cfg, const fs::path& dir,
                std::vector<std::string>& artifacts) {
  const SystemModel& m = cfg.model;
  const CzOptimizeOptions opts = cz_options(cfg);
  const LabeledSpectrum ls = labeled_cell(m, 4);

  CzParameters params;
  if (experiment_flag(cfg, "after_optimize", false)) {
    params = optimize_cz(m, ls, opts).params;
  } else {
    params = seed_cz_parameters(m, opts.tau, opts.sigma_q, opts.seed_sigma_c,
                                opts.qubit_a, opts.qubit_b);
    params.sigma_c = experiment_number(cfg, "sigma_c_ns", params.sigma_c);
    if (cfg.raw.at("experiment").contains("a_q1_mhz"))
      params.a_q1 = mhz_to_radns(experiment_number(cfg, "a_q1_mhz", 0.0));
    if (cfg.raw.at("experiment").contains("a_q2_mhz"))
      params.a_q2 = mhz_to_radns(experiment_number(cfg, "a_q2_mhz", 0.0));
    if (cfg.raw.at("experiment").contains("a_c1_mhz"))
      params.a_c1 = mhz_to_radns(experiment_number(cfg, "a_c1_mhz", 0.0));
    if (cfg.raw.at("experiment").contains("a_c2_mhz"))
      params.a_c2 = mhz_to_radns(experiment_number(cfg, "a_c2_mhz", 0.0));
  }

  const PulseSchedule schedule =
      schedule_cz(m, opts.tau, opts.sigma_q, params.sigma_c,
                  {params.a_q1, params.a_q2, params.a_c1, params.a_c2});

  const std::string initial = experiment_string(cfg, "initial", "probe");
  Eigen::Vector4cd amplitudes = Eigen::Vector4cd::Zero();
  if (initial == "probe")
    amplitudes = cz_probe_state();
  else
    amplitudes(2 * (initial[0] - '0') + (initial[1] - '0')) = cd(1.0, 0.0);

  CzRunOptions ro;
  ro.solver = opts.final_solver;
  ro.sample_points = opts.final_sample_points;
  ro.qubit_a = opts.qubit_a;
  ro.qubit_b = opts.qubit_b;
  const GateResult res = run_cz(m, ls, schedule, amplitudes, ro);

  json rep;
  rep["initial"] = initial;
  rep["tau_ns"] = opts.tau;
  rep["sigma_q_ns"] = opts.sigma_q;
  rep["parameters"] = cz_parameters_json(params);
  rep["fidelity"] = res.fidelity;
  rep["infidelity"] = 1.0 - res.fidelity;
  rep["phi_cp_rad"] = res.phi_cp;
  rep["phi_01_rad"] = res.phi_01;
  rep["phi_10_rad"] = res.phi_10;
  rep["trace_2q"] = res.trace_2q;
  rep["leakage"] = leakage_json(res.leakage);
  write_json(dir / "cz_run.json", rep);
  artifacts.push_back("cz_run.json");

  write_gate_series(dir, "cz", m, res, artifacts);
}

// ---------------------------------------------------------------------------
// sqg-scan

void run_sqg_scan(const ExperimentConfig& cfg, const fs::path& dir,
                  std::vector<std::string>& artifacts) {
  const SystemModel& m = cfg.model;
  const GridSpec grid =
      experiment_grid(cfg, "scan_ghz").value_or(GridSpec{4.80, 5.04, 25});
  const std::string variant = experiment_string(cfg, "mode", "plain");
  const std::string target = experiment_string(cfg, "target", "q1");
  const double tau = experiment_number(cfg, "tau_ns", 20.0);
  const double sigma = experiment_number(cfg, "sigma_ns", 4.0);
  const bool solver_given =
      cfg.raw.contains("solver") && cfg.raw.at("solver").contains("dt_ns");
  const double dt = solver_given ? cfg.solver.dt : 0.01;

  std::string companion = experiment_string(cfg, "companion", "");
  if (companion.empty()) {
    if (variant == "parallel-q2") companion = "q2";
    if (variant == "drive-center") companion = "c";
  }

  // The companion gate is calibrated once at the nominal idle frequencies and
  // then held fixed while the target qubit is swept past it.
  std::vector<DriveSpec> background;
  if (!companion.empty()) {
    SqgOptimizeOptions so;
    so.target = companion;
    so.drive.mode = companion;
    so.drive.tau = tau;
    so.drive.sigma = sigma;
    so.solver.dt = dt;
    const SqgOptimizeResult r = optimize_single_qubit(m, labeled_cell(m, 2), so);
    DriveSpec d;
    d.mode = companion;
    d.amplitude = r.amplitude;
    d.omega_d = r.omega_d;
    d.tau = tau;
    d.sigma = sigma;
    background.push_back(d);
  }

  const std::vector<double> freqs = grid.values();
  const int target_idx = m.require(target);
  const int center_idx = m.require("c");

  struct Point {
    double infidelity = 0.0;
    double omega_d = 0.0;
    double amplitude = 0.0;
    int evaluations = 0;
    bool optimized = true;
  };
  std::vector<Point> points(freqs.size());

  parallel_for(freqs.size(), thread_count(cfg), [&](std::size_t i) {
    SystemModel mp = m;
    mp.modes[static_cast<std::size_t>(target_idx)].omega = two_pi * freqs[i];
    const LabeledSpectrum ls = labeled_cell(mp, 2);

    std::vector<int> excited(m.modes.size(), 0);
    excited[static_cast<std::size_t>(center_idx)] = 1;
    const bool from_excited_center = variant == "excited-center";

    SqgOptimizeOptions so;
    so.target = target;
    so.drive.mode = target;
    so.drive.tau = tau;
    so.drive.sigma = sigma;
    so.background = background;
    so.solver.dt = dt;
    if (from_excited_center) so.initial = ls.state(excited);

    Point& p = points[i];
    try {
      const SqgOptimizeResult r = optimize_single_qubit(mp, ls, so);
      p.infidelity = r.infidelity;
      p.omega_d = r.omega_d;
      p.amplitude = r.amplitude;
      p.evaluations = r.evaluations;
    } catch (const NumericsError&) {
      // bracket collapse near a collision: fall back to the seeded pulse
      std::vector<int> excited_target(m.modes.size(), 0);
      excited_target[static_cast<std::size_t>(target_idx)] = 1;
      DriveSpec d;
      d.mode = target;
      d.tau = tau;
      d.sigma = sigma;
      d.omega_d =
          ls.energy(excited_target) - ls.energy(std::vector<int>(m.modes.size(), 0));
      d.amplitude = pi / (sigma * std::sqrt(two_pi) *
                          std::erf(tau / (2.0 * std::sqrt(2.0) * sigma)));
      std::vector<DriveSpec> drives = background;
      drives.push_back(d);
      MagnusConfig solver;
      solver.dt = dt;
      VectorXcd initial;
      if (from_excited_center) initial = ls.state(excited);
      const SingleQubitResult r =
          run_single_qubit(mp, ls, target, drives, pi, 0.0, initial, solver);
      p.infidelity = 1.0 - r.fidelity;
      p.omega_d = d.omega_d;
      p.amplitude = d.amplitude;
      p.optimized = false;
    }
  });

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < freqs.size(); ++i)
    rows.push_back({num(freqs[i]), num(points[i].infidelity),
                    num(ghz(points[i].omega_d)), num(mhz(points[i].amplitude)),
                    std::to_string(points[i].evaluations),
                    points[i].optimized ? "ok" : "seed"});
  write_csv(dir / "sqg_scan.csv",
            {"omega_ghz", "infidelity", "drive_ghz", "amplitude_mhz", "evaluations",
             "status"},
            rows);
  artifacts.push_back("sqg_scan.csv");

  json rep;
  rep["variant"] = variant;
  rep["target"] = target;
  rep["companion"] = companion;
  rep["tau_ns"] = tau;
  rep["sigma_ns"] = sigma;
  rep["points"] = freqs.size();
  if (!freqs.empty()) {
    double lo = points[0].infidelity, hi = points[0].infidelity;
    for (const auto& p : points) {
      lo = std::min(lo, p.infidelity);
      hi = std::max(hi, p.infidelity);
    }
    rep["min_infidelity"] = lo;
    rep["max_infidelity"] = hi;
  }
  rep["landmarks_ghz"] = {
      {"center", ghz(m.modes[static_cast<std::size_t>(center_idx)].omega)},
      {"q2", ghz(m.modes[static_cast<std::size_t>(m.require("q2"))].omega)},
      {"two_excitation_collision",
       ghz(m.modes[static_cast<std::size_t>(center_idx)].omega) +
           std::abs(mhz(m.modes[static_cast<std::size_t>(target_idx)].alpha)) * 1e-3}};
  write_json(dir / "sqg_scan.json", rep);
  artifacts.push_back("sqg_scan.json");
}

// ---------------------------------------------------------------------------
// decoherence

void run_decoherence(const ExperimentConfig& cfg, const fs::path& dir,
                     std::vector<std::string>& artifacts) {
  const SystemModel& m = cfg.model;
  double tau = experiment_number(cfg, "tau_ns", 60.0);
  double g2 = pi / tau;
  if (cfg.raw.at("experiment").contains("g2_mhz")) {
    g2 = mhz_to_radns(experiment_number(cfg, "g2_mhz", 0.0));
    tau = pi / g2;
  }
  const auto& mq1 = m.modes[static_cast<std::size_t>(m.require("q1"))];
  const auto& mq2 = m.modes[static_cast<std::size_t>(m.require("q2"))];
  const auto& mc = m.modes[static_cast<std::size_t>(m.require("c"))];
  const EffectiveGateModel egm =
      effective_gate_model(mc.omega, mq1.alpha, mq2.alpha, mc.alpha, g2, mq1.levels);
  const LabeledSpectrum ls = bare_spectrum(egm.model);
  const PulseSchedule window = static_window(egm.model, egm.tau);
  MagnusConfig solver;
  solver.dt = experiment_number(cfg, "dt_ns", 0.05);

  const GridSpec grid =
      experiment_grid(cfg, "t1_grid_us").value_or(GridSpec{5.0, 80.0, 6});
  const double ratio = experiment_number(cfg, "t2_ratio", 2.0);

  std::vector<std::vector<std::string>> rows;
  double floor = 0.0;
  for (double t1_us : grid.values()) {
    const double t1 = 1e3 * t1_us, t2 = ratio * t1;
    const NoiseSpec noise = NoiseSpec::uniform(egm.model, t1, t2);
    const double analytic =
        closed_form_decoherence_infidelity(egm.tau, {t1, t1, t1}, {t2, t2, t2});
    const LindbladStudy study =
        lindblad_decoherence_study(egm.model, ls, window, noise, solver);
    floor = study.coherent_floor;
    rows.push_back({num(t1_us), num(1e-3 * t2), num(analytic),
                    num(1.0 - study.f_bar_noisy), num(analytic + study.coherent_floor),
                    num(study.incoherent), num(study.coherent_floor)});
  }
  write_csv(dir / "decoherence.csv",
            {"t1_us", "t2_star_us", "analytic", "simulated", "analytic_plus_floor",
             "incoherent", "coherent_floor"},
            rows);
  artifacts.push_back("decoherence.csv");

  // per-channel budget at the reference point (noise section if present,
  // otherwise the 20 us relaxation benchmark)
  NoiseSpec ref = cfg.noise.value_or(NoiseSpec::uniform(egm.model, 20e3, 40e3));
  if (cfg.noise && cfg.noise->entries.size() != egm.model.modes.size())
    ref = NoiseSpec::uniform(egm.model, 20e3, 40e3);
  const DecoherenceBudget budget = perturbative_decoherence(egm.model, ref, egm.tau);
  json rep;
  rep["tau_ns"] = egm.tau;
  rep["g2_mhz"] = mhz(egm.g2);
  rep["coherent_floor"] = floor;
  rep["budget_incoherent"] = budget.incoherent;
  json channels = json::array();
  for (std::size_t i = 0; i < budget.channel_labels.size(); ++i)
    channels.push_back(
        {{"channel", budget.channel_labels[i]}, {"infidelity", budget.per_channel[i]}});
  rep["channels"] = channels;
  rep["weak_noise_ok"] = budget.weak_noise_ok;
  write_json(dir / "decoherence.json", rep);
  artifacts.push_back("decoherence.json");
}

// ---------------------------------------------------------------------------
// spectators

void run_spectators(const ExperimentConfig& cfg, const fs::path& dir,
                    std::vector<std::string>& artifacts) {
  const std::vector<int> counts = experiment_ints(cfg, "qubit_counts", {2, 3, 4});
  const std::vector<double> sigmas =
      experiment_numbers(cfg, "sigma_c_grid_ns", {3.0});
  const double tau = experiment_number(cfg, "tau_ns", 60.0);
  const double sigma_q = experiment_number(cfg, "sigma_q_ns", 1.0);
  const int max_evals = experiment_int(cfg, "max_evals", 150);

  const int available = static_cast<int>(cfg.model.qubit_labels().size());
  std::vector<std::vector<std::string>> rows;
  json summary = json::array();
  for (int n : counts) {
    if (n > available)
      throw ConfigError("spectator study needs " + std::to_string(n) +
                        " qubits but the model has " + std::to_string(available));
    std::vector<std::string> keep = {"c"};
    for (int j = 1; j <= n; ++j) {
      keep.push_back("q" + std::to_string(j));
      keep.push_back("c" + std::to_string(j));
    }
    const SystemModel sub = cfg.model.submodel(keep);
    const LabeledSpectrum ls = labeled_cell(sub, 4);

    double best = 1.0;
    for (double sigma_c : sigmas) {
      CzOptimizeOptions opts;
      opts.tau = tau;
      opts.sigma_q = sigma_q;
      opts.seed_sigma_c = sigma_c;
      opts.vary_sigma_c = false;
      opts.nm.max_evals = max_evals;
      opts.nm.seed = cfg.seed;
      opts.final_sample_points = 0;
      const CzOptimizeResult r = optimize_cz(sub, ls, opts);
      best = std::min(best, r.infidelity);

      const auto& leak = r.gate.leakage;
      double delta_q1 = 0.0, delta_q2 = 0.0, max_spectator = 0.0;
      for (std::size_t l = 0; l < sub.modes.size(); ++l) {
        const std::string& label = sub.modes[l].label;
        if (label == "q1") delta_q1 = leak.delta[l];
        else if (label == "q2") delta_q2 = leak.delta[l];
        else if (label[0] == 'q') max_spectator = std::max(max_spectator, leak.delta[l]);
      }
      rows.push_back({std::to_string(n), num(sigma_c), num(r.infidelity),
                      num(r.gate.phi_cp), num(delta_q1), num(delta_q2),
                      num(max_spectator), num(leak.center_residual),
                      num(leak.max_coupler_delta), std::to_string(r.evaluations)});
    }
    summary.push_back({{"n_qubits", n}, {"best_infidelity", best}});
  }
  write_csv(dir / "spectators.csv",
            {"n_qubits", "sigma_c_ns", "infidelity", "phi_cp_rad", "delta_q1",
             "delta_q2", "max_spectator_delta", "center_residual",
             "max_coupler_delta", "evaluations"},
            rows);
  artifacts.push_back("spectators.csv");
  write_json(dir / "spectators.json", json{{"by_qubit_count", summary}});
  artifacts.push_back("spectators.json");
}

// ---------------------------------------------------------------------------
// ipr / occupations

OccupationMap build_occupation_map(const ExperimentConfig& cfg) {
  const int n_qubits = static_cast<int>(cfg.model.qubit_labels().size());
  return occupation_map(labeled_cell(cfg.model, n_qubits), cfg.model);
}

void run_ipr(const ExperimentConfig& cfg, const fs::path& dir,
             std::vector<std::string>& artifacts) {
  const OccupationMap map = build_occupation_map(cfg);

  std::vector<std::vector<std::string>> rows;
  std::map<int, std::pair<int, double>> groups;  // group -> (count, ipr sum)
  for (const auto& e : map.entries) {
    rows.push_back({label_string(e.qubit_label), std::to_string(e.group), num(e.ipr)});
    groups[e.group].first += 1;
    groups[e.group].second += e.ipr;
  }
  write_csv(dir / "ipr.csv", {"state", "group", "ipr"}, rows);
  artifacts.push_back("ipr.csv");

  std::vector<std::vector<std::string>> grows;
  for (const auto& [group, acc] : groups)
    grows.push_back(
        {std::to_string(group), std::to_string(acc.first), num(acc.second / acc.first)});
  write_csv(dir / "ipr_groups.csv", {"group", "n_states", "mean_ipr"}, grows);
  artifacts.push_back("ipr_groups.csv");
}

void run_occupations(const ExperimentConfig& cfg, const fs::path& dir,
                     std::vector<std::string>& artifacts) {
  const OccupationMap map = build_occupation_map(cfg);

  std::vector<std::string> header = {"state", "group"};
  for (const auto& label : map.mode_labels) header.push_back("occ_" + label);
  header.insert(header.end(), {"coupler_occupation", "total", "ipr"});
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : map.entries) {
    std::vector<std::string> row = {label_string(e.qubit_label),
                                    std::to_string(e.group)};
    for (double occ : e.occupation) row.push_back(num(occ));
    row.push_back(num(e.coupler_occupation));
    row.push_back(num(e.total));
    row.push_back(num(e.ipr));
    rows.push_back(std::move(row));
  }
  write_csv(dir / "occupations.csv", header, rows);
  artifacts.push_back("occupations.csv");
}

// ---------------------------------------------------------------------------
// dump-pulse

void run_dump_pulse(const ExperimentConfig& cfg, const fs::path& dir,
                    std::vector<std::string>& artifacts) {
  if (!cfg.schedule)
    throw ConfigError("dump-pulse needs a schedule section in the config");
  const PulseSchedule& ps = *cfg.schedule;
  const SystemModel& m = cfg.model;
  const double dt = experiment_number(cfg, "dt_ns", 0.1);

  std::vector<double> ts;
  for (double t = 0.0; t < ps.duration + 0.5 * dt; t += dt)
    ts.push_back(std::min(t, ps.duration));
  if (ts.empty() || ts.back() < ps.duration) ts.push_back(ps.duration);

  const std::vector<int> driven = ps.driven_modes();
  std::vector<std::string> header = {"t_ns"};
  for (const auto& mode : m.modes) header.push_back("omega_" + mode.label + "_ghz");
  for (int mode : driven)
    header.push_back("drive_" + m.modes[static_cast<std::size_t>(mode)].label +
                     "_mhz");

  const std::vector<double> idle = m.idle_frequencies();
  std::vector<double> omega, coeff;
  std::vector<std::vector<std::string>> rows;
  for (double t : ts) {
    ps.frequencies_at(t, idle, omega);
    ps.drive_coefficients_at(t, coeff);
    std::vector<std::string> row = {num(t)};
    for (double w : omega) row.push_back(num(ghz(w)));
    for (double a : coeff) row.push_back(num(mhz(a)));
    rows.push_back(std::move(row));
  }
  write_csv(dir / "pulse.csv", header, rows);
  artifacts.push_back("pulse.csv");
}

}  // namespace

std::vector<std::string> run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment.empty())
    throw ConfigError("config has no experiment section to run");
  const auto t0 = std::chrono::steady_clock::now();

  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory '" + cfg.output_dir + "'");

  std::vector<std::string> artifacts;
  if (cfg.experiment == "calibrate")
    run_calibrate(cfg, dir, artifacts);
  else if (cfg.experiment == "analytics")
    run_analytics(cfg, dir, artifacts);
  else if (cfg.experiment == "cz-optimize")
    run_cz_optimize(cfg, dir, artifacts);
  else if (cfg.experiment == "cz-run")
    run_cz_run(cfg, dir, artifacts);
  else if (cfg.experiment == "sqg-scan")
    run_sqg_scan(cfg, dir, artifacts);
  else if (cfg.experiment == "decoherence")
    run_decoherence(cfg, dir, artifacts);
  else if (cfg.experiment == "spectators")
    run_spectators(cfg, dir, artifacts);
  else if (cfg.experiment == "ipr")
    run_ipr(cfg, dir, artifacts);
  else if (cfg.experiment == "occupations")
    run_occupations(cfg, dir, artifacts);
  else if (cfg.experiment == "dump-pulse")
    run_dump_pulse(cfg, dir, artifacts);
  else
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json man;
  man["experiment"] = cfg.experiment;
  man["config_hash"] = config_hash(cfg);
  man["seed"] = cfg.seed;
  man["library_version"] = kLibraryVersion;
  man["wall_time_s"] = wall;
  man["artifacts"] = artifacts;
  write_json(dir / "manifest.json", man);
  artifacts.push_back("manifest.json");
  return artifacts;
}

}  // namespace ucsim
