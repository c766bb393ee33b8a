#include "ucsim/gates.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace ucsim {

namespace {

constexpr double hbar_over_kb_ns_kelvin = 7.638233e-3;  // ns*K per (rad/ns)

double wrap_angle(double x) {
  double w = std::remainder(x, two_pi);
  if (w <= -pi) w += two_pi;
  return w;
}

double safe_arg(cd z) { return std::abs(z) < 1e-14 ? 0.0 : std::arg(z); }

// label bookkeeping for the partial trace onto one or two modes: each labeled
// eigenstate maps to a (computational row, bath column) slot
struct BlockIndexer {
  std::vector<int> row;   // -1 outside the computational block
  std::vector<int> bath;
  int n_rows = 0;
  int n_bath = 0;
};

BlockIndexer make_block_indexer(const LabeledSpectrum& ls, const std::vector<int>& modes) {
  BlockIndexer idx;
  idx.n_rows = 1 << modes.size();
  idx.row.assign(ls.labels.size(), -1);
  idx.bath.assign(ls.labels.size(), -1);
  std::map<std::vector<int>, int> bath_ids;
  for (std::size_t li = 0; li < ls.labels.size(); ++li) {
    std::vector<int> occ = ls.labels[li];
    int row = 0;
    bool inside = true;
    for (int mi : modes) {
      const int n = occ[static_cast<std::size_t>(mi)];
      if (n > 1) {
        inside = false;
        break;
      }
      row = 2 * row + n;
      occ[static_cast<std::size_t>(mi)] = 0;
    }
    if (!inside) continue;
    auto it = bath_ids.emplace(occ, idx.n_bath);
    if (it.second) ++idx.n_bath;
    idx.row[li] = row;
    idx.bath[li] = it.first->second;
  }
  return idx;
}

// computational-row amplitude matrix <e_label|psi> arranged (row, bath)
MatrixXcd amplitude_matrix(const VectorXcd& psi, const LabeledSpectrum& ls,
                           const BlockIndexer& idx) {
  MatrixXcd a = MatrixXcd::Zero(idx.n_rows, std::max(idx.n_bath, 1));
  for (std::size_t li = 0; li < ls.labels.size(); ++li) {
    if (idx.row[li] < 0) continue;
    a(idx.row[li], idx.bath[li]) = ls.vectors.col(static_cast<Eigen::Index>(li)).dot(psi);
  }
  return a;
}

void check_space(const LabeledSpectrum& ls, const SystemModel& m) {
  if (ls.space.levels.size() != m.modes.size())
    throw ConfigError("labeled spectrum does not match the model's mode count");
}

Eigen::Matrix4cd phase_diag(double phi_01, double phi_10) {
  Eigen::Matrix4cd d = Eigen::Matrix4cd::Zero();
  d(0, 0) = 1.0;
  d(1, 1) = std::exp(iu * phi_01);
  d(2, 2) = std::exp(iu * phi_10);
  d(3, 3) = std::exp(iu * (phi_01 + phi_10));
  return d;
}

std::vector<double> sample_grid(double duration, int points) {
  std::vector<double> grid;
  if (points <= 0) {
    grid = {0.0, duration};
  } else {
    grid.reserve(static_cast<std::size_t>(points) + 1);
    for (int i = 0; i <= points; ++i)
      grid.push_back(duration * static_cast<double>(i) / points);
  }
  return grid;
}

void unwrap_inplace(std::vector<double>& phase) {
  for (std::size_t i = 1; i < phase.size(); ++i) {
    const double jump = std::round((phase[i - 1] - phase[i]) / two_pi);
    phase[i] += two_pi * jump;
  }
}

Eigen::Matrix2cd align_coherence(const Eigen::Matrix2cd& rho) {
  const cd c = rho(0, 1);
  if (std::abs(c) < 1e-8) return rho;
  Eigen::Matrix2cd d = Eigen::Matrix2cd::Identity();
  d(1, 1) = std::exp(iu * std::arg(c));
  return d * rho * d.adjoint();
}

// vec(psi_a psi_b^dag) in the column-stacking convention
VectorXcd vec_outer(const VectorXcd& a, const VectorXcd& b) {
  const Eigen::Index n = a.size();
  VectorXcd v(n * n);
  for (Eigen::Index j = 0; j < n; ++j) v.segment(j * n, n) = a * std::conj(b(j));
  return v;
}

std::array<Eigen::Matrix4cd, 16> pauli_basis() {
  Eigen::Matrix2cd sx, sy, sz, id;
  id.setIdentity();
  sx << 0, 1, 1, 0;
  sy << cd(0, 0), cd(0, -1), cd(0, 1), cd(0, 0);
  sz << 1, 0, 0, -1;
  const std::array<Eigen::Matrix2cd, 4> p = {id, sx, sy, sz};
  std::array<Eigen::Matrix4cd, 16> out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Eigen::Matrix4cd f;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) f.block<2, 2>(2 * r, 2 * c) = p[i](r, c) * p[j];
      out[static_cast<std::size_t>(4 * i + j)] = f;
    }
  return out;
}

double pauli_average_fidelity(const std::function<Eigen::Matrix4cd(const Eigen::Matrix4cd&)>& g2,
                              const Eigen::Matrix4cd& ideal) {
  const auto basis = pauli_basis();
  double total = 0.0;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const Eigen::Matrix4cd g1 = ideal * basis[j] * ideal.adjoint();
    const double term = (g1 * g2(basis[j])).trace().real();
    total += (j == 0) ? term : term / 5.0;
  }
  return total / 16.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// noise description

double thermal_occupation(double omega, double kelvin) {
  if (omega <= 0.0) throw PhysicsError("thermal occupation needs a positive frequency");
  if (kelvin < 0.0) throw PhysicsError("temperature must be nonnegative");
  if (kelvin == 0.0) return 0.0;
  return 1.0 / std::expm1(hbar_over_kb_ns_kelvin * omega / kelvin);
}

NoiseSpec NoiseSpec::uniform(const SystemModel& m, double t1, double t2_star) {
  NoiseSpec spec;
  spec.entries.assign(m.modes.size(), Entry{t1, t2_star, 0.0});
  return spec;
}

void NoiseSpec::set_temperature(const SystemModel& m, double kelvin) {
  if (entries.size() != m.modes.size())
    throw ConfigError("noise entries must match the model's mode count");
  for (std::size_t l = 0; l < entries.size(); ++l)
    entries[l].n_bar = thermal_occupation(m.modes[l].omega, kelvin);
}

std::vector<ModeNoise> NoiseSpec::mode_noise() const {
  std::vector<ModeNoise> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.t1 < 0.0 || e.t2_star < 0.0 || e.n_bar < 0.0)
      throw PhysicsError("decoherence times and occupations must be nonnegative");
    ModeNoise n;
    n.gamma = e.t1 > 0.0 ? 1.0 / e.t1 : 0.0;
    n.kappa_phi = e.t2_star > 0.0 ? 1.0 / e.t2_star : 0.0;
    n.n_bar = e.n_bar;
    out.push_back(n);
  }
  return out;
}

double NoiseSpec::max_rate() const {
  double r = 0.0;
  for (const auto& e : entries) {
    if (e.t1 > 0.0) r = std::max(r, (1.0 + e.n_bar) / e.t1);
    if (e.t2_star > 0.0) r = std::max(r, 2.0 / e.t2_star);
  }
  return r;
}

// ---------------------------------------------------------------------------
// state comparison

double state_fidelity(const MatrixXcd& rho, const MatrixXcd& rho_ideal) {
  if (rho.rows() != rho.cols() || rho_ideal.rows() != rho_ideal.cols() ||
      rho.rows() != rho_ideal.rows())
    throw ConfigError("state fidelity needs square matrices of equal size");
  const double tr = rho.trace().real();
  if (tr > 1.0 + 1e-6) throw PhysicsError("density matrix trace exceeds one");
  const double tr_ideal = rho_ideal.trace().real();
  const double purity = (rho_ideal * rho_ideal).trace().real();
  if (std::abs(tr_ideal - 1.0) > 1e-6 || std::abs(purity - 1.0) > 1e-6)
    throw PhysicsError("reference state must be pure and normalized");
  return (rho * rho_ideal).trace().real();
}

// ---------------------------------------------------------------------------
// computational-subspace bookkeeping

VectorXcd embed_computational(const SystemModel& m, const LabeledSpectrum& ls,
                              const std::string& qubit_a, const std::string& qubit_b,
                              const Eigen::Vector4cd& amplitudes) {
  check_space(ls, m);
  if (std::abs(amplitudes.norm() - 1.0) > 1e-8)
    throw ConfigError("computational amplitudes must be normalized");
  const int ia = m.require(qubit_a);
  const int ib = m.require(qubit_b);
  VectorXcd psi = VectorXcd::Zero(static_cast<Eigen::Index>(ls.space.dim));
  std::vector<int> occ(m.modes.size(), 0);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      occ[static_cast<std::size_t>(ia)] = j;
      occ[static_cast<std::size_t>(ib)] = k;
      psi += amplitudes(2 * j + k) * ls.state(occ);
    }
  return psi;
}

Eigen::Matrix4cd project_two_qubit(const VectorXcd& psi, const SystemModel& m,
                                   const LabeledSpectrum& ls, const std::string& qubit_a,
                                   const std::string& qubit_b, double* trace_out) {
  check_space(ls, m);
  const BlockIndexer idx =
      make_block_indexer(ls, {m.require(qubit_a), m.require(qubit_b)});
  const MatrixXcd a = amplitude_matrix(psi, ls, idx);
  const Eigen::Matrix4cd rho = a * a.adjoint();
  if (trace_out) *trace_out = rho.trace().real();
  return rho;
}

Eigen::Matrix4cd project_two_qubit_density(const MatrixXcd& rho, const SystemModel& m,
                                           const LabeledSpectrum& ls,
                                           const std::string& qubit_a,
                                           const std::string& qubit_b, double* trace_out) {
  check_space(ls, m);
  if (rho.rows() != static_cast<Eigen::Index>(ls.space.dim) || rho.rows() != rho.cols())
    throw ConfigError("density matrix does not match the Fock space");
  const BlockIndexer idx =
      make_block_indexer(ls, {m.require(qubit_a), m.require(qubit_b)});
  const MatrixXcd block = ls.vectors.adjoint() * rho * ls.vectors;
  Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
  for (std::size_t li = 0; li < ls.labels.size(); ++li) {
    if (idx.row[li] < 0) continue;
    for (std::size_t lj = 0; lj < ls.labels.size(); ++lj) {
      if (idx.row[lj] < 0 || idx.bath[lj] != idx.bath[li]) continue;
      out(idx.row[li], idx.row[lj]) +=
          block(static_cast<Eigen::Index>(li), static_cast<Eigen::Index>(lj));
    }
  }
  if (trace_out) *trace_out = out.trace().real();
  return out;
}

Eigen::Matrix2cd project_single_qubit(const VectorXcd& psi, const SystemModel& m,
                                      const LabeledSpectrum& ls, const std::string& mode,
                                      double* trace_out) {
  check_space(ls, m);
  const BlockIndexer idx = make_block_indexer(ls, {m.require(mode)});
  const MatrixXcd a = amplitude_matrix(psi, ls, idx);
  const Eigen::Matrix2cd rho = a * a.adjoint();
  if (trace_out) *trace_out = rho.trace().real();
  return rho;
}

Eigen::Matrix4cd remove_single_qubit_phases(const Eigen::Matrix4cd& rho, double phi_01,
                                            double phi_10) {
  const Eigen::Matrix4cd d = phase_diag(phi_01, phi_10);
  return d * rho * d.adjoint();
}

double conditional_phase(const Eigen::Matrix4cd& rho) {
  return wrap_angle(safe_arg(rho(0, 3)) - safe_arg(rho(0, 2)) - safe_arg(rho(0, 1)));
}

// ---------------------------------------------------------------------------
// CZ gate executor

GateResult run_cz(const SystemModel& m, const LabeledSpectrum& ls,
                  const PulseSchedule& schedule, const Eigen::Vector4cd& amplitudes,
                  const CzRunOptions& opts) {
  check_space(ls, m);
  const ScheduleGenerator gen(m, ls.space, schedule, opts.form);
  const std::vector<double> grid = sample_grid(schedule.duration, opts.sample_points);

  GateResult res;
  res.initial_amplitudes = amplitudes;
  const VectorXcd psi0 =
      embed_computational(m, ls, opts.qubit_a, opts.qubit_b, amplitudes);
  const Trajectory traj = evolve(gen, opts.solver, psi0, grid);
  res.final_state = traj.final_state();

  const Eigen::Matrix4cd raw = project_two_qubit(res.final_state, m, ls, opts.qubit_a,
                                                 opts.qubit_b, &res.trace_2q);

  if (opts.phases_from_aux) {
    const double inv = 1.0 / std::sqrt(2.0);
    Eigen::Vector4cd aux10, aux01;
    aux10 << inv, 0.0, inv, 0.0;
    aux01 << inv, inv, 0.0, 0.0;
    const std::vector<double> ends = {0.0, schedule.duration};
    const VectorXcd f10 =
        evolve(gen, opts.solver,
               embed_computational(m, ls, opts.qubit_a, opts.qubit_b, aux10), ends)
            .final_state();
    const VectorXcd f01 =
        evolve(gen, opts.solver,
               embed_computational(m, ls, opts.qubit_a, opts.qubit_b, aux01), ends)
            .final_state();
    res.phi_10 =
        safe_arg(project_two_qubit(f10, m, ls, opts.qubit_a, opts.qubit_b)(0, 2));
    res.phi_01 =
        safe_arg(project_two_qubit(f01, m, ls, opts.qubit_a, opts.qubit_b)(0, 1));
  } else {
    res.phi_10 = safe_arg(raw(0, 2));
    res.phi_01 = safe_arg(raw(0, 1));
  }

  res.rho_2q = remove_single_qubit_phases(raw, res.phi_01, res.phi_10);
  res.phi_cp = conditional_phase(raw);

  const Eigen::Matrix4cd rho_in = amplitudes * amplitudes.adjoint();
  const Eigen::Matrix4cd u = cz_unitary();
  res.fidelity = state_fidelity(res.rho_2q, u * rho_in * u.adjoint());
  if (res.fidelity < -1e-9 || res.fidelity > 1.0 + 1e-9)
    throw PhysicsError("gate fidelity fell outside [0, 1]");

  res.leakage = leakage_report(traj, m, ls.space);

  if (opts.sample_points > 0) {
    res.times = traj.times;
    const Eigen::Index n_modes = static_cast<Eigen::Index>(m.modes.size());
    const Eigen::Index n_samples = static_cast<Eigen::Index>(traj.states.size());
    std::vector<int> tracked;
    for (std::size_t k = 0; k < ls.labels.size(); ++k) {
      int total = 0;
      for (int n : ls.labels[k]) total += n;
      if (total <= 2) {
        tracked.push_back(static_cast<int>(k));
        res.tracked_labels.push_back(ls.labels[k]);
      }
    }
    res.populations.resize(n_modes, n_samples);
    res.tracked_populations.resize(static_cast<Eigen::Index>(tracked.size()), n_samples);
    res.phi_cp_trace.reserve(traj.states.size());
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      const std::vector<double> occ = mode_occupations(traj.states[i], ls.space);
      for (Eigen::Index l = 0; l < n_modes; ++l)
        res.populations(l, static_cast<Eigen::Index>(i)) =
            occ[static_cast<std::size_t>(l)];
      for (std::size_t t = 0; t < tracked.size(); ++t)
        res.tracked_populations(static_cast<Eigen::Index>(t),
                                static_cast<Eigen::Index>(i)) =
            std::norm(ls.vectors.col(tracked[t]).dot(traj.states[i]));
      res.phi_cp_trace.push_back(conditional_phase(
          project_two_qubit(traj.states[i], m, ls, opts.qubit_a, opts.qubit_b)));
    }
    unwrap_inplace(res.phi_cp_trace);
  }
  return res;
}

// ---------------------------------------------------------------------------
// CZ pulse calibration

CzParameters seed_cz_parameters(const SystemModel& m, double tau, double sigma_q,
                                double sigma_c, const std::string& qubit_a,
                                const std::string& qubit_b) {
  const int ia = m.require(qubit_a);
  const int ib = m.require(qubit_b);
  const int ic = m.require("c");
  const int ica = m.require("c" + qubit_a.substr(1));
  const int icb = m.require("c" + qubit_b.substr(1));

  const std::vector<double> idle = m.idle_frequencies();
  const double tau_bq = 2.0 * std::sqrt(2.0) * sigma_q;
  const double tau_bc = 2.0 * std::sqrt(2.0) * sigma_c;
  const double tau_eff = tau - 2.0 * tau_bq - tau_bc;
  if (tau_eff <= 5.0)
    throw ConfigError("gate window too short for the requested edge widths");
  const double g2_mag = pi / tau_eff;
  const double alpha_a = m.modes[static_cast<std::size_t>(ia)].alpha;

  // dressed-center shift contributed by couplers outside the gate cell
  double spectator_shift = 0.0;
  for (const auto& cp : m.couplings) {
    int other = -1;
    if (cp.a == ic) other = cp.b;
    if (cp.b == ic) other = cp.a;
    if (other < 0 || other == ia || other == ib || other == ica || other == icb) continue;
    if (m.modes[static_cast<std::size_t>(other)].label[0] != 'c') continue;
    const double g = coupling_strength(cp.beta, idle[static_cast<std::size_t>(ic)],
                                       idle[static_cast<std::size_t>(other)]);
    const double wc = idle[static_cast<std::size_t>(ic)];
    const double wo = idle[static_cast<std::size_t>(other)];
    spectator_shift += g * g * (1.0 / (wc - wo) - 1.0 / (wc + wo));
  }

  std::vector<double> w = idle;
  // the root brackets probe close to the dispersive edge, so relax the guard;
  // the converged operation point sits well inside it
  const auto effective_at = [&](const std::vector<double>& omega) {
    return schrieffer_wolff(cell_params(m, omega, qubit_a, qubit_b), 0.45);
  };

  const double upper_a = idle[static_cast<std::size_t>(ic)] - two_pi * 0.26;
  const double upper_b = upper_a;

  bool converged = false;
  for (int iter = 0; iter < 60 && !converged; ++iter) {
    const EffectiveModel eff = effective_at(w);
    const double target_c = eff.omega_c + spectator_shift;
    const double dq2 = target_c - eff.omega_q2;
    const double dq1 = (target_c - alpha_a) - eff.omega_q1;
    w[static_cast<std::size_t>(ib)] += dq2;
    w[static_cast<std::size_t>(ia)] += dq1;

    const auto g_a = [&](double x) {
      std::vector<double> ww = w;
      ww[static_cast<std::size_t>(ica)] = x;
      return effective_at(ww).g_cq1;
    };
    const auto g_b = [&](double x) {
      std::vector<double> ww = w;
      ww[static_cast<std::size_t>(icb)] = x;
      return effective_at(ww).g_cq2;
    };
    // sign of the operated coupling follows the virtual channel near the top
    const double sign_a = g_a(upper_a) < 0.0 ? -1.0 : 1.0;
    const double sign_b = g_b(upper_b) < 0.0 ? -1.0 : 1.0;
    const double ta = sign_a * std::sqrt(1.5) * g2_mag;
    const double tb = sign_b * g2_mag;

    const auto solve = [&](const std::function<double(double)>& g, double lo, double hi,
                           double target) {
      const auto f = [&](double x) { return g(x) - target; };
      if (f(lo) * f(hi) > 0.0)
        throw PhysicsError(
            "requested effective coupling is outside the dispersive window");
      return find_root(f, lo, hi, 1e-11, 1e-13).x;
    };
    w[static_cast<std::size_t>(ica)] =
        solve(g_a, idle[static_cast<std::size_t>(ica)], upper_a, ta);
    w[static_cast<std::size_t>(icb)] =
        solve(g_b, idle[static_cast<std::size_t>(icb)], upper_b, tb);

    converged = std::abs(dq1) < 1e-10 && std::abs(dq2) < 1e-10;
  }
  if (!converged)
    throw PhysicsError("pulse seeding fixed point did not converge");

  CzParameters p;
  p.a_q1 = w[static_cast<std::size_t>(ia)] - idle[static_cast<std::size_t>(ia)];
  p.a_q2 = w[static_cast<std::size_t>(ib)] - idle[static_cast<std::size_t>(ib)];
  p.a_c1 = w[static_cast<std::size_t>(ica)] - idle[static_cast<std::size_t>(ica)];
  p.a_c2 = w[static_cast<std::size_t>(icb)] - idle[static_cast<std::size_t>(icb)];
  p.sigma_c = sigma_c;
  return p;
}

CzParameters area_matched_cz_parameters(const SystemModel& m, double tau,
                                        double sigma_q, double sigma_c,
                                        const std::string& qubit_a,
                                        const std::string& qubit_b) {
  const CzParameters seed =
      seed_cz_parameters(m, tau, sigma_q, sigma_c, qubit_a, qubit_b);

  const int ia = m.require(qubit_a);
  const int ib = m.require(qubit_b);
  const int ic = m.require("c");
  const int ica = m.require("c" + qubit_a.substr(1));
  const int icb = m.require("c" + qubit_b.substr(1));

  const std::vector<double> idle = m.idle_frequencies();
  const double alpha_a = m.modes[static_cast<std::size_t>(ia)].alpha;

  double spectator_shift = 0.0;
  for (const auto& cp : m.couplings) {
    int other = -1;
    if (cp.a == ic) other = cp.b;
    if (cp.b == ic) other = cp.a;
    if (other < 0 || other == ia || other == ib || other == ica || other == icb) continue;
    if (m.modes[static_cast<std::size_t>(other)].label[0] != 'c') continue;
    const double g = coupling_strength(cp.beta, idle[static_cast<std::size_t>(ic)],
                                       idle[static_cast<std::size_t>(other)]);
    const double wc = idle[static_cast<std::size_t>(ic)];
    const double wo = idle[static_cast<std::size_t>(other)];
    spectator_shift += g * g * (1.0 / (wc - wo) - 1.0 / (wc + wo));
  }

  std::vector<double> w = idle;
  w[static_cast<std::size_t>(ia)] += seed.a_q1;
  w[static_cast<std::size_t>(ib)] += seed.a_q2;
  w[static_cast<std::size_t>(ica)] += seed.a_c1;
  w[static_cast<std::size_t>(icb)] += seed.a_c2;

  // the root brackets probe a whisker from the dispersive edge, so relax the
  // guard further than the seed does; the converged couplers end well inside
  const auto effective_at = [&](const std::vector<double>& omega) {
    return schrieffer_wolff(cell_params(m, omega, qubit_a, qubit_b), 0.49);
  };

  // pulse-integrated quantities, midpoint rule; the integrands are smooth on
  // the edge scale.  area1/area2 are the rotation areas of the two operated
  // couplings; detune1/detune2 are the coupling-weighted means of the two
  // resonance defects, so zeroing them balances the edges, not just the
  // plateau, against the ramp-induced dispersive shifts
  const double dt = 0.05;
  const int n_steps = static_cast<int>(std::round(tau / dt));
  std::vector<double> omega_t(m.modes.size());
  struct PulseIntegrals {
    double area1 = 0.0, area2 = 0.0, detune1 = 0.0, detune2 = 0.0;
  };
  const auto integrate = [&](const std::vector<double>& plateau) {
    const CzAmplitudes amp{plateau[static_cast<std::size_t>(ia)] -
                               idle[static_cast<std::size_t>(ia)],
                           plateau[static_cast<std::size_t>(ib)] -
                               idle[static_cast<std::size_t>(ib)],
                           plateau[static_cast<std::size_t>(ica)] -
                               idle[static_cast<std::size_t>(ica)],
                           plateau[static_cast<std::size_t>(icb)] -
                               idle[static_cast<std::size_t>(icb)]};
    const PulseSchedule sched = schedule_cz(m, tau, sigma_q, sigma_c, amp);
    PulseIntegrals acc;
    for (int k = 0; k < n_steps; ++k) {
      sched.frequencies_at((k + 0.5) * dt, idle, omega_t);
      const EffectiveModel eff = effective_at(omega_t);
      const double g1 = std::abs(eff.g_cq1);
      const double g2 = std::abs(eff.g_cq2);
      const double target_c = eff.omega_c + spectator_shift;
      acc.area1 += g1;
      acc.area2 += g2;
      acc.detune1 += ((target_c - alpha_a) - eff.omega_q1) * g1;
      acc.detune2 += (target_c - eff.omega_q2) * g2;
    }
    acc.area1 *= dt;
    acc.area2 *= dt;
    acc.detune1 *= dt;
    acc.detune2 *= dt;
    return acc;
  };

  // the area solution sits closer to the center than the rate solution, so
  // bracket up to just below the two-quantum center resonance omega_c + alpha_c
  const double upper = idle[static_cast<std::size_t>(ic)] +
                       m.modes[static_cast<std::size_t>(ic)].alpha - two_pi * 0.012;
  const double target_a1 = std::sqrt(1.5) * pi;
  const double target_a2 = pi;

  bool converged = false;
  for (int iter = 0; iter < 60 && !converged; ++iter) {
    const PulseIntegrals cur = integrate(w);
    const double dq1 = cur.detune1 / cur.area1;
    const double dq2 = cur.detune2 / cur.area2;
    w[static_cast<std::size_t>(ia)] += dq1;
    w[static_cast<std::size_t>(ib)] += dq2;

    const auto solve = [&](int which, double target, bool first) {
      const auto f = [&](double x) {
        std::vector<double> ww = w;
        ww[static_cast<std::size_t>(which)] = x;
        const PulseIntegrals a = integrate(ww);
        return (first ? a.area1 : a.area2) - target;
      };
      const double lo = idle[static_cast<std::size_t>(which)];
      if (f(lo) * f(upper) > 0.0)
        throw PhysicsError(
            "requested rotation area is outside the dispersive window");
      return find_root(f, lo, upper, 1e-10, 1e-12).x;
    };
    const double ca_prev = w[static_cast<std::size_t>(ica)];
    const double cb_prev = w[static_cast<std::size_t>(icb)];
    w[static_cast<std::size_t>(ica)] = solve(ica, target_a1, true);
    w[static_cast<std::size_t>(icb)] = solve(icb, target_a2, false);

    converged = std::abs(dq1) < 1e-9 && std::abs(dq2) < 1e-9 &&
                std::abs(w[static_cast<std::size_t>(ica)] - ca_prev) < 5e-9 &&
                std::abs(w[static_cast<std::size_t>(icb)] - cb_prev) < 5e-9;
  }
  if (!converged)
    throw PhysicsError("area-matched pulse calibration did not converge");

  CzParameters p;
  p.a_q1 = w[static_cast<std::size_t>(ia)] - idle[static_cast<std::size_t>(ia)];
  p.a_q2 = w[static_cast<std::size_t>(ib)] - idle[static_cast<std::size_t>(ib)];
  p.a_c1 = w[static_cast<std::size_t>(ica)] - idle[static_cast<std::size_t>(ica)];
  p.a_c2 = w[static_cast<std::size_t>(icb)] - idle[static_cast<std::size_t>(icb)];
  p.sigma_c = sigma_c;
  return p;
}

CzOptimizeOptions::CzOptimizeOptions() {
  search_solver.dt = 0.04;
  final_solver.dt = 0.02;
  nm.max_evals = 400;
  nm.restarts = 0;
  nm.ftol_abs = 1e-10;
  nm.stop_below = 1e-7;
}

CzOptimizeResult optimize_cz(const SystemModel& m, const LabeledSpectrum& ls,
                             const CzOptimizeOptions& opts) {
  const CzParameters seed = opts.warm_start
                                ? *opts.warm_start
                                : seed_cz_parameters(m, opts.tau, opts.sigma_q,
                                                     opts.seed_sigma_c, opts.qubit_a,
                                                     opts.qubit_b);
  const double tau_bq = 2.0 * std::sqrt(2.0) * opts.sigma_q;
  const double sigma_c_max = (opts.tau - 2.0 * tau_bq) / (4.0 * std::sqrt(2.0)) - 0.05;

  int evals = 0;
  const auto objective_at = [&](const CzParameters& p, const MagnusConfig& solver,
                                bool penalize) -> double {
    if (p.sigma_c < 0.5 || p.sigma_c > sigma_c_max) {
      if (!penalize) throw ConfigError("coupler edge width outside the gate window");
      return 1.0 + std::abs(p.sigma_c);
    }
    const PulseSchedule sched = schedule_cz(
        m, opts.tau, opts.sigma_q, p.sigma_c, {p.a_q1, p.a_q2, p.a_c1, p.a_c2});
    CzRunOptions ro;
    ro.solver = solver;
    ro.phases_from_aux = false;
    ro.qubit_a = opts.qubit_a;
    ro.qubit_b = opts.qubit_b;
    double infid;
    try {
      ++evals;
      infid = 1.0 - run_cz(m, ls, sched, cz_probe_state(), ro).fidelity;
    } catch (const NumericsError&) {
      if (!penalize) throw;
      return 5.0;
    } catch (const PhysicsError&) {
      if (!penalize) throw;
      return 5.0;
    }
    if (!std::isfinite(infid)) {
      std::ostringstream msg;
      msg << "objective not finite at amplitudes (" << p.a_q1 << ", " << p.a_q2 << ", "
          << p.a_c1 << ", " << p.a_c2 << "), sigma_c " << p.sigma_c;
      throw NumericsError(msg.str());
    }
    return infid;
  };

  const auto unpack = [&](const VectorXd& x) {
    CzParameters p;
    p.a_q1 = x(0);
    p.a_q2 = x(1);
    p.a_c1 = x(2);
    p.a_c2 = x(3);
    p.sigma_c = opts.vary_sigma_c ? x(4) : seed.sigma_c;
    return p;
  };

  const int n = opts.vary_sigma_c ? 5 : 4;
  VectorXd x0(n), step(n);
  x0(0) = seed.a_q1;
  x0(1) = seed.a_q2;
  x0(2) = seed.a_c1;
  x0(3) = seed.a_c2;
  step(0) = step(1) = two_pi * 3.0e-3;
  step(2) = step(3) = two_pi * 20.0e-3;
  if (opts.vary_sigma_c) {
    x0(4) = seed.sigma_c;
    step(4) = 0.35;
  }

  CzOptimizeResult out;
  out.seed_infidelity = objective_at(seed, opts.search_solver, true);

  const NelderMeadResult nm = nelder_mead(
      [&](const VectorXd& x) { return objective_at(unpack(x), opts.search_solver, true); },
      x0, step, opts.nm);

  out.params = unpack(nm.x);
  out.search_infidelity = nm.fx;
  out.evaluations = evals;
  out.trace = nm.trace;
  out.schedule = schedule_cz(m, opts.tau, opts.sigma_q, out.params.sigma_c,
                             {out.params.a_q1, out.params.a_q2, out.params.a_c1,
                              out.params.a_c2});

  CzRunOptions fo;
  fo.solver = opts.final_solver;
  fo.sample_points = opts.final_sample_points;
  fo.qubit_a = opts.qubit_a;
  fo.qubit_b = opts.qubit_b;
  out.gate = run_cz(m, ls, out.schedule, cz_probe_state(), fo);
  out.infidelity = 1.0 - out.gate.fidelity;
  return out;
}

// ---------------------------------------------------------------------------
// single-qubit gates

SingleQubitResult run_single_qubit(const SystemModel& m, const LabeledSpectrum& ls,
                                   const std::string& target,
                                   const std::vector<DriveSpec>& drives, double theta,
                                   double phi, const VectorXcd& initial,
                                   const MagnusConfig& solver) {
  check_space(ls, m);
  if (drives.empty()) throw ConfigError("at least one drive is required");
  PulseSchedule sched;
  sched.n_modes = m.modes.size();
  for (const auto& d : drives) {
    PulseSchedule::DriveEntry e;
    e.mode = m.require(d.mode);
    e.start = 0.0;
    e.drive = GaussianDrive{d.amplitude, d.sigma, d.tau, d.omega_d, d.phase};
    sched.duration = std::max(sched.duration, d.tau);
    sched.drives.push_back(e);
  }
  sched.validate();

  VectorXcd psi0 = initial;
  if (psi0.size() == 0) psi0 = ls.state(std::vector<int>(m.modes.size(), 0));
  if (psi0.size() != static_cast<Eigen::Index>(ls.space.dim))
    throw ConfigError("initial state does not match the Fock space");

  const ScheduleGenerator gen(m, ls.space, sched, CouplingForm::full);
  const Trajectory traj = evolve(gen, solver, psi0, {0.0, sched.duration});

  SingleQubitResult res;
  res.final_state = traj.final_state();
  const Eigen::Matrix2cd rho_raw =
      project_single_qubit(res.final_state, m, ls, target, &res.trace_1q);
  res.rho_1q = align_coherence(rho_raw);

  const Eigen::Matrix2cd rho0 = align_coherence(project_single_qubit(psi0, m, ls, target));
  const Eigen::Matrix2cd u = ideal_single_qubit_unitary(theta, phi);
  res.fidelity = state_fidelity(res.rho_1q, align_coherence(u * rho0 * u.adjoint()));
  if (res.fidelity < -1e-9 || res.fidelity > 1.0 + 1e-9)
    throw PhysicsError("gate fidelity fell outside [0, 1]");
  res.leakage = leakage_report(traj, m, ls.space);
  return res;
}

SqgOptimizeOptions::SqgOptimizeOptions() { solver.dt = 0.002; }

namespace {

double golden_guarded(const std::function<double(double)>& f, double center, double half,
                      double xtol, int* evals, const char* axis) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const GoldenResult r = golden_section_min(f, center - half, center + half, xtol);
    *evals += r.evals;
    if (r.x - (center - half) > 2.0 * xtol && (center + half) - r.x > 2.0 * xtol)
      return r.x;
    center = r.x;
    half *= 3.0;
  }
  std::ostringstream msg;
  msg << "objective along " << axis << " has no interior minimum in the widened bracket";
  throw NumericsError(msg.str());
}

}  // namespace

SqgOptimizeResult optimize_single_qubit(const SystemModel& m, const LabeledSpectrum& ls,
                                        const SqgOptimizeOptions& opts) {
  check_space(ls, m);
  if (opts.drive.mode.empty()) throw ConfigError("the tuned drive needs a mode label");
  m.require(opts.target);
  const int idrive = m.require(opts.drive.mode);

  VectorXcd initial = opts.initial;
  if (initial.size() == 0) initial = ls.state(std::vector<int>(m.modes.size(), 0));

  double omega = opts.drive.omega_d;
  if (omega == 0.0) {
    std::vector<int> occ(m.modes.size(), 0);
    occ[static_cast<std::size_t>(idrive)] = 1;
    omega = ls.energy(occ) - ls.energy(std::vector<int>(m.modes.size(), 0));
  }
  double amp = opts.drive.amplitude;
  if (amp == 0.0) {
    const double erf_arg = opts.drive.tau / (2.0 * std::sqrt(2.0) * opts.drive.sigma);
    amp = std::abs(opts.theta) /
          (opts.drive.sigma * std::sqrt(two_pi) * std::erf(erf_arg));
  }

  int evals = 0;
  const auto infidelity_at = [&](double w, double a) {
    DriveSpec tuned = opts.drive;
    tuned.omega_d = w;
    tuned.amplitude = a;
    std::vector<DriveSpec> drives = {tuned};
    drives.insert(drives.end(), opts.background.begin(), opts.background.end());
    ++evals;
    return 1.0 -
           run_single_qubit(m, ls, opts.target, drives, opts.theta, opts.phi, initial,
                            opts.solver)
               .fidelity;
  };

  double half_w = opts.omega_halfwidth;
  double half_a = std::abs(amp) * opts.amp_rel_halfwidth;
  SqgOptimizeResult out;
  for (int round = 0; round < opts.max_rounds; ++round) {
    out.rounds = round + 1;
    const double new_w =
        golden_guarded([&](double x) { return infidelity_at(x, amp); }, omega, half_w,
                       0.5 * opts.omega_tol, &evals, "the drive frequency");
    const double new_a =
        golden_guarded([&](double x) { return infidelity_at(new_w, x); }, amp, half_a,
                       0.5 * opts.amp_tol, &evals, "the drive amplitude");
    const double dw = std::abs(new_w - omega);
    const double da = std::abs(new_a - amp);
    omega = new_w;
    amp = new_a;
    if (dw < opts.omega_tol && da < opts.amp_tol) break;
    half_w = std::max(3.0 * dw, 8.0 * opts.omega_tol);
    half_a = std::max(3.0 * da, 8.0 * opts.amp_tol);
  }

  out.omega_d = omega;
  out.amplitude = amp;
  DriveSpec tuned = opts.drive;
  tuned.omega_d = omega;
  tuned.amplitude = amp;
  std::vector<DriveSpec> drives = {tuned};
  drives.insert(drives.end(), opts.background.begin(), opts.background.end());
  out.gate = run_single_qubit(m, ls, opts.target, drives, opts.theta, opts.phi, initial,
                              opts.solver);
  out.infidelity = 1.0 - out.gate.fidelity;
  out.evaluations = evals;
  return out;
}

// ---------------------------------------------------------------------------
// average gate fidelity

Eigen::Matrix4cd TwoQubitProcess::apply(const Eigen::Matrix4cd& rho) const {
  const Eigen::Map<const Eigen::Matrix<cd, 16, 1>> vin(rho.data());
  const Eigen::Matrix<cd, 16, 1> vout = super * vin;
  return Eigen::Map<const Eigen::Matrix4cd>(vout.data());
}

namespace {

// phases and superoperator from the sixteen computational-basis blocks;
// the aux-run coherences are recovered as the matching linear combinations
TwoQubitProcess assemble_process(const std::array<Eigen::Matrix4cd, 16>& blocks,
                                 const TwoQubitProcess* phase_reference) {
  TwoQubitProcess p;
  const auto at = [&](int a, int b) -> const Eigen::Matrix4cd& {
    return blocks[static_cast<std::size_t>(a + 4 * b)];
  };
  if (phase_reference) {
    p.phi_01 = phase_reference->phi_01;
    p.phi_10 = phase_reference->phi_10;
  } else {
    p.phi_10 = safe_arg((at(0, 0) + at(0, 2) + at(2, 0) + at(2, 2))(0, 2));
    p.phi_01 = safe_arg((at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1))(0, 1));
  }
  const Eigen::Matrix4cd d = phase_diag(p.phi_01, p.phi_10);
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a) {
      const Eigen::Matrix4cd corrected = d * at(a, b) * d.adjoint();
      p.super.col(a + 4 * b) = Eigen::Map<const Eigen::Matrix<cd, 16, 1>>(corrected.data());
    }
  return p;
}

}  // namespace

TwoQubitProcess unitary_process(const SystemModel& m, const LabeledSpectrum& ls,
                                const PulseSchedule& schedule, const MagnusConfig& solver,
                                const std::string& qubit_a, const std::string& qubit_b,
                                CouplingForm form, double linearity_tol) {
  check_space(ls, m);
  const ScheduleGenerator gen(m, ls.space, schedule, form);
  const BlockIndexer idx = make_block_indexer(ls, {m.require(qubit_a), m.require(qubit_b)});
  const std::vector<double> ends = {0.0, schedule.duration};

  std::array<MatrixXcd, 4> amp;
  for (int a = 0; a < 4; ++a) {
    Eigen::Vector4cd c = Eigen::Vector4cd::Zero();
    c(a) = 1.0;
    const VectorXcd psi = embed_computational(m, ls, qubit_a, qubit_b, c);
    amp[static_cast<std::size_t>(a)] =
        amplitude_matrix(evolve(gen, solver, psi, ends).final_state(), ls, idx);
  }

  std::array<Eigen::Matrix4cd, 16> blocks;
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a)
      blocks[static_cast<std::size_t>(a + 4 * b)] =
          amp[static_cast<std::size_t>(a)] * amp[static_cast<std::size_t>(b)].adjoint();
  TwoQubitProcess p = assemble_process(blocks, nullptr);

  // a directly propagated superposition must match the reconstructed map
  const Eigen::Vector4cd probe = cz_probe_state();
  const VectorXcd psi = embed_computational(m, ls, qubit_a, qubit_b, probe);
  const MatrixXcd a_probe =
      amplitude_matrix(evolve(gen, solver, psi, ends).final_state(), ls, idx);
  const Eigen::Matrix4cd d = phase_diag(p.phi_01, p.phi_10);
  const Eigen::Matrix4cd direct = d * (a_probe * a_probe.adjoint()) * d.adjoint();
  const double dev =
      (direct - p.apply(probe * probe.adjoint())).cwiseAbs().maxCoeff();
  if (dev > linearity_tol) {
    std::ostringstream msg;
    msg << "gate process deviates from linearity by " << dev;
    throw PhysicsError(msg.str());
  }
  return p;
}

TwoQubitProcess lindblad_process(const SystemModel& m, const LabeledSpectrum& ls,
                                 const PulseSchedule& schedule, const NoiseSpec& noise,
                                 const MagnusConfig& solver, const std::string& qubit_a,
                                 const std::string& qubit_b, CouplingForm form,
                                 const TwoQubitProcess* phase_reference) {
  check_space(ls, m);
  const LindbladGenerator gen(m, ls.space, schedule, noise.mode_noise(), form);
  const Eigen::Index dim = static_cast<Eigen::Index>(ls.space.dim);
  const std::vector<double> ends = {0.0, schedule.duration};

  std::array<VectorXcd, 4> basis;
  for (int a = 0; a < 4; ++a) {
    Eigen::Vector4cd c = Eigen::Vector4cd::Zero();
    c(a) = 1.0;
    basis[static_cast<std::size_t>(a)] =
        embed_computational(m, ls, qubit_a, qubit_b, c);
  }

  std::array<Eigen::Matrix4cd, 16> blocks;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) {
      const VectorXcd v0 =
          vec_outer(basis[static_cast<std::size_t>(a)], basis[static_cast<std::size_t>(b)]);
      const VectorXcd vt = evolve(gen, solver, v0, ends).final_state();
      const Eigen::Map<const MatrixXcd> rho(vt.data(), dim, dim);
      const Eigen::Matrix4cd blk =
          project_two_qubit_density(rho, m, ls, qubit_a, qubit_b);
      blocks[static_cast<std::size_t>(a + 4 * b)] = blk;
      if (a != b) blocks[static_cast<std::size_t>(b + 4 * a)] = blk.adjoint();
    }
  return assemble_process(blocks, phase_reference);
}

double average_gate_fidelity(const TwoQubitProcess& process,
                             const Eigen::Matrix4cd& ideal_unitary) {
  return pauli_average_fidelity(
      [&](const Eigen::Matrix4cd& f) { return process.apply(f); }, ideal_unitary);
}

MonteCarloFidelity average_fidelity_monte_carlo(const TwoQubitProcess& process,
                                                const Eigen::Matrix4cd& ideal_unitary,
                                                int samples, unsigned seed) {
  if (samples < 2) throw ConfigError("monte carlo estimate needs at least two samples");
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::Vector4cd psi;
    for (int i = 0; i < 4; ++i) psi(i) = cd(gauss(rng), gauss(rng));
    psi /= psi.norm();
    const Eigen::Vector4cd target = ideal_unitary * psi;
    const Eigen::Matrix4cd mapped = process.apply(psi * psi.adjoint());
    const double f = (target.adjoint() * mapped * target)(0).real();
    sum += f;
    sum2 += f * f;
  }
  MonteCarloFidelity out;
  out.samples = samples;
  out.mean = sum / samples;
  const double var =
      std::max(0.0, sum2 - samples * out.mean * out.mean) / (samples - 1);
  out.std_error = std::sqrt(var / samples);
  return out;
}

// ---------------------------------------------------------------------------
// decoherence during the gate

EffectiveGateModel effective_gate_model(double omega_c, double alpha_q1, double alpha_q2,
                                        double alpha_c, double g2, int levels) {
  if (g2 <= 0.0) throw ConfigError("the resonant coupling must be positive");
  EffectiveGateModel out;
  const double g1 = std::sqrt(1.5) * g2;
  const double omega_q1 = omega_c - alpha_q1;
  SystemModel& m = out.model;
  m.modes = {Mode{"q1", omega_q1, alpha_q1, levels}, Mode{"q2", omega_c, alpha_q2, levels},
             Mode{"c", omega_c, alpha_c, levels}};
  m.couplings = {Coupling{2, 0, g1 / std::sqrt(omega_q1 * omega_c)},
                 Coupling{2, 1, g2 / omega_c}};
  m.validate();
  out.g2 = g2;
  out.tau = pi / g2;
  return out;
}

LindbladStudy lindblad_decoherence_study(const SystemModel& m, const LabeledSpectrum& ls,
                                         const PulseSchedule& schedule,
                                         const NoiseSpec& noise, const MagnusConfig& solver,
                                         const std::string& qubit_a,
                                         const std::string& qubit_b, CouplingForm form) {
  const TwoQubitProcess clean =
      unitary_process(m, ls, schedule, solver, qubit_a, qubit_b, form);
  const TwoQubitProcess noisy = lindblad_process(m, ls, schedule, noise, solver, qubit_a,
                                                 qubit_b, form, &clean);
  LindbladStudy out;
  out.f_bar_noiseless = average_gate_fidelity(clean, cz_unitary());
  out.f_bar_noisy = average_gate_fidelity(noisy, cz_unitary());
  out.coherent_floor = 1.0 - out.f_bar_noiseless;
  out.incoherent = out.f_bar_noiseless - out.f_bar_noisy;
  out.weak_noise_ok = noise.max_rate() * schedule.duration <= 0.1;
  return out;
}

DecoherenceBudget perturbative_decoherence(const SystemModel& m, const NoiseSpec& noise,
                                           double tau, const std::string& qubit_a,
                                           const std::string& qubit_b,
                                           int quadrature_points) {
  if (noise.entries.size() != m.modes.size())
    throw ConfigError("noise entries must match the model's mode count");
  if (quadrature_points < 2) throw ConfigError("too few quadrature points");
  if (quadrature_points % 2 != 0) ++quadrature_points;

  const FockSpace s = fock_space(m);
  const MatrixXcd h = MatrixXcd(
      assemble_hamiltonian(m, s, m.idle_frequencies(), CouplingForm::rwa));
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  if (es.info() != Eigen::Success)
    throw NumericsError("eigendecomposition of the static Hamiltonian failed");
  const MatrixXcd v = es.eigenvectors();
  const VectorXd e = es.eigenvalues();

  Spectrum sp;
  sp.values = e;
  sp.vectors = v;
  int total_levels = 0;
  for (int lv : s.levels) total_levels += lv - 1;
  const LabeledSpectrum ls =
      label_eigenstates(sp, s, std::min(total_levels, 4));

  const auto unitary_at = [&](double t) -> MatrixXcd {
    VectorXcd phases(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) phases(i) = std::exp(-iu * e(i) * t);
    return v * phases.asDiagonal() * v.adjoint();
  };

  const BlockIndexer idx = make_block_indexer(ls, {m.require(qubit_a), m.require(qubit_b)});
  const MatrixXcd u_tau = unitary_at(tau);

  std::array<VectorXcd, 4> basis;
  std::array<VectorXcd, 4> propagated;
  for (int a = 0; a < 4; ++a) {
    Eigen::Vector4cd c = Eigen::Vector4cd::Zero();
    c(a) = 1.0;
    basis[static_cast<std::size_t>(a)] = embed_computational(m, ls, qubit_a, qubit_b, c);
    propagated[static_cast<std::size_t>(a)] = u_tau * basis[static_cast<std::size_t>(a)];
  }

  std::array<Eigen::Matrix4cd, 16> zero_blocks;
  std::array<MatrixXcd, 4> amp;
  for (int a = 0; a < 4; ++a)
    amp[static_cast<std::size_t>(a)] =
        amplitude_matrix(propagated[static_cast<std::size_t>(a)], ls, idx);
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a)
      zero_blocks[static_cast<std::size_t>(a + 4 * b)] =
          amp[static_cast<std::size_t>(a)] * amp[static_cast<std::size_t>(b)].adjoint();
  const TwoQubitProcess zeroth = assemble_process(zero_blocks, nullptr);
  const Eigen::Matrix4cd dphase = phase_diag(zeroth.phi_01, zeroth.phi_10);

  // jump channels with their rates
  struct Channel {
    std::string label;
    SpMat op;
    double rate;
  };
  std::vector<Channel> channels;
  for (std::size_t l = 0; l < m.modes.size(); ++l) {
    const auto& ne = noise.entries[l];
    if (ne.t1 < 0.0 || ne.t2_star < 0.0 || ne.n_bar < 0.0)
      throw PhysicsError("decoherence times and occupations must be nonnegative");
    const int mi = static_cast<int>(l);
    const std::string& lbl = m.modes[l].label;
    if (ne.t1 > 0.0) {
      channels.push_back(
          {lbl + ":relaxation", lowering_operator(s, mi), (1.0 + ne.n_bar) / ne.t1});
      if (ne.n_bar > 0.0)
        channels.push_back({lbl + ":excitation",
                            SpMat(lowering_operator(s, mi).adjoint()), ne.n_bar / ne.t1});
    }
    if (ne.t2_star > 0.0)
      channels.push_back({lbl + ":dephasing", number_operator(s, mi), 2.0 / ne.t2_star});
  }

  // Simpson weights over [0, tau]
  const int nq = quadrature_points;
  const double hstep = tau / nq;
  std::vector<double> weight(static_cast<std::size_t>(nq) + 1, 0.0);
  for (int i = 0; i <= nq; ++i) {
    double wgt = (i == 0 || i == nq) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    weight[static_cast<std::size_t>(i)] = wgt * hstep / 3.0;
  }

  std::vector<std::array<Eigen::Matrix4cd, 16>> corr(channels.size());
  for (auto& arr : corr)
    for (auto& blk : arr) blk.setZero();

  for (int i = 0; i <= nq; ++i) {
    const double t = hstep * i;
    const MatrixXcd u_t = unitary_at(t);
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const MatrixXcd l_t = u_t.adjoint() * MatrixXcd(channels[k].op) * u_t;
      const MatrixXcd q_t = l_t.adjoint() * l_t;
      // rank-three dissipator action on |a><b|, conjugated to the gate end
      std::array<VectorXcd, 4> lb, qb;
      for (int a = 0; a < 4; ++a) {
        lb[static_cast<std::size_t>(a)] =
            u_tau * (l_t * basis[static_cast<std::size_t>(a)]);
        qb[static_cast<std::size_t>(a)] =
            u_tau * (q_t * basis[static_cast<std::size_t>(a)]);
      }
      std::array<MatrixXcd, 4> lamp, qamp;
      for (int a = 0; a < 4; ++a) {
        lamp[static_cast<std::size_t>(a)] =
            amplitude_matrix(lb[static_cast<std::size_t>(a)], ls, idx);
        qamp[static_cast<std::size_t>(a)] =
            amplitude_matrix(qb[static_cast<std::size_t>(a)], ls, idx);
      }
      const double wgt = weight[static_cast<std::size_t>(i)] * channels[k].rate;
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a) {
          const std::size_t ai = static_cast<std::size_t>(a);
          const std::size_t bi = static_cast<std::size_t>(b);
          Eigen::Matrix4cd blk =
              lamp[ai] * lamp[bi].adjoint() -
              0.5 * (qamp[ai] * amp[bi].adjoint() + amp[ai] * qamp[bi].adjoint());
          corr[k][static_cast<std::size_t>(a + 4 * b)] += wgt * blk;
        }
    }
  }

  DecoherenceBudget out;
  const Eigen::Matrix4cd ideal = cz_unitary();
  const double f_zero = average_gate_fidelity(zeroth, ideal);
  out.coherent_floor = 1.0 - f_zero;
  out.f_bar = f_zero;
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const auto g2_corr = [&](const Eigen::Matrix4cd& f) {
      Eigen::Matrix4cd acc = Eigen::Matrix4cd::Zero();
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a)
          acc += f(a, b) * corr[k][static_cast<std::size_t>(a + 4 * b)];
      return Eigen::Matrix4cd(dphase * acc * dphase.adjoint());
    };
    const double df = pauli_average_fidelity(g2_corr, ideal);
    out.channel_labels.push_back(channels[k].label);
    out.per_channel.push_back(-df);
    out.f_bar += df;
  }
  out.incoherent = f_zero - out.f_bar;
  out.weak_noise_ok = noise.max_rate() * tau <= 0.1;
  return out;
}

double closed_form_decoherence_infidelity(double tau, const std::array<double, 3>& t1,
                                          const std::array<double, 3>& t2_star,
                                          const std::array<double, 3>& n_bar) {
  if (tau < 0.0) throw ConfigError("gate duration must be nonnegative");
  const std::array<double, 3> relax_w = {73.0 / 160.0, 7.0 / 32.0, 1.0 / 8.0};
  const std::array<double, 3> excite_w = {1753.0 / 1280.0, 37.0 / 32.0, 253.0 / 320.0};
  const std::array<double, 3> dephase_w = {6283.0 / 10240.0, 2963.0 / 10240.0,
                                           131.0 / 640.0};
  double rate = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (t1[static_cast<std::size_t>(i)] < 0.0 || t2_star[static_cast<std::size_t>(i)] < 0.0 ||
        n_bar[static_cast<std::size_t>(i)] < 0.0)
      throw PhysicsError("decoherence times and occupations must be nonnegative");
    if (t1[static_cast<std::size_t>(i)] > 0.0) {
      const double gamma = 1.0 / t1[static_cast<std::size_t>(i)];
      const double nb = n_bar[static_cast<std::size_t>(i)];
      rate += relax_w[static_cast<std::size_t>(i)] * gamma * (nb + 1.0);
      rate += excite_w[static_cast<std::size_t>(i)] * gamma * nb;
    }
    if (t2_star[static_cast<std::size_t>(i)] > 0.0)
      rate += dephase_w[static_cast<std::size_t>(i)] / t2_star[static_cast<std::size_t>(i)];
  }
  return tau * rate;
}

// ---------------------------------------------------------------------------
// spectator scaling

SpectatorOptions::SpectatorOptions() {
  search_solver.dt = 0.04;
  final_solver.dt = 0.02;
}

SpectatorStudy spectator_study(const std::vector<SystemModel>& models,
                               const SpectatorOptions& opts) {
  if (models.empty()) throw ConfigError("spectator study needs at least one model");
  if (opts.sigma_c_grid.empty()) throw ConfigError("spectator study needs a sigma_c grid");
  SpectatorStudy study;

  for (const auto& m : models) {
    m.validate();
    const FockSpace s = fock_space(m);

    // how many labels the assignment will want, to size the eigensolve
    std::vector<long> count(static_cast<std::size_t>(opts.label_max_total) + 1, 0);
    count[0] = 1;
    for (int lv : s.levels) {
      std::vector<long> next(count.size(), 0);
      for (std::size_t t = 0; t < count.size(); ++t)
        for (int n = 0; n < lv && static_cast<std::size_t>(n) <= t; ++n)
          next[t] += count[t - static_cast<std::size_t>(n)];
      count = next;
    }
    long n_labels = 0;
    for (long c : count) n_labels += c;

    EigensolveOptions eopts;
    eopts.k = static_cast<int>(
        std::min<long>(static_cast<long>(s.dim), (n_labels * 5) / 2 + 40));
    const Spectrum sp =
        eigensolve(assemble_hamiltonian_real(m, s, m.idle_frequencies()), eopts);
    const LabeledSpectrum ls = label_eigenstates(sp, s, opts.label_max_total);

    std::optional<CzParameters> warm;
    SpectatorPoint best;
    best.infidelity = 2.0;
    for (double sigma_c : opts.sigma_c_grid) {
      CzOptimizeOptions co;
      co.tau = opts.tau;
      co.sigma_q = opts.sigma_q;
      co.seed_sigma_c = sigma_c;
      co.vary_sigma_c = false;
      co.search_solver = opts.search_solver;
      co.final_solver = opts.final_solver;
      co.nm.max_evals = opts.nm_evals;
      co.final_sample_points = 120;
      co.qubit_a = opts.qubit_a;
      co.qubit_b = opts.qubit_b;
      if (warm) {
        CzParameters w = *warm;
        w.sigma_c = sigma_c;
        co.warm_start = w;
      }
      const CzOptimizeResult r = optimize_cz(m, ls, co);
      warm = r.params;

      SpectatorPoint pt;
      pt.n_qubits = static_cast<int>(m.qubit_labels().size());
      pt.sigma_c = sigma_c;
      pt.infidelity = r.infidelity;
      pt.params = r.params;
      pt.leakage = r.gate.leakage;
      const Eigen::Index last = r.gate.populations.cols() - 1;
      for (Eigen::Index l = 0; l < r.gate.populations.rows(); ++l)
        pt.end_occupation.push_back(r.gate.populations(l, last));
      for (std::size_t l = 0; l < m.modes.size(); ++l) {
        const std::string& lbl = m.modes[l].label;
        if (lbl[0] == 'q' && lbl != opts.qubit_a && lbl != opts.qubit_b)
          pt.max_spectator_delta = std::max(pt.max_spectator_delta, pt.leakage.delta[l]);
      }
      study.points.push_back(pt);
      if (pt.infidelity < best.infidelity) best = pt;
    }
    study.best.push_back(best);
  }
  return study;
}

}  // namespace ucsim
