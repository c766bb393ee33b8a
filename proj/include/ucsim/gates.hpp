#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ucsim/analysis.hpp"
#include "ucsim/calibrate.hpp"
#include "ucsim/effective.hpp"
#include "ucsim/model.hpp"
#include "ucsim/optim.hpp"
#include "ucsim/propagate.hpp"
#include "ucsim/pulses.hpp"

namespace ucsim {

// ---------------------------------------------------------------------------
// noise description

// thermal occupation of a bath at the given mode frequency (rad/ns) and
// temperature (kelvin); 0 at T = 0
double thermal_occupation(double omega, double kelvin);

// Per-mode decoherence times; a zero time disables the corresponding channel.
struct NoiseSpec {
  struct Entry {
    double t1 = 0.0;       // relaxation time, ns
    double t2_star = 0.0;  // pure-dephasing time 1/kappa_phi, ns
    double n_bar = 0.0;    // thermal occupation of the mode's bath
  };
  std::vector<Entry> entries;  // one per mode, model order

  static NoiseSpec uniform(const SystemModel& m, double t1, double t2_star);
  // fills n_bar from a bath temperature at each mode's idle frequency
  void set_temperature(const SystemModel& m, double kelvin);
  std::vector<ModeNoise> mode_noise() const;
  double max_rate() const;  // largest of all gamma, kappa_phi (1/ns)
};

// ---------------------------------------------------------------------------
// state comparison

// Re Tr[rho rho_ideal] for a pure target. Errors if trace(rho) exceeds 1 by
// more than 1e-6 or rho_ideal is not (normalized and) pure.
double state_fidelity(const MatrixXcd& rho, const MatrixXcd& rho_ideal);

// ---------------------------------------------------------------------------
// computational-subspace bookkeeping (ordering {00, 01, 10, 11}, second
// index = qubit_b)

// sum_jk c_jk |e_jk>, bath modes in the ground state
VectorXcd embed_computational(const SystemModel& m, const LabeledSpectrum& ls,
                              const std::string& qubit_a, const std::string& qubit_b,
                              const Eigen::Vector4cd& amplitudes);

// partial trace of a pure state onto the two qubit modes, taken label-wise in
// the dressed eigenbasis; trace_out receives the retained weight
Eigen::Matrix4cd project_two_qubit(const VectorXcd& psi, const SystemModel& m,
                                   const LabeledSpectrum& ls, const std::string& qubit_a,
                                   const std::string& qubit_b, double* trace_out = nullptr);

// same reduction for a full density matrix
Eigen::Matrix4cd project_two_qubit_density(const MatrixXcd& rho, const SystemModel& m,
                                           const LabeledSpectrum& ls,
                                           const std::string& qubit_a,
                                           const std::string& qubit_b,
                                           double* trace_out = nullptr);

// single-mode reduction of a pure state, same label-wise convention
Eigen::Matrix2cd project_single_qubit(const VectorXcd& psi, const SystemModel& m,
                                      const LabeledSpectrum& ls, const std::string& mode,
                                      double* trace_out = nullptr);

// conjugation by diag(1, e^{i p01}, e^{i p10}, e^{i (p01+p10)}): removes the
// single-qubit phases so that ideal-process coherences come out real positive
Eigen::Matrix4cd remove_single_qubit_phases(const Eigen::Matrix4cd& rho, double phi_01,
                                            double phi_10);

// arg<00|rho|11> - arg<00|rho|10> - arg<00|rho|01>, wrapped to (-pi, pi]
double conditional_phase(const Eigen::Matrix4cd& rho);

// ---------------------------------------------------------------------------
// CZ gate executor

struct CzRunOptions {
  MagnusConfig solver;           // dt defaults to the flux-pulse tier
  int sample_points = 0;         // >0 records that many interior snapshots
  bool phases_from_aux = true;   // phase references from the two dedicated
                                 // (|00>+|10>)/sqrt2 and (|00>+|01>)/sqrt2 runs;
                                 // false reads them off the main run
  std::string qubit_a = "q1";
  std::string qubit_b = "q2";
  CouplingForm form = CouplingForm::full;
};

struct GateResult {
  VectorXcd final_state;
  Eigen::Matrix4cd rho_2q;       // projected, phase-corrected
  double trace_2q = 0.0;         // computational-subspace weight
  double fidelity = 0.0;         // Tr[rho_2q U_cz rho_in U_cz^dag]
  double phi_01 = 0.0;           // single-qubit phase references
  double phi_10 = 0.0;
  double phi_cp = 0.0;           // conditional phase at the end of the gate
  Eigen::Vector4cd initial_amplitudes;
  LeakageReport leakage;
  // filled when sample_points > 0:
  std::vector<double> times;
  std::vector<double> phi_cp_trace;  // unwrapped along the grid
  MatrixXd populations;              // n_modes x n_samples
  std::vector<std::vector<int>> tracked_labels;  // labeled states, <= 2 quanta
  MatrixXd tracked_populations;                  // n_tracked x n_samples
};

// Evolves sum c_jk |e_jk> under the schedule and scores the projected
// two-qubit state against the ideal CZ. amplitudes must be normalized.
GateResult run_cz(const SystemModel& m, const LabeledSpectrum& ls,
                  const PulseSchedule& schedule, const Eigen::Vector4cd& amplitudes,
                  const CzRunOptions& opts = {});

inline Eigen::Vector4cd cz_probe_state() {
  return Eigen::Vector4cd::Constant(cd(0.5, 0.0));
}

// ---------------------------------------------------------------------------
// CZ pulse calibration

struct CzParameters {
  double a_q1 = 0.0;     // flux amplitudes, rad/ns
  double a_q2 = 0.0;
  double a_c1 = 0.0;
  double a_c2 = 0.0;
  double sigma_c = 3.0;  // coupler edge width, ns
};

// Resonance-targeted starting point: q2 meets the dressed center frequency,
// q1 holds the |110>/|200> degeneracy, couplers set g2_eff = pi/tau_eff with
// g1_eff = sqrt(3/2) g2_eff.
CzParameters seed_cz_parameters(const SystemModel& m, double tau, double sigma_q,
                                double sigma_c, const std::string& qubit_a = "q1",
                                const std::string& qubit_b = "q2");

// Area-matched refinement of the seed: re-solves the same fixed point, but the
// coupler amplitudes now target the rotation areas accumulated over the full
// scheduled pulse, integral |g2_eff| dt = pi and integral |g1_eff| dt =
// sqrt(3/2) pi.  The plateau-rate seed underrotates because the effective
// couplings grow superlinearly along the pulse edges; matching the integrated
// areas while re-imposing the plateau resonances each iteration removes that
// deficit without detuning the qubits.
CzParameters area_matched_cz_parameters(const SystemModel& m, double tau,
                                        double sigma_q, double sigma_c,
                                        const std::string& qubit_a = "q1",
                                        const std::string& qubit_b = "q2");

struct CzOptimizeOptions {
  CzOptimizeOptions();

  double tau = 60.0;
  double sigma_q = 1.0;
  double seed_sigma_c = 3.0;
  bool vary_sigma_c = true;    // false: four-amplitude search at fixed sigma_c
  MagnusConfig search_solver;  // coarse dt inside the search
  MagnusConfig final_solver;   // fine dt for the reported gate
  NelderMeadOptions nm;
  int final_sample_points = 240;
  std::string qubit_a = "q1";
  std::string qubit_b = "q2";
  std::optional<CzParameters> warm_start;
};

struct CzOptimizeResult {
  CzParameters params;
  double infidelity = 0.0;         // at final_solver resolution, aux phases
  double search_infidelity = 0.0;  // best objective value during the search
  double seed_infidelity = 0.0;
  int evaluations = 0;
  std::vector<std::pair<int, double>> trace;  // improvement history
  PulseSchedule schedule;
  GateResult gate;                 // final run with sampling
};

CzOptimizeResult optimize_cz(const SystemModel& m, const LabeledSpectrum& ls,
                             const CzOptimizeOptions& opts = {});

// ---------------------------------------------------------------------------
// single-qubit gates

struct DriveSpec {
  std::string mode;
  double amplitude = 0.0;  // rad/ns
  double omega_d = 0.0;    // rad/ns
  double phase = 0.0;      // rad
  double tau = 20.0;       // ns
  double sigma = 4.0;      // envelope width, ns
};

struct SingleQubitResult {
  VectorXcd final_state;
  Eigen::Matrix2cd rho_1q;  // coherence phase aligned (virtual-Z frame)
  double trace_1q = 0.0;
  double fidelity = 0.0;
  LeakageReport leakage;
};

// Applies the listed charge drives simultaneously and scores the reduced
// state of `target` against U(theta, phi) acting on its initial reduced
// state. Coherence phases of both states are aligned before comparison, so
// the score is insensitive to the frame (virtual-Z) but penalizes population
// and coherence-magnitude errors and leakage.
SingleQubitResult run_single_qubit(const SystemModel& m, const LabeledSpectrum& ls,
                                   const std::string& target,
                                   const std::vector<DriveSpec>& drives, double theta,
                                   double phi, const VectorXcd& initial,
                                   const MagnusConfig& solver);

struct SqgOptimizeOptions {
  SqgOptimizeOptions();

  std::string target = "q1";
  DriveSpec drive;                  // the drive being tuned; zero amplitude /
                                    // omega_d are seeded automatically
  std::vector<DriveSpec> background;  // held fixed during the search
  double theta = pi;
  double phi = 0.0;
  MagnusConfig solver;              // driven-evolution dt tier
  VectorXcd initial;                // empty selects the labeled vacuum
  double omega_halfwidth = two_pi * 3.0e-3;  // initial bracket half-widths
  double amp_rel_halfwidth = 0.25;
  double omega_tol = two_pi * 1.0e-6;  // ~1 kHz
  double amp_tol = 1.0e-4;             // rad/ns
  int max_rounds = 50;
};

struct SqgOptimizeResult {
  double omega_d = 0.0;
  double amplitude = 0.0;
  double infidelity = 0.0;
  int evaluations = 0;
  int rounds = 0;
  SingleQubitResult gate;
};

// Alternating golden-section refinement of (omega_d, amplitude), seeded from
// the labeled transition frequency and the small-signal angle formula. A
// bracket whose minimum sits on the edge is widened once; a second failure
// raises NumericsError.
SqgOptimizeResult optimize_single_qubit(const SystemModel& m, const LabeledSpectrum& ls,
                                        const SqgOptimizeOptions& opts = {});

// ---------------------------------------------------------------------------
// average gate fidelity

// Linear action of a gate on the projected two-qubit subspace, assembled from
// the four computational-basis evolutions (pure route) or the sixteen
// basis-pair evolutions (Lindblad route). Column-stacked 16x16 superoperator;
// the single-qubit phase correction is already folded in.
struct TwoQubitProcess {
  Eigen::Matrix<cd, 16, 16> super;
  double phi_01 = 0.0;
  double phi_10 = 0.0;

  Eigen::Matrix4cd apply(const Eigen::Matrix4cd& rho) const;
};

// Schroedinger propagation of the four basis states; verifies linearity on a
// superposition probe and errors above linearity_tol.
TwoQubitProcess unitary_process(const SystemModel& m, const LabeledSpectrum& ls,
                                const PulseSchedule& schedule, const MagnusConfig& solver,
                                const std::string& qubit_a = "q1",
                                const std::string& qubit_b = "q2",
                                CouplingForm form = CouplingForm::full,
                                double linearity_tol = 1e-8);

// Lindblad propagation of the sixteen basis pairs, phases taken from the
// reference process when given (so coherent parts cancel in comparisons).
TwoQubitProcess lindblad_process(const SystemModel& m, const LabeledSpectrum& ls,
                                 const PulseSchedule& schedule, const NoiseSpec& noise,
                                 const MagnusConfig& solver,
                                 const std::string& qubit_a = "q1",
                                 const std::string& qubit_b = "q2",
                                 CouplingForm form = CouplingForm::full,
                                 const TwoQubitProcess* phase_reference = nullptr);

// Pauli-basis average fidelity of the process against an ideal unitary
// (d = 4): (1/16)[Tr(G1(I)G2(I)) + (1/5) sum_j Tr(G1(f_j)G2(f_j))].
double average_gate_fidelity(const TwoQubitProcess& process,
                             const Eigen::Matrix4cd& ideal_unitary);

// Haar-state Monte Carlo estimate of the same quantity with its standard
// error; agreement within a few sigma cross-checks the Pauli assembly.
struct MonteCarloFidelity {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};
MonteCarloFidelity average_fidelity_monte_carlo(const TwoQubitProcess& process,
                                                const Eigen::Matrix4cd& ideal_unitary,
                                                int samples, unsigned seed);

inline Eigen::Matrix4cd cz_unitary() {
  Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
  u(3, 3) = cd(-1.0, 0.0);
  return u;
}

// ---------------------------------------------------------------------------
// decoherence during the gate

// Three-mode resonant-gate stand-in: q2 and the center mode degenerate, q1
// offset by its own anharmonicity, static RWA couplings g1 = sqrt(3/2) g2
// switched on for the whole window tau = pi/g2.
struct EffectiveGateModel {
  SystemModel model;
  double g2 = 0.0;
  double tau = 0.0;
};

EffectiveGateModel effective_gate_model(double omega_c, double alpha_q1, double alpha_q2,
                                        double alpha_c, double g2, int levels = 3);

struct LindbladStudy {
  double f_bar_noisy = 0.0;
  double f_bar_noiseless = 0.0;
  double coherent_floor = 0.0;   // 1 - f_bar_noiseless
  double incoherent = 0.0;       // f_bar_noiseless - f_bar_noisy
  bool weak_noise_ok = true;     // max rate * tau <= 0.1
};

// Route one: average fidelity from full Lindblad propagation, with the
// noiseless process evaluated under the same phase correction so the
// coherent error floor subtracts out.
LindbladStudy lindblad_decoherence_study(const SystemModel& m, const LabeledSpectrum& ls,
                                         const PulseSchedule& schedule,
                                         const NoiseSpec& noise, const MagnusConfig& solver,
                                         const std::string& qubit_a = "q1",
                                         const std::string& qubit_b = "q2",
                                         CouplingForm form = CouplingForm::rwa);

struct DecoherenceBudget {
  double f_bar = 0.0;
  double coherent_floor = 0.0;
  double incoherent = 0.0;
  std::vector<std::string> channel_labels;
  std::vector<double> per_channel;  // infidelity contribution per jump operator
  bool weak_noise_ok = true;
};

// Route two: first-order interaction-picture integrals over the gate window
// on a static Hamiltonian (dense propagator from its eigendecomposition).
DecoherenceBudget perturbative_decoherence(const SystemModel& m, const NoiseSpec& noise,
                                           double tau, const std::string& qubit_a = "q1",
                                           const std::string& qubit_b = "q2",
                                           int quadrature_points = 200);

// Leading-order closed form for the resonant CZ: infidelity per unit time
// weighted by the fixed rational coefficients of the three cell modes.
// Order within the arrays: {q1, q2, c}. Zero times disable a channel.
double closed_form_decoherence_infidelity(double tau, const std::array<double, 3>& t1,
                                          const std::array<double, 3>& t2_star,
                                          const std::array<double, 3>& n_bar = {0.0, 0.0,
                                                                                0.0});

// ---------------------------------------------------------------------------
// spectator scaling

struct SpectatorOptions {
  SpectatorOptions();

  double tau = 60.0;
  double sigma_q = 1.0;
  std::vector<double> sigma_c_grid = {3.4};
  MagnusConfig search_solver;
  MagnusConfig final_solver;
  int nm_evals = 120;
  int label_max_total = 3;
  std::string qubit_a = "q1";
  std::string qubit_b = "q2";
};

struct SpectatorPoint {
  int n_qubits = 0;
  double sigma_c = 0.0;
  double infidelity = 0.0;
  CzParameters params;
  LeakageReport leakage;
  std::vector<double> end_occupation;  // per mode, model order
  double max_spectator_delta = 0.0;    // spectator qubits only
};

struct SpectatorStudy {
  std::vector<SpectatorPoint> points;  // every (model, sigma_c) evaluation
  std::vector<SpectatorPoint> best;    // best sigma_c per model
};

// Re-optimizes the q1-q2 gate amplitudes on each supplied cell (increasing
// qubit count, spectators idle) for every sigma_c in the grid.
SpectatorStudy spectator_study(const std::vector<SystemModel>& models,
                               const SpectatorOptions& opts = {});

}  // namespace ucsim
