#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ucsim/model.hpp"

namespace ucsim {

// Bare parameters of the five-mode gate cell {q1, q2, c, c1, c2} at a given
// set of instantaneous frequencies. Couplings are signed, g = beta*sqrt(w w').
struct CellParams {
  double omega_q1 = 0, omega_q2 = 0, omega_c = 0, omega_c1 = 0, omega_c2 = 0;
  double alpha_q1 = 0, alpha_q2 = 0, alpha_c = 0, alpha_c1 = 0, alpha_c2 = 0;
  double g_cq1 = 0, g_cq2 = 0;    // qubit-center
  double g_q1c1 = 0, g_q2c2 = 0;  // qubit-own-coupler
  double g_cc1 = 0, g_cc2 = 0;    // center-coupler
};

// Extracts the gate-cell parameters for the pair (qa, qb) from a full model.
// qa plays the higher-frequency role. omega holds per-mode frequencies
// (rad/ns) indexed like m.modes; couplings to modes outside the cell are
// dropped.
CellParams cell_params(const SystemModel& m, const std::vector<double>& omega,
                       const std::string& qa = "q1",
                       const std::string& qb = "q2");

// Coupler-eliminated description of the cell: dressed frequencies and the
// effective XY couplings left between the qubits and the center mode.
struct EffectiveModel {
  double omega_q1 = 0, omega_q2 = 0, omega_c = 0;  // dressed, rad/ns
  double omega_c1 = 0, omega_c2 = 0;               // dressed coupler freqs
  double alpha_q1 = 0, alpha_q2 = 0, alpha_c = 0;  // carried over unchanged
  double g_cq1 = 0, g_cq2 = 0;                     // effective couplings
  double g_c1c2 = 0;                               // coupler-coupler residual
};

// Second-order elimination of the tunable couplers. Every coupler edge must
// sit in the dispersive regime |g/Delta| < guard, else PhysicsError naming
// the offending pair.
EffectiveModel schrieffer_wolff(const CellParams& p, double guard = 0.3);
EffectiveModel schrieffer_wolff(const SystemModel& m,
                                const std::vector<double>& omega,
                                double guard = 0.3);

// Single- and two-excitation blocks of the effective Hamiltonian in the
// bases {|001>,|010>,|100>} and {|200>,|110>,|101>} (ket order |n_q1 n_q2 n_c>).
struct ManifoldModel {
  Eigen::Matrix3cd h1;
  Eigen::Matrix3cd h2;
  double omega_rabi = 0;  // sqrt(2 g1^2 + g2^2), two-excitation cycling rate
};

ManifoldModel manifold_hamiltonians(const EffectiveModel& eff);

// Closed-form propagators of the two blocks, valid only at the gate resonance
// (equal h1 upper diagonal, equal h2 diagonal). Off resonance by more than
// rel_tol*omega_rabi raises PhysicsError pointing at jacobi_propagator. The
// single-excitation block drops the off-resonant g1 coupling.
struct ManifoldPropagators {
  Eigen::Matrix3cd u1;
  Eigen::Matrix3cd u2;
};

ManifoldPropagators analytic_propagators(const ManifoldModel& mm, double t,
                                         double rel_tol = 1e-6);

// Deviation of |g1|/|g2| from the sqrt(3/2) ratio that closes both manifold
// cycles simultaneously.
struct ResonanceCheck {
  bool pass = false;
  double deviation = 0;  // |g1|/|g2| - sqrt(3/2)
};

ResonanceCheck resonance_ratio_check(double g1, double g2, double tol = 1e-9);

// Conditional phase collected by the square-pulse gate after time t, given
// the initial-state phases theta_jk. sgn(0) := +1 keeps this total.
double conditional_phase_analytic(double g2, double t, double theta00 = 0,
                                  double theta01 = 0, double theta10 = 0,
                                  double theta11 = 0);

// Two Jacobi rotations of the single-excitation block: first the resonant
// {|001>,|010>} pair, then {lambda_plus0, |100>}; the residual g1*v12/sqrt(2)
// coupling is dropped.
struct JacobiModel {
  double omega_a = 0, omega_b = 0, g1 = 0, g2 = 0;
  double lambda_minus0 = 0, lambda_plus0 = 0;  // first-rotation levels
  double lambda_minus1 = 0, lambda_plus1 = 0;  // second-rotation levels
  double v11 = 0, v12 = 0;                     // second-rotation weights
  double lambda_bar = 0;                       // (lambda_plus1+lambda_minus0)/2
  double delta = 0;                            // lambda_plus1-lambda_minus0
  double varpi = 0;  // sqrt(delta^2 + 2 g1^2 v11^2)

  double r(double t) const;    // residual-population envelope
  double c(double t) const;    // swapped-population envelope, r^2+c^2=1
  double phi(double t) const;  // relative phase, principal branch
};

// Requires omega_a > omega_b.
JacobiModel jacobi_model(double omega_a, double omega_b, double g1, double g2);

// Approximate single-excitation propagator V U_D(t) V^dag in the basis
// {|001>,|010>,|100>}; reduces to the resonant closed form when g1 = 0.
Eigen::Matrix3cd jacobi_propagator(const JacobiModel& jm, double t);
Eigen::Matrix3cd jacobi_propagator(double omega_a, double omega_b, double g1,
                                   double g2, double t);

// Leading-order matrix elements of the q1 charge operator between labeled
// eigenstates |n_q1 n_q2 n_c>; these set the strength of drive-induced
// crosstalk and leakage during a single-qubit gate on q1.
struct CrosstalkAmplitudes {
  cd center_from_ground;      // <001| q |000>
  cd spectator_from_ground;   // <010| q |000>
  cd center_conditional;      // <101| q |100>
  cd spectator_conditional;   // <110| q |100>
  cd leakage_from_center;     // <200| q |001>
  cd leakage_from_spectator;  // <200| q |010>
};

CrosstalkAmplitudes crosstalk_matrix_elements(const CellParams& p,
                                              double charge_zpf = 1.0,
                                              double guard = 0.3);

// Duration of the simultaneous-swap gate versus the sequential
// MOVE-CZ-MOVE protocol at the same peak coupling g1.
struct DurationComparison {
  double tau_new = 0;  // sqrt(3/2) pi / g1
  double tau_mcm = 0;  // (sqrt(2)+1)/sqrt(2) pi / g1
  double ratio = 0;    // tau_mcm / tau_new = (sqrt(2)+1)/sqrt(3)
};

DurationComparison duration_comparison(double g1);

}  // namespace ucsim
