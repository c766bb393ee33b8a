#pragma once

#include <map>
#include <string>
#include <vector>

#include "ucsim/model.hpp"
#include "ucsim/types.hpp"

namespace ucsim {

struct Spectrum {
  VectorXd values;   // ascending
  MatrixXcd vectors; // columns aligned with values
};

struct EigensolveOptions {
  int k = -1;                  // number of lowest pairs; <0 means all (dense only)
  std::size_t dense_cap = 4096;
  double residual_tol = 1e-9;  // relative to the spectral scale
  int max_basis = 0;           // Lanczos basis cap; 0 chooses automatically
  unsigned seed = 12345;
};

Spectrum eigensolve(const SpMat& h, const EigensolveOptions& opts = {});
Spectrum eigensolve(const SpMatReal& h, const EigensolveOptions& opts = {});

// Eigenstates tagged by the local Fock label of maximal overlap, resolved as a
// globally optimal assignment over all labels with at most max_total quanta.
struct LabeledSpectrum {
  FockSpace space;
  std::vector<std::vector<int>> labels;
  VectorXd values;
  MatrixXcd vectors;  // dim x n_labels
  VectorXd overlap2;  // assignment weight |<label|state>|^2 per labeled state
  std::vector<int> weak;  // label indices with overlap2 < 0.5

  int find(const std::vector<int>& occ) const;
  int require(const std::vector<int>& occ) const;
  double energy(const std::vector<int>& occ) const;
  VectorXcd state(const std::vector<int>& occ) const;
};

LabeledSpectrum label_eigenstates(const Spectrum& sp, const FockSpace& s, int max_total);

// Fock-basis stand-in for models operated at an exact resonance, where
// overlap labeling is ill-defined: identity vectors, bare diagonal energies.
LabeledSpectrum bare_spectrum(const SystemModel& m);

// Static dispersive shift zeta = (E11 - E01) - (E10 - E00) between two modes,
// rad/ns, from labeled energies (all other modes in their ground state).
double zz_coupling(const LabeledSpectrum& ls, int mode_a, int mode_b);

struct ZzReport {
  struct Pair {
    std::string a, b;
    double zeta;  // rad/ns
  };
  std::vector<Pair> pairs;
  double max_abs() const;
  double get(const std::string& a, const std::string& b) const;
};

struct IdleOptions {
  double window_lo = 0.0;  // rad/ns; 0 selects 2*pi*3.0
  double window_hi = 0.0;  // rad/ns; 0 selects 120 MHz below min(omega_q, omega_c)
  double zz_tol = two_pi * 1e-6;  // 1 kHz
  int scan_points = 28;
  int max_iter = 80;
  std::size_t dense_cap = 4096;
  int lanczos_max_basis = 0;
};

struct IdleResult {
  std::map<std::string, double> coupler_omega;  // root per coupler, rad/ns
  ZzReport reduced;       // center-qubit zeta on each reduced 3-mode model
  ZzReport verification;  // all qubit/center pairs on the full cell
  std::vector<std::string> warnings;
};

// Per-coupler root find of the center-qubit zeta on the (qj, cj, c) reduced
// cell, then a full-cell verification sweep over every qubit/center pair.
IdleResult find_idle_configuration(const SystemModel& m, const IdleOptions& opts = {});

// zeta landscape of the two-qubit sub-cell versus both coupler frequencies.
struct ZzScanPoint {
  double wc1, wc2;          // rad/ns
  double zq1c, zq2c, zq1q2; // rad/ns
};
std::vector<ZzScanPoint> zz_landscape(const SystemModel& m,
                                      const std::vector<double>& wc1_grid,
                                      const std::vector<double>& wc2_grid);

}  // namespace ucsim
