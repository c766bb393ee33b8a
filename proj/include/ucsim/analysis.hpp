#pragma once

#include <string>
#include <vector>

#include "ucsim/calibrate.hpp"
#include "ucsim/model.hpp"
#include "ucsim/propagate.hpp"

namespace ucsim {

// sum of |amplitude|^4 over the local Fock basis; 1 for a basis state,
// 1/dim for full delocalization
double inverse_participation_ratio(const VectorXcd& state, const FockSpace& s);

// <n_l> for every mode of the cell, model order
std::vector<double> mode_occupations(const VectorXcd& state, const FockSpace& s);

struct OccupationEntry {
  std::vector<int> qubit_label;     // occupation label over the qubit modes
  int group = 0;                    // rounded total excitation number
  std::vector<double> occupation;   // <n_l> per mode, model order
  double coupler_occupation = 0.0;  // center + tunable couplers combined
  double total = 0.0;               // sum over all modes
  double ipr = 0.0;
};

struct OccupationMap {
  std::vector<std::string> mode_labels;
  std::vector<std::string> qubit_modes;
  std::vector<OccupationEntry> entries;  // all 2^N computational states
};

// per-computational-state occupations and localization, grouped by the
// rounded total excitation number
OccupationMap occupation_map(const LabeledSpectrum& ls, const SystemModel& m);

struct LeakageReport {
  std::vector<std::string> mode_labels;
  std::vector<double> delta;        // |<n_l>(end) - <n_l>(start)| per mode
  double center_residual = 0.0;     // <n_c>(end) - <n_c>(start)
  double max_qubit_delta = 0.0;
  double max_coupler_delta = 0.0;   // tunable couplers only
};

// occupation bookkeeping between the first and last trajectory snapshots
LeakageReport leakage_report(const Trajectory& traj, const SystemModel& m,
                             const FockSpace& s);

}  // namespace ucsim
