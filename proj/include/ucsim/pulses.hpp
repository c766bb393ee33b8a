#pragma once

#include <vector>

#include "ucsim/model.hpp"
#include "ucsim/types.hpp"

namespace ucsim {

// Error-function-bounded flat-top: rises over a buffer 2*sqrt(2)*sigma,
// holds near A for tau_c, falls symmetrically. Total area equals A*tau_c.
struct FlatTopPulse {
  double amplitude = 0.0;  // plateau value, rad/ns
  double sigma = 1.0;      // edge width, ns
  double tau_c = 0.0;      // flat duration, ns

  double buffer() const;  // 2*sqrt(2)*sigma
  double total() const;   // tau_c + 2*buffer()
  double value(double t) const;  // t measured from pulse start
};

// Gaussian charge-drive envelope with carrier cos(omega_d t + phase); the
// envelope is centered in [0, duration], the carrier runs on schedule time.
struct GaussianDrive {
  double amplitude = 0.0;  // rad/ns
  double sigma = 1.0;      // envelope width, ns
  double duration = 0.0;   // ns
  double omega_d = 0.0;    // rad/ns
  double phase = 0.0;      // rad

  double envelope(double t) const;  // t measured from drive start
};

// Rotation angle theta = sigma*A*sqrt(2*pi)*erf(duration/(2*sqrt(2)*sigma))
// accumulated by the envelope over its window.
double rotation_angle(const GaussianDrive& d);

// Ideal single-qubit rotation U(theta, phi) on {|0>, |1>}.
Eigen::Matrix2cd ideal_single_qubit_unitary(double theta, double phi);

struct PulseSchedule {
  struct FluxEntry {
    int mode = -1;
    double start = 0.0;
    FlatTopPulse pulse;
  };
  struct DriveEntry {
    int mode = -1;
    double start = 0.0;
    GaussianDrive drive;
  };

  double duration = 0.0;
  std::size_t n_modes = 0;
  std::vector<FluxEntry> flux;
  std::vector<DriveEntry> drives;

  void validate() const;
  std::vector<int> driven_modes() const;
  // omega_out[m] = idle[m] + sum of flux pulse values active at t
  void frequencies_at(double t, const std::vector<double>& idle,
                      std::vector<double>& omega_out) const;
  // coefficient of i*(adag-a) per driven mode, ordered like driven_modes()
  void drive_coefficients_at(double t, std::vector<double>& coeff_out) const;
};

// Amplitudes of the four flux pulses of a CZ schedule, rad/ns.
struct CzAmplitudes {
  double q1 = 0.0;
  double q2 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

// CZ flux schedule on (q1, q2, c1, c2): qubit pulses span [0, tau] with edge
// width sigma_q; coupler pulses are inset by one qubit buffer on each side
// with edge width sigma_c.
PulseSchedule schedule_cz(const SystemModel& m, double tau, double sigma_q, double sigma_c,
                          const CzAmplitudes& amp);

// Single-qubit drive schedule: one Gaussian charge drive on `mode`.
PulseSchedule schedule_drive(const SystemModel& m, const std::string& mode, double tau,
                             double sigma, double amplitude, double omega_d, double phase);

}  // namespace ucsim
