#include "ucsim/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ucsim {

namespace {
constexpr double sqrt2 = 1.41421356237309504880;
}

double FlatTopPulse::buffer() const { return 2.0 * sqrt2 * sigma; }
double FlatTopPulse::total() const { return tau_c + 2.0 * buffer(); }

double FlatTopPulse::value(double t) const {
  if (!(sigma > 0.0)) throw PhysicsError("flat-top pulse needs sigma > 0");
  if (tau_c < 0.0) throw PhysicsError("flat-top pulse needs tau_c >= 0");
  double tb = buffer();
  return 0.5 * amplitude *
         (std::erf((t - tb) / (sqrt2 * sigma)) - std::erf((t - tau_c - tb) / (sqrt2 * sigma)));
}

double GaussianDrive::envelope(double t) const {
  if (!(sigma > 0.0)) throw PhysicsError("drive envelope needs sigma > 0");
  double u = (t - 0.5 * duration) / sigma;
  return amplitude * std::exp(-0.5 * u * u);
}

double rotation_angle(const GaussianDrive& d) {
  if (!(d.sigma > 0.0) || !(d.duration > 0.0))
    throw PhysicsError("rotation_angle needs positive sigma and duration");
  return d.sigma * d.amplitude * std::sqrt(two_pi) *
         std::erf(d.duration / (2.0 * sqrt2 * d.sigma));
}

Eigen::Matrix2cd ideal_single_qubit_unitary(double theta, double phi) {
  Eigen::Matrix2cd u;
  double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  u << cd(c, 0.0), -std::exp(iu * phi) * s, std::exp(-iu * phi) * s, cd(c, 0.0);
  return u;
}

void PulseSchedule::validate() const {
  if (!(duration > 0.0)) throw PhysicsError("schedule duration must be positive");
  if (n_modes == 0) throw PhysicsError("schedule is not bound to a model");
  for (const auto& f : flux) {
    if (f.mode < 0 || f.mode >= static_cast<int>(n_modes))
      throw PhysicsError("flux entry references a mode outside the model");
    if (f.start < -1e-12 || f.start + f.pulse.total() > duration + 1e-9)
      throw PhysicsError("flux pulse extends outside the schedule window");
  }
  for (const auto& d : drives) {
    if (d.mode < 0 || d.mode >= static_cast<int>(n_modes))
      throw PhysicsError("drive entry references a mode outside the model");
    if (d.start < -1e-12 || d.start + d.drive.duration > duration + 1e-9)
      throw PhysicsError("drive extends outside the schedule window");
  }
}

std::vector<int> PulseSchedule::driven_modes() const {
  std::set<int> s;
  for (const auto& d : drives) s.insert(d.mode);
  return std::vector<int>(s.begin(), s.end());
}

void PulseSchedule::frequencies_at(double t, const std::vector<double>& idle,
                                   std::vector<double>& omega_out) const {
  if (idle.size() != n_modes) throw PhysicsError("idle frequency count does not match model");
  omega_out = idle;
  for (const auto& f : flux) omega_out[f.mode] += f.pulse.value(t - f.start);
}

void PulseSchedule::drive_coefficients_at(double t, std::vector<double>& coeff_out) const {
  auto dm = driven_modes();
  coeff_out.assign(dm.size(), 0.0);
  for (const auto& d : drives) {
    std::size_t slot =
        std::lower_bound(dm.begin(), dm.end(), d.mode) - dm.begin();
    double tl = t - d.start;
    if (tl < 0.0 || tl > d.drive.duration) continue;
    coeff_out[slot] += d.drive.envelope(tl) * std::cos(d.drive.omega_d * t + d.drive.phase);
  }
}

PulseSchedule schedule_cz(const SystemModel& m, double tau, double sigma_q, double sigma_c,
                          const CzAmplitudes& amp) {
  if (!(sigma_q > 0.0) || !(sigma_c > 0.0))
    throw PhysicsError("schedule_cz needs positive edge widths");
  double tb_q = 2.0 * sqrt2 * sigma_q;
  double tb_c = 2.0 * sqrt2 * sigma_c;
  if (tau < 2.0 * tb_q + 2.0 * tb_c)
    throw PhysicsError("schedule_cz: tau too short for the qubit and coupler buffers");

  PulseSchedule s;
  s.duration = tau;
  s.n_modes = m.modes.size();
  double q_tau_c = tau - 2.0 * tb_q;
  double c_tau_c = tau - 2.0 * tb_q - 2.0 * tb_c;
  s.flux.push_back({m.require("q1"), 0.0, {amp.q1, sigma_q, q_tau_c}});
  s.flux.push_back({m.require("q2"), 0.0, {amp.q2, sigma_q, q_tau_c}});
  s.flux.push_back({m.require("c1"), tb_q, {amp.c1, sigma_c, c_tau_c}});
  s.flux.push_back({m.require("c2"), tb_q, {amp.c2, sigma_c, c_tau_c}});
  s.validate();
  return s;
}

PulseSchedule schedule_drive(const SystemModel& m, const std::string& mode, double tau,
                             double sigma, double amplitude, double omega_d, double phase) {
  PulseSchedule s;
  s.duration = tau;
  s.n_modes = m.modes.size();
  s.drives.push_back({m.require(mode), 0.0, {amplitude, sigma, tau, omega_d, phase}});
  s.validate();
  return s;
}

}  // namespace ucsim
