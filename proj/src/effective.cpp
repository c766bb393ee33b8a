#include "ucsim/effective.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ucsim {

namespace {

double edge_beta(const SystemModel& m, int a, int b) {
  for (const auto& c : m.couplings) {
    if ((c.a == a && c.b == b) || (c.a == b && c.b == a)) return c.beta;
  }
  return 0.0;
}

double edge_g(const SystemModel& m, const std::vector<double>& omega, int a,
              int b) {
  double beta = edge_beta(m, a, b);
  return beta == 0.0 ? 0.0 : coupling_strength(beta, omega[a], omega[b]);
}

void check_dispersive(const char* pair, double g, double delta, double guard) {
  if (std::abs(g) >= guard * std::abs(delta)) {
    std::ostringstream os;
    os << "coupler pair " << pair << " outside the dispersive regime: |g/Delta| = "
       << std::abs(g) / std::abs(delta) << " >= " << guard;
    throw PhysicsError(os.str());
  }
}

void check_gap(const char* name, double delta, double min_gap) {
  if (std::abs(delta) < min_gap) {
    std::ostringstream os;
    os << "frequency gap " << name << " too small for the perturbative "
       << "expansion: |delta| = " << std::abs(delta) << " rad/ns";
    throw PhysicsError(os.str());
  }
}

}  // namespace

CellParams cell_params(const SystemModel& m, const std::vector<double>& omega,
                       const std::string& qa, const std::string& qb) {
  if (omega.size() != m.modes.size())
    throw ConfigError("cell_params: frequency vector size mismatch");
  int iq1 = m.require(qa);
  int iq2 = m.require(qb);
  int ic = m.require("c");
  int ic1 = m.require("c" + qa.substr(1));
  int ic2 = m.require("c" + qb.substr(1));

  CellParams p;
  p.omega_q1 = omega[iq1];
  p.omega_q2 = omega[iq2];
  p.omega_c = omega[ic];
  p.omega_c1 = omega[ic1];
  p.omega_c2 = omega[ic2];
  p.alpha_q1 = m.modes[iq1].alpha;
  p.alpha_q2 = m.modes[iq2].alpha;
  p.alpha_c = m.modes[ic].alpha;
  p.alpha_c1 = m.modes[ic1].alpha;
  p.alpha_c2 = m.modes[ic2].alpha;
  p.g_cq1 = edge_g(m, omega, ic, iq1);
  p.g_cq2 = edge_g(m, omega, ic, iq2);
  p.g_q1c1 = edge_g(m, omega, iq1, ic1);
  p.g_q2c2 = edge_g(m, omega, iq2, ic2);
  p.g_cc1 = edge_g(m, omega, ic, ic1);
  p.g_cc2 = edge_g(m, omega, ic, ic2);
  return p;
}

EffectiveModel schrieffer_wolff(const CellParams& p, double guard) {
  const double d_q1c1 = p.omega_q1 - p.omega_c1;
  const double d_q2c2 = p.omega_q2 - p.omega_c2;
  const double d_cc1 = p.omega_c - p.omega_c1;
  const double d_cc2 = p.omega_c - p.omega_c2;
  const double s_q1c1 = p.omega_q1 + p.omega_c1;
  const double s_q2c2 = p.omega_q2 + p.omega_c2;
  const double s_cc1 = p.omega_c + p.omega_c1;
  const double s_cc2 = p.omega_c + p.omega_c2;

  check_dispersive("q1-c1", p.g_q1c1, d_q1c1, guard);
  check_dispersive("q2-c2", p.g_q2c2, d_q2c2, guard);
  check_dispersive("c-c1", p.g_cc1, d_cc1, guard);
  check_dispersive("c-c2", p.g_cc2, d_cc2, guard);

  EffectiveModel eff;
  eff.alpha_q1 = p.alpha_q1;
  eff.alpha_q2 = p.alpha_q2;
  eff.alpha_c = p.alpha_c;

  eff.omega_q1 =
      p.omega_q1 + p.g_q1c1 * p.g_q1c1 * (1.0 / d_q1c1 - 1.0 / s_q1c1);
  eff.omega_q2 =
      p.omega_q2 + p.g_q2c2 * p.g_q2c2 * (1.0 / d_q2c2 - 1.0 / s_q2c2);
  eff.omega_c = p.omega_c + p.g_cc1 * p.g_cc1 * (1.0 / d_cc1 - 1.0 / s_cc1) +
                p.g_cc2 * p.g_cc2 * (1.0 / d_cc2 - 1.0 / s_cc2);
  eff.omega_c1 = p.omega_c1 -
                 p.g_q1c1 * p.g_q1c1 * (1.0 / d_q1c1 + 1.0 / s_q1c1) -
                 p.g_cc1 * p.g_cc1 * (1.0 / d_cc1 + 1.0 / s_cc1);
  eff.omega_c2 = p.omega_c2 -
                 p.g_q2c2 * p.g_q2c2 * (1.0 / d_q2c2 + 1.0 / s_q2c2) -
                 p.g_cc2 * p.g_cc2 * (1.0 / d_cc2 + 1.0 / s_cc2);

  eff.g_cq1 = p.g_cq1 + 0.5 * p.g_q1c1 * p.g_cc1 *
                            (1.0 / d_q1c1 + 1.0 / d_cc1 - 1.0 / s_q1c1 -
                             1.0 / s_cc1);
  eff.g_cq2 = p.g_cq2 + 0.5 * p.g_q2c2 * p.g_cc2 *
                            (1.0 / d_q2c2 + 1.0 / d_cc2 - 1.0 / s_q2c2 -
                             1.0 / s_cc2);
  eff.g_c1c2 = 0.5 * p.g_cc1 * p.g_cc2 *
               (1.0 / d_cc1 + 1.0 / d_cc2 + 1.0 / s_cc1 + 1.0 / s_cc2);

  if (!std::isfinite(eff.g_cq1) || !std::isfinite(eff.g_cq2) ||
      !std::isfinite(eff.g_c1c2))
    throw PhysicsError("coupler elimination produced a non-finite coupling");
  return eff;
}

EffectiveModel schrieffer_wolff(const SystemModel& m,
                                const std::vector<double>& omega,
                                double guard) {
  return schrieffer_wolff(cell_params(m, omega), guard);
}

ManifoldModel manifold_hamiltonians(const EffectiveModel& eff) {
  ManifoldModel mm;
  const double g1 = eff.g_cq1;
  const double g2 = eff.g_cq2;
  mm.h1 << eff.omega_c, g2, g1,  //
      g2, eff.omega_q2, 0.0,     //
      g1, 0.0, eff.omega_q1;
  const double s2 = std::sqrt(2.0);
  mm.h2 << 2.0 * eff.omega_q1 + eff.alpha_q1, 0.0, s2 * g1,  //
      0.0, eff.omega_q1 + eff.omega_q2, g2,                  //
      s2 * g1, g2, eff.omega_q1 + eff.omega_c;
  mm.omega_rabi = std::sqrt(2.0 * g1 * g1 + g2 * g2);
  return mm;
}

ManifoldPropagators analytic_propagators(const ManifoldModel& mm, double t,
                                         double rel_tol) {
  const double omega_c = mm.h1(0, 0).real();
  const double omega_q2 = mm.h1(1, 1).real();
  const double omega_q1 = mm.h1(2, 2).real();
  const double g2 = mm.h1(0, 1).real();
  const double rabi = mm.omega_rabi;

  const double detune1 = std::abs(omega_q2 - omega_c);
  const double detune2 = std::max(
      std::abs(mm.h2(0, 0).real() - mm.h2(2, 2).real()),
      std::abs(mm.h2(1, 1).real() - mm.h2(2, 2).real()));
  const double tol = rel_tol * std::max(rabi, 1e-300);
  if (detune1 > tol || detune2 > tol) {
    std::ostringstream os;
    os << "closed-form propagators require the gate resonance (detunings "
       << detune1 << ", " << detune2
       << " rad/ns); use jacobi_propagator off resonance";
    throw PhysicsError(os.str());
  }

  ManifoldPropagators out;
  const cd ph2 = std::exp(-iu * omega_q2 * t);
  const cd ph1 = std::exp(-iu * omega_q1 * t);
  const double cg = std::cos(g2 * t);
  const double sg = std::sin(g2 * t);
  out.u1 << ph2 * cg, -iu * ph2 * sg, 0.0,  //
      -iu * ph2 * sg, ph2 * cg, 0.0,        //
      0.0, 0.0, ph1;

  const cd ph12 = std::exp(-iu * (omega_q1 + omega_q2) * t);
  if (rabi == 0.0) {
    out.u2 = ph12 * Eigen::Matrix3cd::Identity();
    return out;
  }
  const double g1 = mm.h1(0, 2).real();
  const double co = std::cos(rabi * t);
  const double si = std::sin(rabi * t);
  const double s2 = std::sqrt(2.0);
  Eigen::Matrix3cd u;
  u << g2 * g2 + 2.0 * g1 * g1 * co, s2 * g1 * g2 * (co - 1.0),
      -iu * rabi * s2 * g1 * si,  //
      s2 * g1 * g2 * (co - 1.0), 2.0 * g1 * g1 + g2 * g2 * co,
      -iu * rabi * g2 * si,  //
      -iu * rabi * s2 * g1 * si, -iu * rabi * g2 * si, rabi * rabi * co;
  out.u2 = (ph12 / (rabi * rabi)) * u;
  return out;
}

ResonanceCheck resonance_ratio_check(double g1, double g2, double tol) {
  if (g2 == 0.0)
    throw PhysicsError("resonance ratio needs a nonzero center-q2 coupling");
  ResonanceCheck rc;
  rc.deviation = std::abs(g1) / std::abs(g2) - std::sqrt(1.5);
  rc.pass = std::abs(rc.deviation) <= tol;
  return rc;
}

double conditional_phase_analytic(double g2, double t, double theta00,
                                  double theta01, double theta10,
                                  double theta11) {
  const double c = std::cos(g2 * t);
  const double sgn = c >= 0.0 ? 1.0 : -1.0;  // sgn(0) := +1
  return 0.5 * pi * (1.0 - sgn) - (theta11 - theta10 - theta01 + theta00);
}

JacobiModel jacobi_model(double omega_a, double omega_b, double g1,
                         double g2) {
  if (!(omega_a > omega_b))
    throw PhysicsError(
        "single-excitation reduction assumes omega_a > omega_b");
  JacobiModel jm;
  jm.omega_a = omega_a;
  jm.omega_b = omega_b;
  jm.g1 = g1;
  jm.g2 = g2;
  jm.lambda_minus0 = omega_b - g2;
  jm.lambda_plus0 = omega_b + g2;

  const double mean = 0.5 * (omega_a + jm.lambda_plus0);
  const double half = 0.5 * std::hypot(omega_a - jm.lambda_plus0,
                                       std::sqrt(2.0) * g1);
  jm.lambda_minus1 = mean - half;
  jm.lambda_plus1 = mean + half;

  if (g1 == 0.0) {
    jm.v11 = 1.0;
    jm.v12 = 0.0;
  } else {
    const double h = g1 / std::sqrt(2.0);
    jm.v11 = h / std::hypot(h, jm.lambda_minus1 - jm.lambda_plus0);
    jm.v12 = h / std::hypot(h, jm.lambda_plus1 - jm.lambda_plus0);
  }

  jm.lambda_bar = 0.5 * (jm.lambda_plus1 + jm.lambda_minus0);
  jm.delta = jm.lambda_plus1 - jm.lambda_minus0;
  jm.varpi = std::hypot(jm.delta, std::sqrt(2.0) * g1 * jm.v11);
  return jm;
}

double JacobiModel::r(double t) const {
  const double c = std::cos(0.5 * varpi * t);
  const double s = std::sin(0.5 * varpi * t);
  const double ratio = varpi == 0.0 ? 1.0 : delta / varpi;
  return std::sqrt(c * c + ratio * ratio * s * s);
}

double JacobiModel::c(double t) const {
  if (varpi == 0.0) return 0.0;
  return std::sqrt(2.0) * g1 * v11 / varpi * std::sin(0.5 * varpi * t);
}

double JacobiModel::phi(double t) const {
  const double ratio = varpi == 0.0 ? 1.0 : delta / varpi;
  return std::atan(ratio * std::tan(0.5 * varpi * t));
}

Eigen::Matrix3cd jacobi_propagator(const JacobiModel& jm, double t) {
  // U_D is the exact exponential of the reduced block-diagonal generator
  // diag([lambda_minus0, -g1 v11/sqrt(2); ., lambda_plus1], lambda_minus1);
  // written this way it stays continuous where the arctan form of phi wraps.
  const double w = -jm.g1 * jm.v11 / std::sqrt(2.0);
  const cd phase = std::exp(-iu * jm.lambda_bar * t);
  const double c = std::cos(0.5 * jm.varpi * t);
  const double s = jm.varpi == 0.0 ? 0.5 * t
                                   : std::sin(0.5 * jm.varpi * t) / jm.varpi;
  const cd d11 = phase * (c + iu * jm.delta * s);  // lambda_minus0 corner
  const cd d33 = phase * (c - iu * jm.delta * s);  // lambda_plus1 corner
  const cd d13 = phase * (-2.0 * iu * w * s);

  Eigen::Matrix3cd ud = Eigen::Matrix3cd::Zero();
  ud(0, 0) = d11;
  ud(0, 2) = d13;
  ud(2, 0) = d13;
  ud(2, 2) = d33;
  ud(1, 1) = std::exp(-iu * jm.lambda_minus1 * t);

  const double inv = 1.0 / std::sqrt(2.0);
  Eigen::Matrix3d v;
  v << -inv, inv * jm.v11, inv * jm.v12,  //
      inv, inv * jm.v11, inv * jm.v12,    //
      0.0, -jm.v12, jm.v11;
  return v * ud * v.transpose();
}

Eigen::Matrix3cd jacobi_propagator(double omega_a, double omega_b, double g1,
                                   double g2, double t) {
  return jacobi_propagator(jacobi_model(omega_a, omega_b, g1, g2), t);
}

CrosstalkAmplitudes crosstalk_matrix_elements(const CellParams& p,
                                              double charge_zpf,
                                              double guard) {
  check_dispersive("q1-c1", p.g_q1c1, p.omega_q1 - p.omega_c1, guard);
  check_dispersive("q2-c2", p.g_q2c2, p.omega_q2 - p.omega_c2, guard);
  check_dispersive("c-c1", p.g_cc1, p.omega_c - p.omega_c1, guard);
  check_dispersive("c-c2", p.g_cc2, p.omega_c - p.omega_c2, guard);
  const double min_gap = mhz_to_radns(1.0);
  check_gap("q1-c", p.omega_q1 - p.omega_c, min_gap);
  check_gap("q2-c", p.omega_q2 - p.omega_c, min_gap);
  check_gap("q1-q2", p.omega_q1 - p.omega_q2, min_gap);
  check_gap("q2-c1", p.omega_q2 - p.omega_c1, min_gap);
  check_gap("q2-c2", p.omega_q2 - p.omega_c2, min_gap);
  check_gap("c-c1", p.omega_c - p.omega_c1, min_gap);

  // first-order dressed couplings entering every amplitude
  const double b1c = p.g_cq1 + p.g_q1c1 * p.g_cc1 / (p.omega_c - p.omega_c1);
  const double b1q2 =
      p.g_cq1 + p.g_q1c1 * p.g_cc1 / (p.omega_q2 - p.omega_c1);
  const double b2q2 =
      p.g_cq2 + p.g_q2c2 * p.g_cc2 / (p.omega_q2 - p.omega_c2);

  const double d_q1c = p.omega_q1 - p.omega_c;
  const double d_q1c_a = p.omega_q1 + p.alpha_q1 - p.omega_c;
  const double d_q1q2 = p.omega_q1 - p.omega_q2;
  const double d_q1q2_a = p.omega_q1 + p.alpha_q1 - p.omega_q2;
  const double d_q2c = p.omega_q2 - p.omega_c;
  check_gap("q1-c (shifted)", d_q1c_a, min_gap);
  check_gap("q1-q2 (shifted)", d_q1q2_a, min_gap);

  const cd izp = iu * charge_zpf;
  const double s2 = std::sqrt(2.0);
  CrosstalkAmplitudes a;
  a.center_from_ground = -izp * b1c / d_q1c;
  a.spectator_from_ground = -izp / d_q2c * b1q2 * b2q2 / d_q1q2;
  a.center_conditional = izp * b1c * (1.0 / d_q1c - 2.0 / d_q1c_a);
  a.spectator_conditional =
      izp / d_q2c * b1q2 * b2q2 * (1.0 / d_q1q2 - 2.0 / d_q1q2_a);
  a.leakage_from_center = -izp * s2 * b1c * (1.0 / d_q1c - 1.0 / d_q1c_a);
  a.leakage_from_spectator =
      -izp * s2 / d_q2c * b1q2 * b2q2 * (1.0 / d_q1q2 - 1.0 / d_q1q2_a);
  return a;
}

DurationComparison duration_comparison(double g1) {
  if (!(g1 > 0.0))
    throw PhysicsError("duration comparison needs a positive coupling");
  DurationComparison d;
  d.tau_new = std::sqrt(1.5) * pi / g1;
  d.tau_mcm = (std::sqrt(2.0) + 1.0) / std::sqrt(2.0) * pi / g1;
  d.ratio = (std::sqrt(2.0) + 1.0) / std::sqrt(3.0);
  return d;
}

}  // namespace ucsim
