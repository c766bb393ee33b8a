#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "ucsim/gates.hpp"

using namespace ucsim;

namespace {

SystemModel three_mode_cell(int levels = 3) {
  SystemModel m;
  m.modes = {
      {"q1", ghz_to_radns(4.937), mhz_to_radns(-183.0), levels},
      {"q2", ghz_to_radns(4.919), mhz_to_radns(-181.0), levels},
      {"c", ghz_to_radns(4.796), mhz_to_radns(-179.0), levels},
  };
  auto i = [&](const char* l) { return m.index_of(l); };
  m.couplings = {{i("c"), i("q1"), 0.000842}, {i("c"), i("q2"), 0.000882}};
  m.validate();
  return m;
}

SystemModel five_mode_cell(int levels = 3) {
  SystemModel m;
  m.modes = {
      {"q1", ghz_to_radns(4.937), mhz_to_radns(-183.0), levels},
      {"q2", ghz_to_radns(4.919), mhz_to_radns(-181.0), levels},
      {"c", ghz_to_radns(4.796), mhz_to_radns(-179.0), levels},
      {"c1", ghz_to_radns(3.639), mhz_to_radns(-228.0), levels},
      {"c2", ghz_to_radns(3.621), mhz_to_radns(-228.0), levels},
  };
  auto i = [&](const char* l) { return m.index_of(l); };
  m.couplings = {
      {i("c"), i("q1"), 0.000842},   {i("c"), i("q2"), 0.000882},
      {i("q1"), i("c1"), 0.0194089}, {i("q2"), i("c2"), 0.0193140},
      {i("c"), i("c1"), -0.0145109}, {i("c"), i("c2"), -0.0153071},
  };
  m.validate();
  return m;
}

// three detached modes: eigenstates coincide with the Fock basis
SystemModel uncoupled_cell(int levels) {
  SystemModel m;
  m.modes = {
      {"q1", ghz_to_radns(4.937), mhz_to_radns(-183.0), levels},
      {"q2", ghz_to_radns(4.919), mhz_to_radns(-181.0), levels},
      {"c", ghz_to_radns(4.796), mhz_to_radns(-179.0), levels},
  };
  m.validate();
  return m;
}

LabeledSpectrum label_cell(const SystemModel& m, int max_total) {
  const FockSpace s = fock_space(m);
  const Spectrum sp = eigensolve(assemble_hamiltonian_real(m, s, m.idle_frequencies()));
  return label_eigenstates(sp, s, max_total);
}

PulseSchedule idle_schedule(const SystemModel& m, double duration) {
  PulseSchedule sched;
  sched.duration = duration;
  sched.n_modes = m.modes.size();
  return sched;
}

double wrap(double x) {
  double w = std::remainder(x, two_pi);
  if (w <= -pi) w += two_pi;
  return w;
}

}  // namespace

TEST_SUITE_BEGIN("gates");

TEST_CASE("thermal occupation follows the bose function") {
  CHECK(thermal_occupation(ghz_to_radns(4.8), 0.0) == 0.0);
  // low-temperature Boltzmann limit
  const double w = ghz_to_radns(4.796);
  const double n_cold = thermal_occupation(w, 0.03);
  const double x = 7.638233e-3 * w / 0.03;
  CHECK(n_cold == doctest::Approx(std::exp(-x)).epsilon(1e-3));
  // monotone in temperature
  CHECK(thermal_occupation(w, 0.1) > thermal_occupation(w, 0.05));
  // classical limit kT >> hbar w approaches kT/(hbar w)
  const double n_hot = thermal_occupation(w, 300.0);
  CHECK(n_hot == doctest::Approx(300.0 / (7.638233e-3 * w) - 0.5).epsilon(1e-3));
  CHECK_THROWS_AS(thermal_occupation(-1.0, 0.1), PhysicsError);
  CHECK_THROWS_AS(thermal_occupation(w, -0.1), PhysicsError);
}

TEST_CASE("noise spec converts times to rates") {
  const SystemModel m = three_mode_cell();
  NoiseSpec spec = NoiseSpec::uniform(m, 20000.0, 40000.0);
  REQUIRE(spec.entries.size() == 3);
  const auto rates = spec.mode_noise();
  CHECK(rates[0].gamma == doctest::Approx(5e-5));
  CHECK(rates[0].kappa_phi == doctest::Approx(2.5e-5));
  CHECK(rates[0].n_bar == 0.0);
  CHECK(spec.max_rate() == doctest::Approx(5e-5));

  spec.set_temperature(m, 0.05);
  CHECK(spec.entries[2].n_bar ==
        doctest::Approx(thermal_occupation(m.modes[2].omega, 0.05)));
  CHECK(spec.entries[0].n_bar < spec.entries[2].n_bar);  // higher mode, colder bath

  NoiseSpec bad = spec;
  bad.entries[1].t1 = -1.0;
  CHECK_THROWS_AS(bad.mode_noise(), PhysicsError);
}

TEST_CASE("state fidelity handles pure and mixed comparisons") {
  MatrixXcd zero = MatrixXcd::Zero(2, 2), one = zero, mixed = zero;
  zero(0, 0) = 1.0;
  one(1, 1) = 1.0;
  mixed(0, 0) = mixed(1, 1) = 0.5;
  CHECK(state_fidelity(zero, zero) == doctest::Approx(1.0));
  CHECK(state_fidelity(zero, one) == doctest::Approx(0.0));
  CHECK(state_fidelity(mixed, zero) == doctest::Approx(0.5));
  MatrixXcd inflated = 1.1 * zero;
  CHECK_THROWS_AS(state_fidelity(inflated, zero), PhysicsError);
  CHECK_THROWS_AS(state_fidelity(zero, mixed), PhysicsError);  // reference not pure
}

TEST_CASE("closed-form decoherence infidelity reproduces the frozen value") {
  const std::array<double, 3> t1 = {20000.0, 20000.0, 20000.0};
  const std::array<double, 3> t2 = {40000.0, 40000.0, 40000.0};
  CHECK(closed_form_decoherence_infidelity(60.0, t1, t2) ==
        doctest::Approx(4.0614257813e-3).epsilon(1e-9));

  // linear in duration and in the rates
  CHECK(closed_form_decoherence_infidelity(120.0, t1, t2) ==
        doctest::Approx(2.0 * 4.0614257813e-3).epsilon(1e-12));
  const std::array<double, 3> t1_half = {10000.0, 10000.0, 10000.0};
  const std::array<double, 3> t2_half = {20000.0, 20000.0, 20000.0};
  CHECK(closed_form_decoherence_infidelity(60.0, t1_half, t2_half) ==
        doctest::Approx(2.0 * 4.0614257813e-3).epsilon(1e-12));

  // channel-by-channel weights
  const std::array<double, 3> off = {0.0, 0.0, 0.0};
  const std::array<double, 3> center_only = {0.0, 0.0, 20000.0};
  CHECK(closed_form_decoherence_infidelity(60.0, center_only, off) ==
        doctest::Approx((1.0 / 8.0) * 60.0 / 20000.0).epsilon(1e-12));
  CHECK(closed_form_decoherence_infidelity(60.0, off, center_only) ==
        doctest::Approx((131.0 / 640.0) * 60.0 / 20000.0).epsilon(1e-12));

  // excitation weights enter with n_bar
  const std::array<double, 3> nb = {0.1, 0.0, 0.0};
  const std::array<double, 3> q1_only = {20000.0, 0.0, 0.0};
  const double expect =
      60.0 / 20000.0 * ((73.0 / 160.0) * 1.1 + (1753.0 / 1280.0) * 0.1);
  CHECK(closed_form_decoherence_infidelity(60.0, q1_only, off, nb) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("embedding and projection invert each other") {
  const SystemModel m = three_mode_cell();
  const LabeledSpectrum ls = label_cell(m, 3);
  Eigen::Vector4cd c;
  c << cd(0.5, 0.0), cd(0.0, 0.5), cd(-0.5, 0.0), cd(0.3, 0.4);
  c /= c.norm();
  const VectorXcd psi = embed_computational(m, ls, "q1", "q2", c);
  CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
  double tr = 0.0;
  const Eigen::Matrix4cd rho = project_two_qubit(psi, m, ls, "q1", "q2", &tr);
  CHECK(tr == doctest::Approx(1.0).epsilon(1e-10));
  const Eigen::Matrix4cd expect = c * c.adjoint();
  CHECK((rho - expect).cwiseAbs().maxCoeff() < 1e-10);

  // the density route must agree with the pure route
  const MatrixXcd full = psi * psi.adjoint();
  double tr2 = 0.0;
  const Eigen::Matrix4cd rho2 = project_two_qubit_density(full, m, ls, "q1", "q2", &tr2);
  CHECK((rho2 - rho).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(tr2 == doctest::Approx(tr).epsilon(1e-10));

  CHECK_THROWS_AS(
      embed_computational(m, ls, "q1", "q2", Eigen::Vector4cd::Constant(1.0)),
      ConfigError);
}

TEST_CASE("single-qubit phase removal zeroes ideal coherences and keeps magnitudes") {
  Eigen::Vector4cd c = Eigen::Vector4cd::Constant(cd(0.5, 0.0));
  const double th01 = 0.7, th10 = -1.2;
  Eigen::Vector4cd phased;
  phased << c(0), c(1) * std::exp(-iu * th01), c(2) * std::exp(-iu * th10),
      c(3) * std::exp(-iu * (th01 + th10));
  const Eigen::Matrix4cd rho = phased * phased.adjoint();
  // measured references equal the free-evolution phases
  const double phi01 = std::arg(rho(0, 1));
  const double phi10 = std::arg(rho(0, 2));
  CHECK(phi01 == doctest::Approx(th01));
  CHECK(phi10 == doctest::Approx(th10));
  const Eigen::Matrix4cd fixed = remove_single_qubit_phases(rho, phi01, phi10);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      CHECK(std::abs(fixed(i, j)) == doctest::Approx(std::abs(rho(i, j))));
      CHECK(std::abs(std::arg(fixed(i, j))) < 1e-12);  // all real positive
    }
  // the conditional-phase combination is invariant under the removal
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector4cd r;
  for (int i = 0; i < 4; ++i) r(i) = cd(gauss(rng), gauss(rng));
  r /= r.norm();
  const Eigen::Matrix4cd rr = r * r.adjoint();
  CHECK(conditional_phase(remove_single_qubit_phases(rr, 0.4, -2.2)) ==
        doctest::Approx(conditional_phase(rr)).epsilon(1e-12));
}

TEST_CASE("conditional phase reads the coherence combination") {
  const double th00 = 0.3, th01 = -0.2, th10 = 0.15, th11 = 1.9;
  Eigen::Vector4cd c;
  c << std::exp(-iu * th00), std::exp(-iu * th01), std::exp(-iu * th10),
      std::exp(-iu * th11);
  c *= 0.5;
  const Eigen::Matrix4cd rho = c * c.adjoint();
  // with c_jk = e^{-i theta_jk}, arg<00|rho|jk> = theta_jk - theta_00
  CHECK(conditional_phase(rho) ==
        doctest::Approx(wrap(th11 + th00 - th01 - th10)).epsilon(1e-12));
  // ideal CZ output on the uniform superposition
  Eigen::Vector4cd cz = Eigen::Vector4cd::Constant(cd(0.5, 0.0));
  cz(3) = -0.5;
  CHECK(std::abs(wrap(conditional_phase(cz * cz.adjoint()) - pi)) < 1e-12);
}

TEST_CASE("an idle schedule scores one quarter against the ideal CZ") {
  const SystemModel m = five_mode_cell();
  const LabeledSpectrum ls = label_cell(m, 3);
  const PulseSchedule sched = idle_schedule(m, 20.0);
  CzRunOptions opts;
  opts.sample_points = 40;
  const GateResult res = run_cz(m, ls, sched, cz_probe_state(), opts);

  // free evolution is removed by the phase references, no conditional phase
  // accumulates, and the overlap with the ideal CZ output is 1/4
  CHECK(res.fidelity == doctest::Approx(0.25).epsilon(2e-3));
  CHECK(std::abs(res.phi_cp) < 0.01);
  CHECK(res.trace_2q == doctest::Approx(1.0).epsilon(1e-5));
  // phase removal leaves near-real coherences
  CHECK(std::abs(std::arg(res.rho_2q(0, 1))) < 5e-3);
  CHECK(std::abs(std::arg(res.rho_2q(0, 2))) < 5e-3);
  // bookkeeping of the sampled trajectory
  CHECK(res.times.size() == 41);
  CHECK(res.populations.rows() == 5);
  CHECK(res.populations.cols() == 41);
  CHECK(res.phi_cp_trace.size() == 41);
  for (std::size_t i = 1; i < res.phi_cp_trace.size(); ++i)
    CHECK(std::abs(res.phi_cp_trace[i] - res.phi_cp_trace[i - 1]) < 0.5);
  // every labeled state with at most two quanta gets a population row; the
  // idling probe keeps its weight in the four computational states
  CHECK(res.tracked_labels.size() == 21);
  CHECK(res.tracked_populations.rows() == 21);
  CHECK(res.tracked_populations.cols() == 41);
  CHECK(res.tracked_populations.col(0).sum() == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t t = 0; t < res.tracked_labels.size(); ++t) {
    const auto& lab = res.tracked_labels[t];
    const int quanta = std::accumulate(lab.begin(), lab.end(), 0);
    const bool computational = quanta == lab[0] + lab[1] && lab[0] <= 1 && lab[1] <= 1;
    const double p0 = res.tracked_populations(static_cast<Eigen::Index>(t), 0);
    CHECK(p0 == doctest::Approx(computational ? 0.25 : 0.0).epsilon(1e-6));
  }
  // Fock occupations beat a little through the hybridized admixtures even
  // when the dressed-basis populations are static
  CHECK(res.leakage.max_qubit_delta < 0.03);
  CHECK(std::abs(res.leakage.center_residual) < 0.01);
  CHECK(res.leakage.max_coupler_delta < 0.02);
}

TEST_CASE("the resonant effective model executes a conditional-phase gate") {
  const EffectiveGateModel egm = effective_gate_model(
      ghz_to_radns(4.796), mhz_to_radns(-183.0), mhz_to_radns(-181.0),
      mhz_to_radns(-179.0), two_pi * 5e-3);
  CHECK(egm.tau == doctest::Approx(100.0));
  // overlap labeling is meaningless at the exact q2-c resonance
  const LabeledSpectrum ls = bare_spectrum(egm.model);
  const PulseSchedule sched = idle_schedule(egm.model, egm.tau);
  CzRunOptions opts;
  opts.solver.dt = 0.1;
  opts.form = CouplingForm::rwa;
  opts.sample_points = 100;
  const GateResult res = run_cz(egm.model, ls, sched, cz_probe_state(), opts);

  // the two-excitation cycle closes and the single-excitation swap imprints
  // pi; off-resonant neighbors of the cycling chain leave phase errors of
  // order (g/alpha) * pi behind, so the bounds stay loose
  CHECK(res.fidelity > 0.97);
  CHECK(std::abs(wrap(res.phi_cp - pi)) < 0.35);
  CHECK(res.trace_2q > 0.98);

  // the conditional-phase trace follows the analytic step form away from the
  // half-period jump
  const std::size_t early = 20, late = 80;
  CHECK(std::abs(res.phi_cp_trace[early] -
                 conditional_phase_analytic(egm.g2, 0.2 * egm.tau)) < 0.3);
  CHECK(std::abs(wrap(res.phi_cp_trace[late] -
                      conditional_phase_analytic(egm.g2, 0.8 * egm.tau))) < 0.35);
}

TEST_CASE("pulse seeding lands on the dressed resonance conditions") {
  const SystemModel m = five_mode_cell();
  const double tau = 60.0, sigma_q = 1.0, sigma_c = 3.0;
  const CzParameters p = seed_cz_parameters(m, tau, sigma_q, sigma_c);

  // amplitude signs and rough magnitudes
  CHECK(p.a_q2 < -two_pi * 0.06);
  CHECK(p.a_q2 > -two_pi * 0.16);
  CHECK(p.a_q1 > two_pi * 0.02);
  CHECK(p.a_q1 < two_pi * 0.12);
  CHECK(p.a_c1 > two_pi * 0.35);
  CHECK(p.a_c1 < two_pi * 0.95);
  CHECK(p.a_c2 > two_pi * 0.35);
  CHECK(p.a_c2 < two_pi * 0.95);

  // the seeded operation point satisfies the resonance conditions exactly
  std::vector<double> w = m.idle_frequencies();
  w[0] += p.a_q1;
  w[1] += p.a_q2;
  w[3] += p.a_c1;
  w[4] += p.a_c2;
  const EffectiveModel eff = schrieffer_wolff(cell_params(m, w), 0.45);
  CHECK(std::abs(eff.omega_q2 - eff.omega_c) < 1e-7);
  CHECK(std::abs(eff.omega_q1 + m.modes[0].alpha - eff.omega_c) < 1e-7);
  const double tau_eff = tau - 4.0 * std::sqrt(2.0) * sigma_q - 2.0 * std::sqrt(2.0) * sigma_c;
  CHECK(std::abs(eff.g_cq2) == doctest::Approx(pi / tau_eff).epsilon(1e-8));
  CHECK(std::abs(eff.g_cq1 / eff.g_cq2) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-7));
  // both operated couplings sit on the virtual-channel side
  CHECK(eff.g_cq2 < 0.0);
  CHECK(eff.g_cq1 < 0.0);
}

TEST_CASE("identity process scores two fifths against the ideal CZ") {
  TwoQubitProcess identity;
  identity.super.setIdentity();
  CHECK(average_gate_fidelity(identity, cz_unitary()) ==
        doctest::Approx(0.4).epsilon(1e-12));
  CHECK(average_gate_fidelity(identity, Eigen::Matrix4cd::Identity()) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pauli assembly matches the closed form and the monte carlo estimate") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Matrix4cd a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cd(gauss(rng), gauss(rng));
  const Eigen::Matrix4cd v = Eigen::HouseholderQR<Eigen::Matrix4cd>(a).householderQ();

  TwoQubitProcess p;
  for (int b = 0; b < 4; ++b)
    for (int a2 = 0; a2 < 4; ++a2) {
      Eigen::Matrix4cd e = Eigen::Matrix4cd::Zero();
      e(a2, b) = 1.0;
      const Eigen::Matrix4cd mapped = v * e * v.adjoint();
      p.super.col(a2 + 4 * b) =
          Eigen::Map<const Eigen::Matrix<cd, 16, 1>>(mapped.data());
    }

  const Eigen::Matrix4cd u = cz_unitary();
  const double pauli = average_gate_fidelity(p, u);
  const double closed =
      (std::norm((u.adjoint() * v).trace()) + 4.0) / 20.0;
  CHECK(pauli == doctest::Approx(closed).epsilon(1e-10));

  const MonteCarloFidelity mc = average_fidelity_monte_carlo(p, u, 20000, 424242);
  CHECK(std::abs(mc.mean - pauli) < 4.0 * mc.std_error);
  CHECK(mc.std_error < 0.01);
}

TEST_CASE("a linear map applied through the superoperator stays linear") {
  TwoQubitProcess identity;
  identity.super.setIdentity();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Matrix4cd x, y;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      x(i, j) = cd(gauss(rng), gauss(rng));
      y(i, j) = cd(gauss(rng), gauss(rng));
    }
  const Eigen::Matrix4cd lhs = identity.apply(x + cd(0.0, 2.0) * y);
  const Eigen::Matrix4cd rhs = identity.apply(x) + cd(0.0, 2.0) * identity.apply(y);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("the free-evolution process recovers dressed phases and scores 0.4") {
  const SystemModel m = uncoupled_cell(2);
  const LabeledSpectrum ls = label_cell(m, 3);
  const double tau = 10.0;
  const PulseSchedule sched = idle_schedule(m, tau);
  MagnusConfig solver;
  solver.dt = 0.05;

  const TwoQubitProcess p = unitary_process(m, ls, sched, solver);
  // the measured phase references are the free-evolution phases
  CHECK(std::abs(wrap(p.phi_10 - wrap(m.modes[0].omega * tau))) < 1e-8);
  CHECK(std::abs(wrap(p.phi_01 - wrap(m.modes[1].omega * tau))) < 1e-8);
  // with phases removed the process is the identity map
  CHECK(average_gate_fidelity(p, cz_unitary()) == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(average_gate_fidelity(p, Eigen::Matrix4cd::Identity()) ==
        doctest::Approx(1.0).epsilon(1e-9));

  // the Lindblad route with zero rates reproduces the same superoperator
  const NoiseSpec off = NoiseSpec::uniform(m, 0.0, 0.0);
  const TwoQubitProcess pl = lindblad_process(m, ls, sched, off, solver, "q1", "q2",
                                              CouplingForm::full, &p);
  CHECK((pl.super - p.super).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("decoherence routes agree with each other and the closed form") {
  const EffectiveGateModel egm = effective_gate_model(
      ghz_to_radns(4.796), mhz_to_radns(-183.0), mhz_to_radns(-181.0),
      mhz_to_radns(-179.0), two_pi * 10e-3);
  const double tau = egm.tau;  // 50 ns
  const LabeledSpectrum ls = bare_spectrum(egm.model);
  const PulseSchedule sched = idle_schedule(egm.model, tau);

  NoiseSpec noise = NoiseSpec::uniform(egm.model, 20000.0, 40000.0);
  const std::array<double, 3> t1 = {20000.0, 20000.0, 20000.0};
  const std::array<double, 3> t2 = {40000.0, 40000.0, 40000.0};
  const double closed = closed_form_decoherence_infidelity(tau, t1, t2);

  // first-order integrals against the closed form
  const DecoherenceBudget budget = perturbative_decoherence(egm.model, noise, tau);
  CHECK(budget.weak_noise_ok);
  CHECK(budget.incoherent == doctest::Approx(closed).epsilon(0.08));
  REQUIRE(budget.per_channel.size() == 6);  // relaxation + dephasing per mode
  for (double c : budget.per_channel) CHECK(c > 0.0);
  // dephasing on the center mode carries the smallest dephasing weight
  double sum = 0.0;
  for (double c : budget.per_channel) sum += c;
  CHECK(sum == doctest::Approx(budget.incoherent).epsilon(1e-9));

  // full Lindblad propagation against the first-order result
  MagnusConfig solver;
  solver.dt = 0.05;
  const LindbladStudy study =
      lindblad_decoherence_study(egm.model, ls, sched, noise, solver);
  CHECK(study.weak_noise_ok);
  CHECK(study.incoherent == doctest::Approx(budget.incoherent).epsilon(0.05));
  CHECK(study.coherent_floor < 0.02);
  CHECK(study.f_bar_noisy < study.f_bar_noiseless);

  // switching the noise off collapses the difference
  const NoiseSpec off = NoiseSpec::uniform(egm.model, 0.0, 0.0);
  const LindbladStudy null_study =
      lindblad_decoherence_study(egm.model, ls, sched, off, solver);
  CHECK(std::abs(null_study.incoherent) < 1e-8);
}

TEST_CASE("uncoupled single-qubit gates reproduce textbook rotations") {
  const SystemModel m = uncoupled_cell(2);
  const LabeledSpectrum ls = label_cell(m, 3);
  MagnusConfig solver;
  solver.dt = 0.004;

  // no drive, no rotation: identity against theta = 0, orthogonal to theta = pi
  DriveSpec quiet{"q1", 0.0, m.modes[0].omega, 0.0, 12.0, 2.5};
  const SingleQubitResult idle =
      run_single_qubit(m, ls, "q1", {quiet}, 0.0, 0.0, VectorXcd(), solver);
  CHECK(idle.fidelity == doctest::Approx(1.0).epsilon(1e-9));
  const SingleQubitResult missed =
      run_single_qubit(m, ls, "q1", {quiet}, pi, 0.0, VectorXcd(), solver);
  CHECK(missed.fidelity == doctest::Approx(0.0).epsilon(1e-9));

  // resonant pi pulse with the small-signal amplitude
  DriveSpec drive = quiet;
  drive.amplitude =
      pi / (drive.sigma * std::sqrt(two_pi) * std::erf(drive.tau / (2.0 * std::sqrt(2.0) * drive.sigma)));
  const SingleQubitResult flipped =
      run_single_qubit(m, ls, "q1", {drive}, pi, 0.0, VectorXcd(), solver);
  CHECK(flipped.fidelity > 0.995);
  CHECK(flipped.rho_1q(1, 1).real() > 0.995);
  CHECK(flipped.trace_1q == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the single-qubit optimizer converges to the uncoupled optimum") {
  const SystemModel m = uncoupled_cell(2);
  const LabeledSpectrum ls = label_cell(m, 3);
  SqgOptimizeOptions opts;
  opts.target = "q1";
  opts.drive = DriveSpec{"q1", 0.0, 0.0, 0.0, 12.0, 2.5};
  opts.solver.dt = 0.004;
  const SqgOptimizeResult r = optimize_single_qubit(m, ls, opts);
  CHECK(r.infidelity < 1e-5);
  // counter-rotating terms shift the optimum only slightly off the bare line
  CHECK(std::abs(r.omega_d - m.modes[0].omega) < two_pi * 5e-4);
  CHECK(r.amplitude > 0.0);
  CHECK(r.rounds <= 50);
  CHECK(r.gate.fidelity == doctest::Approx(1.0 - r.infidelity));
}

TEST_SUITE_END();
