#include <doctest.h>

#include <cmath>

#include "ucsim/analysis.hpp"

using namespace ucsim;

namespace {

SystemModel three_mode_cell(bool coupled, int levels = 3) {
  SystemModel m;
  m.modes = {
      {"q1", ghz_to_radns(4.937), mhz_to_radns(-183.0), levels},
      {"q2", ghz_to_radns(4.919), mhz_to_radns(-181.0), levels},
      {"c", ghz_to_radns(4.796), mhz_to_radns(-179.0), levels},
  };
  if (coupled) {
    auto i = [&](const char* l) { return m.index_of(l); };
    m.couplings = {{i("c"), i("q1"), 0.000842}, {i("c"), i("q2"), 0.000882}};
  }
  m.validate();
  return m;
}

LabeledSpectrum label_cell(const SystemModel& m, int max_total) {
  const FockSpace s = fock_space(m);
  const Spectrum sp = eigensolve(assemble_hamiltonian_real(m, s, m.idle_frequencies()));
  return label_eigenstates(sp, s, max_total);
}

VectorXcd basis_state(const FockSpace& s, const std::vector<int>& occ) {
  VectorXcd psi = VectorXcd::Zero(static_cast<Eigen::Index>(s.dim));
  psi[static_cast<Eigen::Index>(s.flatten(occ))] = 1.0;
  return psi;
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("participation ratio separates localized from spread states") {
  const FockSpace s({2, 2});
  CHECK(inverse_participation_ratio(basis_state(s, {1, 0}), s) == doctest::Approx(1.0));

  VectorXcd uniform = VectorXcd::Constant(4, cd(0.5, 0.0));
  CHECK(inverse_participation_ratio(uniform, s) == doctest::Approx(0.25));

  VectorXcd pair = VectorXcd::Zero(4);
  pair[0] = cd(0.0, 1.0 / std::sqrt(2.0));  // phases are irrelevant
  pair[3] = cd(-1.0 / std::sqrt(2.0), 0.0);
  CHECK(inverse_participation_ratio(pair, s) == doctest::Approx(0.5));

  CHECK_THROWS_AS(inverse_participation_ratio(2.0 * uniform, s), PhysicsError);
  CHECK_THROWS_AS(inverse_participation_ratio(VectorXcd::Ones(3), s), ConfigError);
}

TEST_CASE("mode occupations read the multi-index digits") {
  const FockSpace s({3, 2});
  const std::vector<double> exc = mode_occupations(basis_state(s, {2, 1}), s);
  REQUIRE(exc.size() == 2);
  CHECK(exc[0] == doctest::Approx(2.0));
  CHECK(exc[1] == doctest::Approx(1.0));

  VectorXcd mix = (basis_state(s, {0, 0}) + basis_state(s, {2, 1})) / std::sqrt(2.0);
  const std::vector<double> half = mode_occupations(mix, s);
  CHECK(half[0] == doctest::Approx(1.0));
  CHECK(half[1] == doctest::Approx(0.5));
}

TEST_CASE("hybridized eigenstates split their participation evenly") {
  SystemModel m;
  m.modes = {{"q1", ghz_to_radns(4.8), mhz_to_radns(-180.0), 2},
             {"c", ghz_to_radns(4.8), mhz_to_radns(-179.0), 2}};
  m.couplings = {{1, 0, 0.002}};
  m.validate();
  const FockSpace s = fock_space(m);
  const Spectrum sp = eigensolve(assemble_hamiltonian_real(m, s, m.idle_frequencies()));
  // the two single-excitation eigenstates are (|10> +- |01>)/sqrt(2)
  int found = 0;
  for (int e = 0; e < sp.values.size(); ++e) {
    VectorXcd v = sp.vectors.col(e);
    const double p10 = std::norm(v[static_cast<Eigen::Index>(s.flatten({1, 0}))]);
    const double p01 = std::norm(v[static_cast<Eigen::Index>(s.flatten({0, 1}))]);
    if (p10 + p01 < 0.99) continue;
    ++found;
    CHECK(inverse_participation_ratio(v, s) == doctest::Approx(0.5).epsilon(5e-3));
  }
  CHECK(found == 2);
}

TEST_CASE("occupation map on a detached cell is exact") {
  const SystemModel m = three_mode_cell(false);
  const LabeledSpectrum ls = label_cell(m, 3);
  const OccupationMap map = occupation_map(ls, m);

  REQUIRE(map.qubit_modes == std::vector<std::string>{"q1", "q2"});
  REQUIRE(map.mode_labels == std::vector<std::string>{"q1", "q2", "c"});
  REQUIRE(map.entries.size() == 4);
  // the first qubit label is the most significant bit of the entry order
  CHECK(map.entries[1].qubit_label == std::vector<int>{0, 1});
  CHECK(map.entries[2].qubit_label == std::vector<int>{1, 0});

  for (const auto& e : map.entries) {
    int n_exc = 0;
    for (std::size_t q = 0; q < e.qubit_label.size(); ++q) {
      n_exc += e.qubit_label[q];
      CHECK(e.occupation[q] == doctest::Approx(e.qubit_label[q]).epsilon(1e-12));
    }
    CHECK(e.group == n_exc);
    CHECK(e.total == doctest::Approx(n_exc).epsilon(1e-12));
    CHECK(e.coupler_occupation == doctest::Approx(0.0));
    CHECK(e.ipr == doctest::Approx(1.0));
  }
}

TEST_CASE("occupation map on the coupled cell stays near the labels") {
  const SystemModel m = three_mode_cell(true);
  const LabeledSpectrum ls = label_cell(m, 3);
  const OccupationMap map = occupation_map(ls, m);

  for (const auto& e : map.entries) {
    int n_exc = 0;
    for (int b : e.qubit_label) n_exc += b;
    CHECK(e.group == n_exc);
    // dispersive admixtures move only a few permille of an excitation
    CHECK(std::abs(e.total - n_exc) < 0.01);
    CHECK(e.coupler_occupation < 0.01 * std::max(1, n_exc));
    CHECK(e.ipr > 0.99);
    CHECK(e.ipr <= 1.0 + 1e-12);
  }
}

TEST_CASE("leakage report compares the trajectory endpoints") {
  const SystemModel m = three_mode_cell(false, 2);
  const FockSpace s = fock_space(m);

  Trajectory traj;
  traj.times = {0.0, 10.0};
  traj.states = {basis_state(s, {1, 0, 0}),
                 (basis_state(s, {0, 1, 0}) + basis_state(s, {0, 0, 1})) /
                     std::sqrt(2.0)};
  const LeakageReport rep = leakage_report(traj, m, s);

  REQUIRE(rep.mode_labels == std::vector<std::string>{"q1", "q2", "c"});
  CHECK(rep.delta[0] == doctest::Approx(1.0));
  CHECK(rep.delta[1] == doctest::Approx(0.5));
  CHECK(rep.delta[2] == doctest::Approx(0.5));
  CHECK(rep.max_qubit_delta == doctest::Approx(1.0));
  CHECK(rep.center_residual == doctest::Approx(0.5));  // signed
  CHECK(rep.max_coupler_delta == doctest::Approx(0.0));  // no tunable couplers

  Trajectory back;
  back.times = {0.0, 10.0};
  back.states = {traj.states[1], traj.states[0]};
  CHECK(leakage_report(back, m, s).center_residual == doctest::Approx(-0.5));

  Trajectory empty;
  CHECK_THROWS_AS(leakage_report(empty, m, s), ConfigError);
}

TEST_SUITE_END();
