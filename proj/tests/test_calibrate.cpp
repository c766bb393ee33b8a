#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ucsim/calibrate.hpp"
#include "ucsim/optim.hpp"

using namespace ucsim;

namespace {

SystemModel table_cell2(int levels = 3) {
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

SystemModel scaled_couplings(const SystemModel& m, double s) {
  SystemModel out = m;
  for (auto& c : out.couplings) c.beta *= s;
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("calibrate");

TEST_CASE("assignment matches brute force and beats greedy") {
  MatrixXd greedy_trap(2, 3);
  greedy_trap << 0.9, 0.8, 0.0, 0.8, 0.0, 0.1;
  auto pick = max_score_assignment(greedy_trap);
  CHECK(pick == std::vector<int>{1, 0});  // greedy would take (0, 2) for 1.0 < 1.6

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    int rows = 1 + static_cast<int>(rng() % 5);
    int cols = rows + static_cast<int>(rng() % 3);
    MatrixXd score(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) score(r, c) = uni(rng);
    auto a = max_score_assignment(score);
    auto b = oracles::best_assignment_bruteforce(score);
    double sa = 0.0, sb = 0.0;
    for (int r = 0; r < rows; ++r) {
      sa += score(r, a[r]);
      sb += score(r, b[r]);
    }
    CHECK(sa == doctest::Approx(sb).epsilon(1e-12));
  }
}

TEST_CASE("brent root and golden section on closed forms") {
  auto r = find_root([](double x) { return std::cos(x); }, 1.0, 2.0, 1e-12, 0.0);
  CHECK(r.converged);
  CHECK(r.x == doctest::Approx(std::acos(-1.0) / 2).epsilon(1e-10));
  auto g = golden_section_min([](double x) { return (x - 0.7) * (x - 0.7) + 2.0; }, -1.0,
                              3.0, 1e-9);
  CHECK(g.x == doctest::Approx(0.7).epsilon(1e-6));
  CHECK_THROWS_AS(find_root([](double x) { return 1.0 + x * x; }, -1.0, 1.0, 1e-9, 0.0),
                  NumericsError);
}

TEST_CASE("nelder-mead minimizes a shifted quadratic") {
  VectorXd target(3);
  target << 0.3, -1.2, 2.0;
  auto f = [&](const VectorXd& x) { return (x - target).squaredNorm() + 0.25; };
  NelderMeadOptions opts;
  opts.max_evals = 500;
  opts.ftol_abs = 1e-14;
  auto res = nelder_mead(f, VectorXd::Zero(3), VectorXd::Constant(3, 0.5), opts);
  CHECK((res.x - target).norm() < 1e-4);
  CHECK(res.fx == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(!res.trace.empty());
  CHECK(res.trace.back().second <= res.trace.front().second);
}

TEST_CASE("iterative eigensolve agrees with the dense oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 600, k = 12;
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 5.0 * gauss(rng));
  for (int e = 0; e < 4 * n; ++e) {
    int i = rng() % n, j = rng() % n;
    if (i == j) continue;
    double v = 0.4 * gauss(rng);
    trip.emplace_back(i, j, v);
    trip.emplace_back(j, i, v);
  }
  SpMatReal h(n, n);
  h.setFromTriplets(trip.begin(), trip.end(),
                    [](const double& a, const double& b) { return a + b; });

  EigensolveOptions opts;
  opts.k = k;
  opts.dense_cap = 128;  // force the iterative path
  auto sp = eigensolve(h, opts);
  EigensolveOptions dense;
  auto ref = eigensolve(h, dense);
  for (int i = 0; i < k; ++i) {
    CHECK(sp.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-10));
    CHECK(std::abs(std::abs(sp.vectors.col(i).dot(ref.vectors.col(i))) - 1.0) < 1e-7);
  }
}

TEST_CASE("labels reduce to Fock states for the uncoupled cell") {
  auto m = table_cell2();
  m.couplings.clear();
  auto s = fock_space(m);
  auto sp = eigensolve(assemble_hamiltonian_real(m, s, m.idle_frequencies()));
  auto ls = label_eigenstates(sp, s, 2);
  for (std::size_t l = 0; l < ls.labels.size(); ++l) {
    CHECK(ls.overlap2[l] == doctest::Approx(1.0).epsilon(1e-12));
    double expect = 0.0;
    for (std::size_t mm = 0; mm < m.modes.size(); ++mm) {
      int n = ls.labels[l][mm];
      expect += m.modes[mm].omega * n + 0.5 * m.modes[mm].alpha * n * (n - 1);
    }
    CHECK(ls.values[l] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(ls.weak.empty());
}

TEST_CASE("resonant modes produce a weak-labeling warning") {
  // three near-resonant modes share one excitation; no Fock state can claim
  // more than ~half of any eigenstate
  SystemModel m;
  m.modes = {{"q1", ghz_to_radns(4.0000), mhz_to_radns(-200.0), 3},
             {"c", ghz_to_radns(3.9998), mhz_to_radns(-200.0), 3},
             {"c1", ghz_to_radns(4.0002), mhz_to_radns(-200.0), 3}};
  auto i = [&](const char* l) { return m.index_of(l); };
  m.couplings = {{i("c"), i("q1"), 0.01}, {i("q1"), i("c1"), 0.01}, {i("c"), i("c1"), 0.01}};
  m.validate();
  auto s = fock_space(m);
  auto ls = label_eigenstates(
      eigensolve(assemble_hamiltonian_real(m, s, m.idle_frequencies())), s, 1);
  CHECK(!ls.weak.empty());
}

TEST_CASE("spectrum window too small is rejected") {
  auto m = table_cell2();
  auto s = fock_space(m);
  EigensolveOptions opts;
  opts.k = 4;
  opts.dense_cap = 8;  // iterative with too few pairs for the label set
  auto h = assemble_hamiltonian_real(m, s, m.idle_frequencies());
  auto sp = eigensolve(h, opts);
  CHECK_THROWS_AS(label_eigenstates(sp, s, 2), PhysicsError);
}

TEST_CASE("zz vanishes without couplings and scales with coupling order") {
  auto m = table_cell2();
  auto s = fock_space(m);
  SystemModel bare = m;
  bare.couplings.clear();
  auto ls0 = label_eigenstates(
      eigensolve(assemble_hamiltonian_real(bare, s, bare.idle_frequencies())), s, 2);
  CHECK(std::abs(zz_coupling(ls0, m.require("q1"), m.require("q2"))) < 1e-12);

  // single-path toys so the leading order is unambiguous (the full cell sits
  // near a cancellation point by design, so no clean power law there)
  auto zeta_of = [](SystemModel toy, double scale, const char* a, const char* b) {
    toy = scaled_couplings(toy, scale);
    auto sp = fock_space(toy);
    auto ls = label_eigenstates(
        eigensolve(assemble_hamiltonian_real(toy, sp, toy.idle_frequencies())), sp, 2);
    return zz_coupling(ls, toy.require(a), toy.require(b));
  };

  SystemModel direct;  // one edge: zeta ~ beta^2
  direct.modes = {{"q1", ghz_to_radns(4.937), mhz_to_radns(-183.0), 3},
                  {"c", ghz_to_radns(4.796), mhz_to_radns(-179.0), 3}};
  // keep g/Delta small so quartic terms stay negligible against the beta^2 law
  direct.couplings = {{direct.index_of("c"), direct.index_of("q1"), 0.0025}};
  direct.validate();
  double d_half = zeta_of(direct, 0.5, "c", "q1");
  double d_quart = zeta_of(direct, 0.25, "c", "q1");
  CHECK(d_half / d_quart == doctest::Approx(4.0).epsilon(0.1));

  SystemModel mediated;  // only q1-c1 and c-c1 edges: zeta_cq1 ~ beta^4
  mediated.modes = {{"q1", ghz_to_radns(4.937), mhz_to_radns(-183.0), 3},
                    {"c", ghz_to_radns(4.796), mhz_to_radns(-179.0), 3},
                    {"c1", ghz_to_radns(3.639), mhz_to_radns(-228.0), 3}};
  auto i = [&](const char* l) { return mediated.index_of(l); };
  mediated.couplings = {{i("q1"), i("c1"), 0.0194089}, {i("c"), i("c1"), -0.0145109}};
  mediated.validate();
  double m_half = zeta_of(mediated, 0.5, "c", "q1");
  double m_quart = zeta_of(mediated, 0.25, "c", "q1");
  CHECK(m_half / m_quart == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("idle calibration zeroes the center-qubit zz") {
  auto m = table_cell2();
  auto res = find_idle_configuration(m);
  // roots stay near the design values
  CHECK(radns_to_ghz(res.coupler_omega.at("c1")) == doctest::Approx(3.639).epsilon(0.009));
  CHECK(radns_to_ghz(res.coupler_omega.at("c2")) == doctest::Approx(3.621).epsilon(0.009));
  for (const auto& p : res.reduced.pairs) CHECK(std::abs(p.zeta) <= two_pi * 1e-6);
  // full-cell verification: every pair below 20 kHz, operating pair below 10
  CHECK(res.verification.max_abs() < two_pi * 20e-6);
  CHECK(std::abs(res.verification.get("q1", "q2")) < two_pi * 10e-6);
}

TEST_CASE("zz landscape crosses zero at the calibrated point") {
  auto m = table_cell2();
  auto res = find_idle_configuration(m);
  double root = res.coupler_omega.at("c1");
  std::vector<double> grid;
  for (int i = -3; i <= 3; ++i) grid.push_back(root + i * two_pi * 0.015);
  auto scan = zz_landscape(m, grid, {res.coupler_omega.at("c2")});
  REQUIRE(scan.size() == grid.size());
  bool sign_change = false;
  for (std::size_t i = 1; i < scan.size(); ++i)
    if (scan[i - 1].zq1c * scan[i].zq1c < 0.0) sign_change = true;
  CHECK(sign_change);
}

TEST_CASE("calibration of one pair is insensitive to the spectator coupler") {
  auto m = table_cell2();
  auto res = find_idle_configuration(m);
  SystemModel tuned = m;
  tuned.modes[tuned.require("c1")].omega = res.coupler_omega.at("c1");
  tuned.modes[tuned.require("c2")].omega = res.coupler_omega.at("c2");
  auto s = fock_space(tuned);
  auto zq1c_with_c2 = [&](double shift) {
    SystemModel probe = tuned;
    probe.modes[probe.require("c2")].omega += shift;
    auto ls = label_eigenstates(
        eigensolve(assemble_hamiltonian_real(probe, s, probe.idle_frequencies())), s, 2);
    return zz_coupling(ls, probe.require("c"), probe.require("q1"));
  };
  // zeta range across the c1 window sets the comparison scale
  double span = 0.0;
  for (double w = two_pi * 3.3; w < two_pi * 4.3; w += two_pi * 0.1) {
    SystemModel probe = tuned;
    probe.modes[probe.require("c1")].omega = w;
    auto ls = label_eigenstates(
        eigensolve(assemble_hamiltonian_real(probe, s, probe.idle_frequencies())), s, 2);
    span = std::max(span, std::abs(zz_coupling(ls, probe.require("c"), probe.require("q1"))));
  }
  double drift = std::max(std::abs(zq1c_with_c2(two_pi * 0.05)),
                          std::abs(zq1c_with_c2(-two_pi * 0.05)));
  CHECK(drift < 0.05 * span);
}

TEST_CASE("single-excitation energies are stable under deeper truncation") {
  auto m3 = table_cell2(3);
  auto m4 = table_cell2(4);
  auto s3 = fock_space(m3);
  auto s4 = fock_space(m4);
  auto ls3 = label_eigenstates(
      eigensolve(assemble_hamiltonian_real(m3, s3, m3.idle_frequencies())), s3, 1);
  auto ls4 = label_eigenstates(
      eigensolve(assemble_hamiltonian_real(m4, s4, m4.idle_frequencies())), s4, 1);
  for (std::size_t l = 0; l < ls3.labels.size(); ++l) {
    double e3 = ls3.values[l] - ls3.values[0];
    double e4 = ls4.energy(ls3.labels[l]) - ls4.energy(std::vector<int>(5, 0));
    CHECK(std::abs(e3 - e4) < 1e-4);
  }
}

TEST_CASE("eigensolve residuals stay at the numerical floor") {
  auto m = table_cell2();
  auto s = fock_space(m);
  auto h = assemble_hamiltonian_real(m, s, m.idle_frequencies());
  auto sp = eigensolve(h);
  double scale = std::max(std::abs(sp.values[0]), std::abs(sp.values[sp.values.size() - 1]));
  for (int i = 0; i < sp.values.size(); i += 17) {
    VectorXd x = sp.vectors.col(i).real();
    double resid = (h * x - sp.values[i] * x).norm();
    CHECK(resid < 1e-9 * scale);
  }
}

TEST_SUITE_END();
