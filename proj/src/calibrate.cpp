#include "ucsim/calibrate.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <random>

#include "ucsim/optim.hpp"

namespace ucsim {

namespace {

bool is_real(const SpMat& h) {
  for (int k = 0; k < h.outerSize(); ++k)
    for (SpMat::InnerIterator it(h, k); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

SpMatReal real_part(const SpMat& h) {
  SpMatReal r(h.rows(), h.cols());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(h.nonZeros());
  for (int k = 0; k < h.outerSize(); ++k)
    for (SpMat::InnerIterator it(h, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value().real());
  r.setFromTriplets(trip.begin(), trip.end());
  return r;
}

// Lanczos with full reorthogonalization for the lowest k pairs of a sparse
// symmetric/Hermitian operator. Scalar is double or cd.
template <typename Scalar>
Spectrum lanczos_lowest(const Eigen::SparseMatrix<Scalar, Eigen::RowMajor>& h, int k,
                        const EigensolveOptions& opts) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const long n = h.rows();
  if (k <= 0 || k >= n)
    throw NumericsError("iterative eigensolve needs 0 < k < dim");
  int max_basis = opts.max_basis > 0 ? opts.max_basis
                                     : static_cast<int>(std::min<long>(n, std::max(4 * k, k + 240)));
  if (max_basis <= k) throw NumericsError("eigensolve basis cap smaller than k");

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_vec = [&]() {
    Vec v(n);
    for (long i = 0; i < n; ++i) {
      if constexpr (std::is_same_v<Scalar, double>)
        v[i] = gauss(rng);
      else
        v[i] = cd(gauss(rng), gauss(rng));
    }
    return v;
  };

  Mat basis(n, max_basis);
  VectorXd a(max_basis), b(max_basis);  // tridiagonal alpha, beta
  Vec v = random_vec();
  v /= v.norm();
  basis.col(0) = v;
  Vec w(n);
  int m = 0;
  double scale = 1.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> tri;
  int check_every = std::max(16, k / 3);

  while (m < max_basis) {
    w.noalias() = h * basis.col(m);
    Scalar alpha = basis.col(m).dot(w);
    a[m] = std::real(alpha);
    // full reorthogonalization, two classical Gram-Schmidt passes
    for (int pass = 0; pass < 2; ++pass) {
      Vec proj = basis.leftCols(m + 1).adjoint() * w;
      w.noalias() -= basis.leftCols(m + 1) * proj;
    }
    double beta = w.norm();
    b[m] = beta;
    ++m;
    scale = std::max(scale, std::abs(a[m - 1]) + beta);
    bool check_now = (m % check_every == 0) || m == max_basis || beta < 1e-13 * scale;
    if (check_now && m > k) {
      MatrixXd t = MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        t(i, i) = a[i];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = b[i];
      }
      tri.compute(t);
      const VectorXd& theta = tri.eigenvalues();
      double spec_scale = std::max(std::abs(theta[0]), std::abs(theta[m - 1]));
      double tol_abs = opts.residual_tol * std::max(spec_scale, 1e-300);
      bool done = true;
      for (int i = 0; i < k; ++i)
        if (b[m - 1] * std::abs(tri.eigenvectors()(m - 1, i)) > tol_abs) {
          done = false;
          break;
        }
      if (done || m == max_basis) {
        if (!done) {
          double worst = 0.0;
          for (int i = 0; i < k; ++i)
            worst = std::max(worst, b[m - 1] * std::abs(tri.eigenvectors()(m - 1, i)));
          throw NumericsError("eigensolve did not converge: worst residual estimate " +
                              std::to_string(worst) + " for k=" + std::to_string(k) +
                              " at basis size " + std::to_string(m));
        }
        Spectrum sp;
        sp.values = theta.head(k);
        Mat ritz = basis.leftCols(m) * tri.eigenvectors().leftCols(k).cast<Scalar>();
        if constexpr (std::is_same_v<Scalar, double>)
          sp.vectors = ritz.template cast<cd>();
        else
          sp.vectors = ritz;
        // verify true residuals on the returned pairs
        for (int i = 0; i < k; ++i) {
          Vec x = ritz.col(i);
          double resid = (h * x - Scalar(theta[i]) * x).norm();
          if (resid > 50.0 * opts.residual_tol * std::max(spec_scale, 1.0))
            throw NumericsError("eigensolve residual check failed: " + std::to_string(resid));
        }
        return sp;
      }
    }
    if (m == max_basis) break;
    if (beta < 1e-13 * scale) {
      // invariant subspace exhausted; continue in a fresh random direction
      Vec fresh = random_vec();
      for (int pass = 0; pass < 2; ++pass) {
        Vec proj = basis.leftCols(m).adjoint() * fresh;
        fresh.noalias() -= basis.leftCols(m) * proj;
      }
      double norm = fresh.norm();
      if (norm < 1e-12) throw NumericsError("eigensolve could not expand the basis");
      basis.col(m) = fresh / norm;
      b[m - 1] = 0.0;
    } else {
      basis.col(m) = w / beta;
    }
  }
  throw NumericsError("eigensolve basis exhausted without convergence");
}

Spectrum dense_solve_real(const SpMatReal& h) {
  MatrixXd hd(h);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hd);
  if (es.info() != Eigen::Success) throw NumericsError("dense eigensolve failed");
  Spectrum sp;
  sp.values = es.eigenvalues();
  sp.vectors = es.eigenvectors().cast<cd>();
  return sp;
}

Spectrum dense_solve_complex(const SpMat& h) {
  MatrixXcd hd(h);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hd);
  if (es.info() != Eigen::Success) throw NumericsError("dense eigensolve failed");
  Spectrum sp;
  sp.values = es.eigenvalues();
  sp.vectors = es.eigenvectors();
  return sp;
}

Spectrum truncate_to_k(Spectrum sp, int k) {
  if (k > 0 && k < sp.values.size()) {
    sp.values.conservativeResize(k);
    sp.vectors.conservativeResize(Eigen::NoChange, k);
  }
  return sp;
}

}  // namespace

Spectrum eigensolve(const SpMatReal& h, const EigensolveOptions& opts) {
  if (h.rows() != h.cols()) throw NumericsError("eigensolve needs a square matrix");
  if (static_cast<std::size_t>(h.rows()) <= opts.dense_cap)
    return truncate_to_k(dense_solve_real(h), opts.k);
  return lanczos_lowest<double>(h, opts.k, opts);
}

Spectrum eigensolve(const SpMat& h, const EigensolveOptions& opts) {
  if (h.rows() != h.cols()) throw NumericsError("eigensolve needs a square matrix");
  if (is_real(h)) return eigensolve(real_part(h), opts);
  if (static_cast<std::size_t>(h.rows()) <= opts.dense_cap)
    return truncate_to_k(dense_solve_complex(h), opts.k);
  return lanczos_lowest<cd>(h, opts.k, opts);
}

int LabeledSpectrum::find(const std::vector<int>& occ) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == occ) return static_cast<int>(i);
  return -1;
}

int LabeledSpectrum::require(const std::vector<int>& occ) const {
  int i = find(occ);
  if (i < 0) throw PhysicsError("no labeled eigenstate for the requested occupation");
  return i;
}

double LabeledSpectrum::energy(const std::vector<int>& occ) const {
  return values[require(occ)];
}

VectorXcd LabeledSpectrum::state(const std::vector<int>& occ) const {
  return vectors.col(require(occ));
}

LabeledSpectrum label_eigenstates(const Spectrum& sp, const FockSpace& s, int max_total) {
  if (max_total < 0) throw PhysicsError("label_eigenstates needs max_total >= 0");
  LabeledSpectrum ls;
  ls.space = s;
  // enumerate occupation labels with at most max_total quanta
  std::vector<int> occ(s.levels.size(), 0);
  std::function<void(std::size_t, int)> walk = [&](std::size_t mode, int left) {
    if (mode == s.levels.size()) {
      ls.labels.push_back(occ);
      return;
    }
    for (int n = 0; n <= std::min(left, s.levels[mode] - 1); ++n) {
      occ[mode] = n;
      walk(mode + 1, left - n);
    }
    occ[mode] = 0;
  };
  walk(0, max_total);

  const int n_labels = static_cast<int>(ls.labels.size());
  const int n_eigs = static_cast<int>(sp.values.size());
  if (n_eigs < n_labels)
    throw PhysicsError("spectrum window too small: " + std::to_string(n_eigs) +
                       " eigenpairs for " + std::to_string(n_labels) + " labels");
  MatrixXd score(n_labels, n_eigs);
  for (int l = 0; l < n_labels; ++l) {
    std::size_t row = s.flatten(ls.labels[l]);
    for (int e = 0; e < n_eigs; ++e) score(l, e) = std::norm(sp.vectors(row, e));
  }
  std::vector<int> pick = max_score_assignment(score);
  ls.values.resize(n_labels);
  ls.vectors.resize(sp.vectors.rows(), n_labels);
  ls.overlap2.resize(n_labels);
  for (int l = 0; l < n_labels; ++l) {
    ls.values[l] = sp.values[pick[l]];
    ls.vectors.col(l) = sp.vectors.col(pick[l]);
    ls.overlap2[l] = score(l, pick[l]);
    if (ls.overlap2[l] < 0.5) ls.weak.push_back(l);
    // phase convention: the dominant (label) component is real positive, so
    // downstream phase extraction is deterministic
    cd dom = ls.vectors(static_cast<Eigen::Index>(s.flatten(ls.labels[l])), l);
    if (std::abs(dom) > 0.0) ls.vectors.col(l) *= std::conj(dom) / std::abs(dom);
  }
  return ls;
}

LabeledSpectrum bare_spectrum(const SystemModel& m) {
  LabeledSpectrum ls;
  ls.space = fock_space(m);
  const std::size_t dim = ls.space.dim;
  ls.labels.reserve(dim);
  ls.values.resize(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    const std::vector<int> occ = ls.space.occupations(i);
    double e = 0.0;
    for (std::size_t k = 0; k < occ.size(); ++k) {
      const double n = occ[k];
      e += m.modes[k].omega * n + 0.5 * m.modes[k].alpha * n * (n - 1.0);
    }
    ls.labels.push_back(occ);
    ls.values[static_cast<Eigen::Index>(i)] = e;
  }
  ls.vectors = MatrixXcd::Identity(static_cast<Eigen::Index>(dim),
                                   static_cast<Eigen::Index>(dim));
  ls.overlap2 = VectorXd::Ones(static_cast<Eigen::Index>(dim));
  return ls;
}

double zz_coupling(const LabeledSpectrum& ls, int mode_a, int mode_b) {
  if (mode_a == mode_b) throw PhysicsError("zz_coupling needs two distinct modes");
  std::vector<int> occ(ls.space.levels.size(), 0);
  double e00 = ls.energy(occ);
  occ[mode_a] = 1;
  double e10 = ls.energy(occ);
  occ[mode_b] = 1;
  double e11 = ls.energy(occ);
  occ[mode_a] = 0;
  double e01 = ls.energy(occ);
  return (e11 - e01) - (e10 - e00);
}

double ZzReport::max_abs() const {
  double v = 0.0;
  for (const auto& p : pairs) v = std::max(v, std::abs(p.zeta));
  return v;
}

double ZzReport::get(const std::string& a, const std::string& b) const {
  for (const auto& p : pairs)
    if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return p.zeta;
  throw PhysicsError("zz report has no pair " + a + "-" + b);
}

namespace {

// labels with <= 2 quanta needed by a full-cell zz verification, plus margin
int count_labels(const FockSpace& s, int max_total) {
  int count = 0;
  std::vector<int> occ(s.levels.size(), 0);
  std::function<void(std::size_t, int)> walk = [&](std::size_t mode, int left) {
    if (mode == s.levels.size()) {
      ++count;
      return;
    }
    for (int n = 0; n <= std::min(left, s.levels[mode] - 1); ++n) walk(mode + 1, left - n);
  };
  walk(0, max_total);
  return count;
}

LabeledSpectrum labeled_idle(const SystemModel& m, const std::vector<double>& omega,
                             int max_total, std::size_t dense_cap, int max_basis,
                             unsigned seed = 12345) {
  auto s = fock_space(m);
  EigensolveOptions opts;
  opts.dense_cap = dense_cap;
  opts.max_basis = max_basis;
  opts.seed = seed;
  if (s.dim > dense_cap) opts.k = count_labels(s, max_total) + 24;
  SpMatReal h = assemble_hamiltonian_real(m, s, omega);
  return label_eigenstates(eigensolve(h, opts), s, max_total);
}

}  // namespace

IdleResult find_idle_configuration(const SystemModel& m, const IdleOptions& opts) {
  m.validate();
  int center = m.require("c");
  IdleResult res;
  SystemModel tuned = m;

  for (const auto& ql : m.qubit_labels()) {
    std::string cl = "c" + ql.substr(1);
    int coupler = m.require(cl);
    SystemModel sub = m.submodel({ql, cl, "c"});
    int sq = sub.require(ql), sc = sub.require(cl), scen = sub.require("c");
    auto zeta_at = [&](double w) {
      SystemModel probe = sub;
      probe.modes[sc].omega = w;
      auto ls = labeled_idle(probe, probe.idle_frequencies(), 2, opts.dense_cap, 0);
      return zz_coupling(ls, scen, sq);
    };
    double lo = opts.window_lo > 0.0 ? opts.window_lo : two_pi * 3.0;
    double hi = opts.window_hi > 0.0
                    ? opts.window_hi
                    : std::min(m.modes[m.require(ql)].omega, m.modes[center].omega) -
                          two_pi * 0.12;
    if (hi <= lo) throw PhysicsError("idle search window is empty for coupler " + cl);
    double blo, bhi;
    if (!bracket_root(zeta_at, lo, hi, opts.scan_points, &blo, &bhi))
      throw PhysicsError("no zero of the center-" + ql + " zz found in the search window");
    RootResult root = find_root(zeta_at, blo, bhi, two_pi * 1e-7, 0.5 * opts.zz_tol,
                                opts.max_iter);
    if (!root.converged || std::abs(root.fx) > opts.zz_tol)
      throw PhysicsError("idle root finding for coupler " + cl + " did not reach tolerance");
    res.coupler_omega[cl] = root.x;
    res.reduced.pairs.push_back({"c", ql, root.fx});
    tuned.modes[tuned.require(cl)].omega = root.x;
  }

  // full-cell verification across every qubit/center pair
  auto ls = labeled_idle(tuned, tuned.idle_frequencies(), 2, opts.dense_cap,
                         opts.lanczos_max_basis);
  for (int w : ls.weak) {
    std::string occ_str;
    for (int n : ls.labels[w]) occ_str += std::to_string(n);
    res.warnings.push_back("weak labeling overlap " + std::to_string(ls.overlap2[w]) +
                           " for |" + occ_str + ">");
  }
  auto qubits = tuned.qubit_labels();
  std::vector<std::string> nodes = qubits;
  nodes.push_back("c");
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      double z = zz_coupling(ls, tuned.require(nodes[i]), tuned.require(nodes[j]));
      res.verification.pairs.push_back({nodes[i], nodes[j], z});
    }
  return res;
}

std::vector<ZzScanPoint> zz_landscape(const SystemModel& m,
                                      const std::vector<double>& wc1_grid,
                                      const std::vector<double>& wc2_grid) {
  SystemModel sub = m.submodel({"q1", "q2", "c", "c1", "c2"});
  int q1 = sub.require("q1"), q2 = sub.require("q2"), c = sub.require("c");
  int c1 = sub.require("c1"), c2 = sub.require("c2");
  std::vector<ZzScanPoint> out;
  for (double w1 : wc1_grid)
    for (double w2 : wc2_grid) {
      SystemModel probe = sub;
      probe.modes[c1].omega = w1;
      probe.modes[c2].omega = w2;
      auto ls = labeled_idle(probe, probe.idle_frequencies(), 2, 4096, 0);
      out.push_back({w1, w2, zz_coupling(ls, c, q1), zz_coupling(ls, c, q2),
                     zz_coupling(ls, q1, q2)});
    }
  return out;
}

}  // namespace ucsim
