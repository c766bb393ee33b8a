#include "ucsim/propagate.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ucsim {

namespace {

// positions of the diagonal entries in the CSR value array, or empty if any
// row lacks one (then the spectral shift is skipped)
std::vector<std::size_t> diagonal_positions(const SpMat& m) {
  std::vector<std::size_t> pos;
  pos.reserve(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    bool found = false;
    for (SpMat::InnerIterator it(m, r); it; ++it) {
      if (it.col() == r) {
        pos.push_back(static_cast<std::size_t>(&it.value() - m.valuePtr()));
        found = true;
        break;
      }
    }
    if (!found) return {};
  }
  return pos;
}

void check_same_pattern(const SpMat& a, const SpMat& b) {
  if (a.nonZeros() != b.nonZeros() || a.rows() != b.rows())
    throw NumericsError("generator changed its sparsity pattern");
}

}  // namespace

StaticGenerator::StaticGenerator(SpMat m, bool anti_hermitian)
    : m_(std::move(m)), anti_(anti_hermitian) {
  if (m_.rows() != m_.cols())
    throw ConfigError("generator matrix must be square");
  m_.makeCompressed();
}

ScheduleGenerator::ScheduleGenerator(const SystemModel& m, const FockSpace& s,
                                     PulseSchedule schedule, CouplingForm form)
    : ws_(m, s, form, schedule.driven_modes()), schedule_(std::move(schedule)) {
  schedule_.validate();
  if (schedule_.n_modes != m.modes.size())
    throw ConfigError("schedule and model disagree on the mode count");
  idle_ = m.idle_frequencies();
  proto_ = ws_.prototype();
  for (Eigen::Index k = 0; k < proto_.nonZeros(); ++k)
    proto_.valuePtr()[k] *= -iu;
  h_ = ws_.prototype();
}

void ScheduleGenerator::eval(double t, SpMat& out) const {
  check_same_pattern(out, proto_);
  schedule_.frequencies_at(t, idle_, omega_scratch_);
  schedule_.drive_coefficients_at(t, drive_scratch_);
  ws_.fill(omega_scratch_, drive_scratch_, h_);
  const cd* src = h_.valuePtr();
  cd* dst = out.valuePtr();
  for (Eigen::Index k = 0; k < h_.nonZeros(); ++k) dst[k] = -iu * src[k];
}

void MagnusConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("magnus dt must be positive");
  if (krylov_dim < 2 || krylov_dim > 40)
    throw ConfigError("krylov_dim must lie in [2, 40]");
  if (!(krylov_tol > 0.0)) throw ConfigError("krylov_tol must be positive");
}

VectorXcd krylov_expm_apply(
    const std::function<void(const VectorXcd&, VectorXcd&)>& action,
    const VectorXcd& v, bool anti_hermitian, int max_dim, double tol,
    KrylovInfo* info) {
  const Eigen::Index n = v.size();
  const double beta0 = v.norm();
  if (info) *info = {};
  if (beta0 == 0.0) return v;
  const int m_cap = static_cast<int>(std::min<Eigen::Index>(max_dim, n));

  MatrixXcd basis(n, m_cap + 1);
  basis.col(0) = v / beta0;
  VectorXcd w(n);

  // projected operator: real symmetric tridiagonal (alpha, beta) of iU for
  // the Lanczos branch, dense upper-Hessenberg of U for Arnoldi
  VectorXd alpha(m_cap), beta(m_cap);
  MatrixXcd hess = MatrixXcd::Zero(m_cap + 1, m_cap);

  VectorXcd small_exp;
  auto exp_col0 = [&](int j) {
    // first column of exp(U_j), U_j the j x j projection of U
    if (anti_hermitian) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es;
      MatrixXd t_j = MatrixXd::Zero(j, j);
      for (int k = 0; k < j; ++k) {
        t_j(k, k) = alpha[k];
        if (k + 1 < j) t_j(k, k + 1) = t_j(k + 1, k) = beta[k];
      }
      es.compute(t_j);
      // exp(U_j) = exp(-i T_j)
      VectorXcd phases =
          (-iu * es.eigenvalues().array()).exp().matrix();
      small_exp = es.eigenvectors().cast<cd>() *
                  (phases.array() *
                   es.eigenvectors().row(0).transpose().cast<cd>().array())
                      .matrix();
    } else {
      small_exp = hess.topLeftCorner(j, j).exp().col(0);
    }
  };

  const double breakdown = 1e-14;
  int m_used = 0;
  double resid = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m_cap; ++j) {
    action(basis.col(j), w);
    if (anti_hermitian) w *= iu;  // Lanczos runs on the Hermitian iU

    // full (two-pass) orthogonalization against the basis so far; cheap at
    // these subspace sizes and it removes the classical Lanczos ghosts
    if (anti_hermitian) alpha[j] = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
      VectorXcd proj = basis.leftCols(j + 1).adjoint() * w;
      w.noalias() -= basis.leftCols(j + 1) * proj;
      if (anti_hermitian) {
        alpha[j] += proj[j].real();
      } else {
        hess.col(j).head(j + 1) += proj;
      }
    }
    const double nrm = w.norm();
    m_used = j + 1;
    exp_col0(m_used);
    if (nrm <= breakdown * std::max(1.0, beta0)) {
      resid = 0.0;
      if (info) info->happy_breakdown = true;
      break;
    }
    if (anti_hermitian) {
      beta[j] = nrm;
    } else {
      hess(j + 1, j) = nrm;
    }
    resid = nrm * std::abs(small_exp[j]);
    if (resid < tol) break;
    basis.col(j + 1) = w / nrm;
  }

  if (info) {
    info->dim_used = m_used;
    info->residual = resid;
  }
  if (resid >= tol && !(info && info->happy_breakdown)) {
    std::ostringstream os;
    os << "krylov subspace hit the cap m = " << m_used
       << " with residual estimate " << resid
       << "; reduce the magnus step dt (or raise krylov_dim)";
    throw NumericsError(os.str());
  }
  return basis.leftCols(m_used) * (beta0 * small_exp);
}

namespace {

// Owns the per-step scratch: generator samples M1, M2 and the combined
// B0 (shifted), B1 value arrays, all sharing the prototype pattern.
class MagnusStepper {
 public:
  MagnusStepper(const Generator& gen, const MagnusConfig& cfg)
      : gen_(gen),
        cfg_(cfg),
        m1_(gen.prototype()),
        m2_(gen.prototype()),
        b0_(gen.prototype()),
        b1_(gen.prototype()),
        diag_(diagonal_positions(b0_)) {
    cfg_.validate();
    if (!gen_.time_dependent()) {
      gen_.eval(0.0, m1_);
      b0_ = m1_;
      prepare_shift();
    }
  }

  VectorXcd step(double t, double dt, const VectorXcd& v, KrylovInfo* info) {
    static const double node = 0.5 / std::sqrt(3.0);
    const bool moving = gen_.time_dependent();
    if (moving) {
      gen_.eval(t + dt * (0.5 - node), m1_);
      gen_.eval(t + dt * (0.5 + node), m2_);
      cd* b0 = b0_.valuePtr();
      cd* b1 = b1_.valuePtr();
      const cd* s1 = m1_.valuePtr();
      const cd* s2 = m2_.valuePtr();
      const double c1 = 1.0 / (4.0 * std::sqrt(3.0));
      for (Eigen::Index k = 0; k < b0_.nonZeros(); ++k) {
        b0[k] = 0.5 * (s1[k] + s2[k]);
        b1[k] = c1 * (s2[k] - s1[k]);
      }
      prepare_shift();
    }

    auto action = [&](const VectorXcd& u, VectorXcd& out) {
      w1_.noalias() = b0_ * u;
      if (moving) {
        w2_.noalias() = b1_ * u;
        w3_.noalias() = b0_ * w2_;
        w2_.noalias() = b1_ * w1_;  // reuse as B1 B0 u
        out = dt * w1_ - (dt * dt) * (w3_ - w2_);
      } else {
        out = dt * w1_;
      }
    };
    VectorXcd next = krylov_expm_apply(action, v, gen_.anti_hermitian(),
                                       cfg_.krylov_dim, cfg_.krylov_tol, info);
    if (shift_ != cd(0.0, 0.0)) next *= std::exp(dt * shift_);
    return next;
  }

 private:
  void prepare_shift() {
    shift_ = cd(0.0, 0.0);
    if (diag_.empty()) return;
    cd* b0 = b0_.valuePtr();
    cd tr(0.0, 0.0);
    for (std::size_t p : diag_) tr += b0[p];
    shift_ = tr / static_cast<double>(diag_.size());
    for (std::size_t p : diag_) b0[p] -= shift_;
  }

  const Generator& gen_;
  MagnusConfig cfg_;
  SpMat m1_, m2_, b0_, b1_;
  std::vector<std::size_t> diag_;
  cd shift_{0.0, 0.0};
  VectorXcd w1_, w2_, w3_;
};

}  // namespace

VectorXcd magnus_step(const Generator& gen, double t, double dt,
                      const VectorXcd& v, const MagnusConfig& cfg,
                      KrylovInfo* info) {
  MagnusStepper stepper(gen, cfg);
  return stepper.step(t, dt, v, info);
}

Trajectory evolve(const Generator& gen, const MagnusConfig& cfg,
                  const VectorXcd& initial, const std::vector<double>& t_grid) {
  cfg.validate();
  if (t_grid.empty()) throw ConfigError("evolve needs a non-empty time grid");
  for (std::size_t k = 1; k < t_grid.size(); ++k)
    if (!(t_grid[k] > t_grid[k - 1]))
      throw ConfigError("evolve needs a strictly ascending time grid");
  if (initial.size() != gen.dim())
    throw ConfigError("initial state dimension mismatch");

  MagnusStepper stepper(gen, cfg);
  Trajectory traj;
  traj.times = t_grid;
  traj.states.reserve(t_grid.size());
  traj.states.push_back(initial);
  traj.max_residual.assign(t_grid.size() - 1, 0.0);
  traj.max_krylov_dim.assign(t_grid.size() - 1, 0);

  VectorXcd state = initial;
  KrylovInfo info;
  for (std::size_t k = 0; k + 1 < t_grid.size(); ++k) {
    double t = t_grid[k];
    const double t_end = t_grid[k + 1];
    while (t < t_end - 1e-12) {
      const double h = std::min(cfg.dt, t_end - t);
      state = stepper.step(t, h, state, &info);
      traj.max_residual[k] = std::max(traj.max_residual[k], info.residual);
      traj.max_krylov_dim[k] = std::max(traj.max_krylov_dim[k], info.dim_used);
      t += h;
    }
    traj.states.push_back(state);
  }
  return traj;
}

double step_halving_error(const Generator& gen, const MagnusConfig& cfg,
                          const VectorXcd& initial, double t0, double t1) {
  MagnusConfig half = cfg;
  half.dt = 0.5 * cfg.dt;
  auto a = evolve(gen, cfg, initial, {t0, t1});
  auto b = evolve(gen, half, initial, {t0, t1});
  return (a.final_state() - b.final_state()).cwiseAbs().maxCoeff();
}

namespace {

SpMat spkron(const SpMat& a, const SpMat& b) {
  SpMat r(a.rows() * b.rows(), a.cols() * b.cols());
  r = Eigen::kroneckerProduct(a, b);
  r.makeCompressed();
  return r;
}

}  // namespace

SpMat hamiltonian_liouvillian(const SpMat& h) {
  const Eigen::Index n = h.rows();
  SpMat id(n, n);
  id.setIdentity();
  SpMat a = (-iu * h).eval();
  SpMat at = SpMat(a.transpose());
  SpMat out = (spkron(id, a) - spkron(at, id)).eval();
  return out;
}

namespace {

void add_dissipator(SpMat& acc, const SpMat& id, const SpMat& l, double rate) {
  if (rate == 0.0) return;
  SpMat lbar = l.conjugate();
  SpMat ldl = (SpMat(l.adjoint()) * l).eval();
  SpMat ldl_t = SpMat(ldl.transpose());
  SpMat term =
      (spkron(lbar, l) - 0.5 * spkron(id, ldl) - 0.5 * spkron(ldl_t, id))
          .eval();
  acc = (acc + rate * term).eval();
}

}  // namespace

SpMat lindblad_dissipators(const FockSpace& s,
                           const std::vector<ModeNoise>& noise) {
  if (noise.size() != s.levels.size())
    throw ConfigError("one noise entry per mode required");
  const Eigen::Index n = static_cast<Eigen::Index>(s.dim);
  SpMat id(n, n);
  id.setIdentity();
  SpMat acc(n * n, n * n);
  for (std::size_t m = 0; m < noise.size(); ++m) {
    const ModeNoise& nm = noise[m];
    if (nm.gamma < 0.0 || nm.kappa_phi < 0.0 || nm.n_bar < 0.0)
      throw PhysicsError("noise rates and occupations must be nonnegative");
    SpMat low = lowering_operator(s, static_cast<int>(m));
    add_dissipator(acc, id, low, nm.gamma * (nm.n_bar + 1.0));
    if (nm.n_bar > 0.0) {
      SpMat raise = SpMat(low.adjoint());
      add_dissipator(acc, id, raise, nm.gamma * nm.n_bar);
    }
    add_dissipator(acc, id, number_operator(s, static_cast<int>(m)),
                   2.0 * nm.kappa_phi);
  }
  return acc;
}

SpMat lindblad_liouvillian(const SpMat& h, const FockSpace& s,
                           const std::vector<ModeNoise>& noise) {
  SpMat out = hamiltonian_liouvillian(h);
  out = (out + lindblad_dissipators(s, noise)).eval();
  return out;
}

LindbladGenerator::LindbladGenerator(const SystemModel& m, const FockSpace& s,
                                     PulseSchedule schedule,
                                     const std::vector<ModeNoise>& noise,
                                     CouplingForm form)
    : ham_(m, s, std::move(schedule), form),
      diss_(lindblad_dissipators(s, noise)) {
  h_ = ham_.prototype();
  ham_.eval(0.0, h_);
  // -iH is already the evaluated generator: L_H = I kron (-iH) - (-iH)^T kron I
  const Eigen::Index n = h_.rows();
  SpMat id(n, n);
  id.setIdentity();
  SpMat ht = SpMat(h_.transpose());
  proto_ = (spkron(id, h_) - spkron(ht, id) + diss_).eval();
}

void LindbladGenerator::eval(double t, SpMat& out) const {
  check_same_pattern(out, proto_);
  ham_.eval(t, h_);
  const Eigen::Index n = h_.rows();
  SpMat id(n, n);
  id.setIdentity();
  SpMat ht = SpMat(h_.transpose());
  SpMat l = (spkron(id, h_) - spkron(ht, id) + diss_).eval();
  check_same_pattern(l, proto_);
  std::copy(l.valuePtr(), l.valuePtr() + l.nonZeros(), out.valuePtr());
}

}  // namespace ucsim
