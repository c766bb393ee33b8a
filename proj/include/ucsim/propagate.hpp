#pragma once

#include <functional>
#include <vector>

#include "ucsim/model.hpp"
#include "ucsim/pulses.hpp"

namespace ucsim {

// Time-dependent generator of dv/dt = M(t) v. Implementations write M(t)
// into a matrix sharing the fixed sparsity pattern of prototype().
class Generator {
 public:
  virtual ~Generator() = default;
  virtual Eigen::Index dim() const = 0;
  virtual const SpMat& prototype() const = 0;
  // out must be pattern-identical to prototype() (start from a copy)
  virtual void eval(double t, SpMat& out) const = 0;
  // anti-hermitian M admits the Lanczos short recurrence
  virtual bool anti_hermitian() const { return false; }
  virtual bool time_dependent() const { return true; }
};

// Fixed generator, e.g. an idle Hamiltonian (-iH) or a static Liouvillian.
class StaticGenerator final : public Generator {
 public:
  StaticGenerator(SpMat m, bool anti_hermitian);
  Eigen::Index dim() const override { return m_.rows(); }
  const SpMat& prototype() const override { return m_; }
  void eval(double, SpMat& out) const override { out = m_; }
  bool anti_hermitian() const override { return anti_; }
  bool time_dependent() const override { return false; }

 private:
  SpMat m_;
  bool anti_;
};

// -iH(t) for a flux/drive pulse schedule over a model.
class ScheduleGenerator final : public Generator {
 public:
  ScheduleGenerator(const SystemModel& m, const FockSpace& s,
                    PulseSchedule schedule,
                    CouplingForm form = CouplingForm::full);
  Eigen::Index dim() const override { return proto_.rows(); }
  const SpMat& prototype() const override { return proto_; }
  void eval(double t, SpMat& out) const override;
  bool anti_hermitian() const override { return true; }
  const PulseSchedule& schedule() const { return schedule_; }

 private:
  HamiltonianWorkspace ws_;
  PulseSchedule schedule_;
  std::vector<double> idle_;
  SpMat proto_;
  mutable SpMat h_;  // scratch for the Hermitian fill
  mutable std::vector<double> omega_scratch_;
  mutable std::vector<double> drive_scratch_;
};

// Per-mode incoherent rates; n_bar is the thermal occupation of the bath
// seen by the mode.
struct ModeNoise {
  double gamma = 0.0;      // relaxation rate, 1/ns
  double kappa_phi = 0.0;  // pure dephasing rate, 1/ns
  double n_bar = 0.0;
};

// Column-stacking Liouvillian: vec(rho) stacks columns, vec(A rho B) =
// (B^T kron A) vec(rho). The dissipators per mode are gamma(n_bar+1) D[a],
// gamma n_bar D[adag] and 2 kappa_phi D[n].
SpMat lindblad_liouvillian(const SpMat& h, const FockSpace& s,
                           const std::vector<ModeNoise>& noise);
// dissipator-only part, reusable under a changing Hamiltonian
SpMat lindblad_dissipators(const FockSpace& s,
                           const std::vector<ModeNoise>& noise);
// -i(I kron H - H^T kron I)
SpMat hamiltonian_liouvillian(const SpMat& h);

// Open-system generator combining a pulse schedule with static dissipators.
class LindbladGenerator final : public Generator {
 public:
  LindbladGenerator(const SystemModel& m, const FockSpace& s,
                    PulseSchedule schedule, const std::vector<ModeNoise>& noise,
                    CouplingForm form = CouplingForm::full);
  Eigen::Index dim() const override { return proto_.rows(); }
  const SpMat& prototype() const override { return proto_; }
  void eval(double t, SpMat& out) const override;
  bool anti_hermitian() const override { return false; }

 private:
  ScheduleGenerator ham_;
  SpMat diss_;
  SpMat proto_;
  mutable SpMat h_;
};

struct MagnusConfig {
  double dt = 0.02;          // ns; 0.002 recommended when charge drives run
  int krylov_dim = 30;       // max Krylov dimension, 2..40
  double krylov_tol = 1e-10; // residual target for exp(U) v

  void validate() const;
};

struct KrylovInfo {
  int dim_used = 0;
  double residual = 0.0;
  bool happy_breakdown = false;
};

// result ~= exp(U) v where U is given through its matrix action. When
// anti_hermitian, iU is Hermitian and the Lanczos recurrence with full
// reorthogonalization is used; otherwise Arnoldi with a dense exponential of
// the small projected matrix. Throws NumericsError if the residual estimate
// stays above tol at the dimension cap.
VectorXcd krylov_expm_apply(
    const std::function<void(const VectorXcd&, VectorXcd&)>& action,
    const VectorXcd& v, bool anti_hermitian, int max_dim, double tol,
    KrylovInfo* info = nullptr);

// One Magnus step from t to t+dt: v -> exp(dt B0 - dt^2 [B0, B1]) v with
// B0, B1 from 2-point Gauss-Legendre samples of the generator. The
// commutator is never formed; its action costs four products per vector.
VectorXcd magnus_step(const Generator& gen, double t, double dt,
                      const VectorXcd& v, const MagnusConfig& cfg,
                      KrylovInfo* info = nullptr);

struct Trajectory {
  std::vector<double> times;
  std::vector<VectorXcd> states;
  std::vector<double> max_residual;  // worst Krylov estimate per grid interval
  std::vector<int> max_krylov_dim;   // largest subspace per grid interval

  const VectorXcd& final_state() const { return states.back(); }
};

// Fixed-step propagation that lands exactly on every grid point (the last
// step of an interval is shortened). t_grid must be ascending; the first
// entry is the start time.
Trajectory evolve(const Generator& gen, const MagnusConfig& cfg,
                  const VectorXcd& initial, const std::vector<double>& t_grid);

// max-norm difference at t1 between propagation at cfg.dt and cfg.dt/2;
// cheap self-check that the step size resolves the schedule
double step_halving_error(const Generator& gen, const MagnusConfig& cfg,
                          const VectorXcd& initial, double t0, double t1);

}  // namespace ucsim
