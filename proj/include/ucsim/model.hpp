#pragma once

#include <map>
#include <string>
#include <vector>

#include "ucsim/types.hpp"

namespace ucsim {

// One anharmonic (Duffing) mode of the cell. Labels follow the cell naming:
// "q1".."q6" qubits, "c" center mode, "c1".."c6" tunable couplers.
struct Mode {
  std::string label;
  double omega = 0.0;  // bare frequency, rad/ns
  double alpha = 0.0;  // anharmonicity, rad/ns (negative for transmons)
  int levels = 3;      // retained Fock levels
};

// Undirected coupling edge with dimensionless strength beta.
// The charge-charge coupling at mode frequencies (wa, wb) is beta*sqrt(wa*wb).
struct Coupling {
  int a = -1;
  int b = -1;
  double beta = 0.0;
};

struct SystemModel {
  std::vector<Mode> modes;
  std::vector<Coupling> couplings;

  int index_of(const std::string& label) const;
  int require(const std::string& label) const;  // throws ConfigError if absent
  // checks labels, level counts, frequencies and the allowed cell topology
  // (center-qubit, qubit-own-coupler, center-coupler edges only)
  void validate() const;
  std::vector<double> idle_frequencies() const;
  std::vector<std::string> qubit_labels() const;
  // sub-cell restricted to the given mode labels; couplings between kept
  // modes are retained
  SystemModel submodel(const std::vector<std::string>& labels) const;
};

// Row-major multi-index codec over mode occupation numbers; the last listed
// mode varies fastest.
struct FockSpace {
  std::vector<int> levels;
  std::vector<std::size_t> strides;
  std::size_t dim = 0;

  FockSpace() = default;
  explicit FockSpace(std::vector<int> lv);
  std::size_t flatten(const std::vector<int>& occ) const;
  void unflatten(std::size_t idx, std::vector<int>& occ) const;
  std::vector<int> occupations(std::size_t idx) const;
};

FockSpace fock_space(const SystemModel& m);
FockSpace fock_space(const SystemModel& m, const std::map<std::string, int>& levels_override);

double coupling_strength(double beta, double omega_a, double omega_b);

enum class CouplingForm { full, rwa };

SpMat number_operator(const FockSpace& s, int mode);
SpMat lowering_operator(const FockSpace& s, int mode);
// i*(adag - a), the dimensionless charge quadrature entering drives
SpMat charge_operator(const FockSpace& s, int mode);

// Duffing Hamiltonian at the given mode frequencies (rad/ns):
//   H = sum_m [w_m n_m + (alpha_m/2) n_m(n_m-1)]
//       - sum_edges beta*sqrt(w_a w_b) (adag_a - a_a)(adag_b - a_b)
// CouplingForm::rwa keeps only +g (adag_a a_b + a_a adag_b).
SpMat assemble_hamiltonian(const SystemModel& m, const FockSpace& s,
                           const std::vector<double>& omega,
                           CouplingForm form = CouplingForm::full);
SpMatReal assemble_hamiltonian_real(const SystemModel& m, const FockSpace& s,
                                    const std::vector<double>& omega,
                                    CouplingForm form = CouplingForm::full);

// Reusable assembler for time-dependent sweeps: the sparsity pattern is built
// once, fill() only rewrites the value array. Driven modes additionally carry
// a real coefficient c for the Hermitian term c * i*(adag - a).
class HamiltonianWorkspace {
 public:
  HamiltonianWorkspace(const SystemModel& m, const FockSpace& s,
                       CouplingForm form = CouplingForm::full,
                       std::vector<int> driven_modes = {});

  const SpMat& prototype() const { return proto_; }
  const std::vector<int>& driven_modes() const { return driven_; }

  // out must share the prototype's sparsity pattern (start from a copy of it);
  // drive_coeff is indexed like driven_modes() and may be empty when no mode
  // is driven
  void fill(const std::vector<double>& omega,
            const std::vector<double>& drive_coeff, SpMat& out) const;

 private:
  struct EdgeEntry {
    std::size_t pos;  // offset into the CSR value array
    int edge;
    double coef;  // +-sqrt factors, sign includes the -g and RWA conventions
  };
  struct DriveEntry {
    std::size_t pos;
    int slot;    // index into drive_coeff
    double imag; // value contribution is i*imag*c
  };

  const SystemModel* model_;
  FockSpace space_;
  SpMat proto_;
  std::vector<int> driven_;
  std::vector<std::uint8_t> occ_;      // dim x n_modes occupation table
  std::vector<double> diag_anh_;       // per-state anharmonic diagonal
  std::vector<std::size_t> diag_pos_;  // CSR offset of each diagonal entry
  std::vector<EdgeEntry> edge_entries_;
  std::vector<DriveEntry> drive_entries_;
};

}  // namespace ucsim
