#include "ucsim/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace ucsim {

namespace {

enum class ModeKind { qubit, center, coupler, invalid };

ModeKind classify(const std::string& label, int* index_out = nullptr) {
  if (label == "c") return ModeKind::center;
  if (label.size() >= 2 && (label[0] == 'q' || label[0] == 'c')) {
    for (std::size_t i = 1; i < label.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(label[i]))) return ModeKind::invalid;
    if (index_out) *index_out = std::stoi(label.substr(1));
    return label[0] == 'q' ? ModeKind::qubit : ModeKind::coupler;
  }
  return ModeKind::invalid;
}

}  // namespace

int SystemModel::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < modes.size(); ++i)
    if (modes[i].label == label) return static_cast<int>(i);
  return -1;
}

int SystemModel::require(const std::string& label) const {
  int i = index_of(label);
  if (i < 0) throw ConfigError("model has no mode labeled '" + label + "'");
  return i;
}

std::vector<double> SystemModel::idle_frequencies() const {
  std::vector<double> w(modes.size());
  for (std::size_t i = 0; i < modes.size(); ++i) w[i] = modes[i].omega;
  return w;
}

std::vector<std::string> SystemModel::qubit_labels() const {
  std::vector<std::string> out;
  for (const auto& m : modes)
    if (classify(m.label) == ModeKind::qubit) out.push_back(m.label);
  return out;
}

void SystemModel::validate() const {
  if (modes.empty()) throw ConfigError("model has no modes");
  std::set<std::string> seen;
  for (const auto& m : modes) {
    if (classify(m.label) == ModeKind::invalid)
      throw ConfigError("mode label '" + m.label + "' is not of the form q<j>, c or c<j>");
    if (!seen.insert(m.label).second)
      throw ConfigError("duplicate mode label '" + m.label + "'");
    if (m.levels < 2 || m.levels > 8)
      throw ConfigError("mode '" + m.label + "': levels must be in [2, 8]");
    if (!(m.omega > 0.0))
      throw ConfigError("mode '" + m.label + "': frequency must be positive");
    if (std::abs(m.alpha) >= m.omega)
      throw ConfigError("mode '" + m.label + "': |anharmonicity| must stay below the frequency");
  }
  std::set<std::pair<int, int>> edges;
  for (const auto& e : couplings) {
    if (e.a < 0 || e.b < 0 || e.a >= static_cast<int>(modes.size()) ||
        e.b >= static_cast<int>(modes.size()) || e.a == e.b)
      throw ConfigError("coupling references invalid mode indices");
    auto key = std::minmax(e.a, e.b);
    if (!edges.insert(key).second)
      throw ConfigError("duplicate coupling between '" + modes[e.a].label + "' and '" +
                        modes[e.b].label + "'");
    if (e.beta == 0.0 || std::abs(e.beta) >= 0.2)
      throw ConfigError("coupling '" + modes[e.a].label + "'-'" + modes[e.b].label +
                        "': beta must be nonzero with |beta| < 0.2");
    int ja = 0, jb = 0;
    ModeKind ka = classify(modes[e.a].label, &ja);
    ModeKind kb = classify(modes[e.b].label, &jb);
    bool ok = (ka == ModeKind::center && kb != ModeKind::center) ||
              (kb == ModeKind::center && ka != ModeKind::center) ||
              (ka == ModeKind::qubit && kb == ModeKind::coupler && ja == jb) ||
              (ka == ModeKind::coupler && kb == ModeKind::qubit && ja == jb);
    if (!ok)
      throw ConfigError("coupling '" + modes[e.a].label + "'-'" + modes[e.b].label +
                        "' violates the cell topology (center-qubit, center-coupler, "
                        "qubit-own-coupler only)");
  }
}

SystemModel SystemModel::submodel(const std::vector<std::string>& labels) const {
  SystemModel sub;
  std::vector<int> old_index;
  for (const auto& l : labels) {
    int i = require(l);
    sub.modes.push_back(modes[i]);
    old_index.push_back(i);
  }
  auto position = [&](int old) {
    for (std::size_t k = 0; k < old_index.size(); ++k)
      if (old_index[k] == old) return static_cast<int>(k);
    return -1;
  };
  for (const auto& e : couplings) {
    int a = position(e.a), b = position(e.b);
    if (a >= 0 && b >= 0) sub.couplings.push_back({a, b, e.beta});
  }
  return sub;
}

FockSpace::FockSpace(std::vector<int> lv) : levels(std::move(lv)) {
  if (levels.empty()) throw ConfigError("Fock space needs at least one mode");
  strides.assign(levels.size(), 1);
  for (int i = static_cast<int>(levels.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * static_cast<std::size_t>(levels[i + 1]);
  dim = strides[0] * static_cast<std::size_t>(levels[0]);
  if (dim == 0 || dim > (std::size_t(1) << 28))
    throw ConfigError("Fock space dimension out of supported range");
}

std::size_t FockSpace::flatten(const std::vector<int>& occ) const {
  if (occ.size() != levels.size())
    throw PhysicsError("occupation vector length does not match mode count");
  std::size_t idx = 0;
  for (std::size_t m = 0; m < occ.size(); ++m) {
    if (occ[m] < 0 || occ[m] >= levels[m])
      throw PhysicsError("occupation exceeds retained levels for mode " + std::to_string(m));
    idx += strides[m] * static_cast<std::size_t>(occ[m]);
  }
  return idx;
}

void FockSpace::unflatten(std::size_t idx, std::vector<int>& occ) const {
  if (idx >= dim) throw PhysicsError("basis index out of range");
  occ.resize(levels.size());
  for (std::size_t m = 0; m < levels.size(); ++m) {
    occ[m] = static_cast<int>(idx / strides[m]);
    idx -= strides[m] * static_cast<std::size_t>(occ[m]);
  }
}

std::vector<int> FockSpace::occupations(std::size_t idx) const {
  std::vector<int> occ;
  unflatten(idx, occ);
  return occ;
}

FockSpace fock_space(const SystemModel& m) {
  std::vector<int> lv;
  for (const auto& mode : m.modes) lv.push_back(mode.levels);
  return FockSpace(lv);
}

FockSpace fock_space(const SystemModel& m, const std::map<std::string, int>& levels_override) {
  std::vector<int> lv;
  for (const auto& mode : m.modes) {
    auto it = levels_override.find(mode.label);
    lv.push_back(it == levels_override.end() ? mode.levels : it->second);
  }
  for (const auto& [label, n] : levels_override)
    if (m.index_of(label) < 0)
      throw ConfigError("levels override names unknown mode '" + label + "'");
  return FockSpace(lv);
}

double coupling_strength(double beta, double omega_a, double omega_b) {
  if (!(omega_a > 0.0) || !(omega_b > 0.0))
    throw PhysicsError("coupling_strength needs positive mode frequencies");
  return beta * std::sqrt(omega_a * omega_b);
}

SpMat number_operator(const FockSpace& s, int mode) {
  SpMat n(s.dim, s.dim);
  std::vector<Eigen::Triplet<cd>> trip;
  trip.reserve(s.dim);
  for (std::size_t i = 0; i < s.dim; ++i) {
    int occ = static_cast<int>(i / s.strides[mode]) % s.levels[mode];
    if (occ > 0) trip.emplace_back(i, i, cd(occ, 0.0));
  }
  n.setFromTriplets(trip.begin(), trip.end());
  return n;
}

SpMat lowering_operator(const FockSpace& s, int mode) {
  SpMat a(s.dim, s.dim);
  std::vector<Eigen::Triplet<cd>> trip;
  for (std::size_t i = 0; i < s.dim; ++i) {
    int occ = static_cast<int>(i / s.strides[mode]) % s.levels[mode];
    if (occ > 0) trip.emplace_back(i - s.strides[mode], i, cd(std::sqrt(double(occ)), 0.0));
  }
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

SpMat charge_operator(const FockSpace& s, int mode) {
  SpMat q(s.dim, s.dim);
  std::vector<Eigen::Triplet<cd>> trip;
  for (std::size_t i = 0; i < s.dim; ++i) {
    int occ = static_cast<int>(i / s.strides[mode]) % s.levels[mode];
    if (occ > 0) {
      double r = std::sqrt(double(occ));
      trip.emplace_back(i, i - s.strides[mode], cd(0.0, r));    // i*adag
      trip.emplace_back(i - s.strides[mode], i, cd(0.0, -r));   // -i*a
    }
  }
  q.setFromTriplets(trip.begin(), trip.end());
  return q;
}

namespace {

// Enumerates every coupling matrix entry as cb(row, col, edge, coef) where the
// Hamiltonian value is coef * g_edge; sign conventions follow
// -g (adag_a - a_a)(adag_b - a_b), of which RWA keeps +g(adag_a a_b + h.c.).
template <typename Callback>
void for_each_coupling_entry(const SystemModel& m, const FockSpace& s, CouplingForm form,
                             Callback cb) {
  for (std::size_t e = 0; e < m.couplings.size(); ++e) {
    const auto& cpl = m.couplings[e];
    int a = cpl.a, b = cpl.b;
    std::size_t sa = s.strides[a], sb = s.strides[b];
    for (std::size_t i = 0; i < s.dim; ++i) {
      int na = static_cast<int>(i / sa) % s.levels[a];
      int nb = static_cast<int>(i / sb) % s.levels[b];
      // adag_a a_b: needs na < max, nb > 0
      if (na + 1 < s.levels[a] && nb > 0)
        cb(i + sa - sb, i, static_cast<int>(e), std::sqrt(double(na + 1) * nb));
      // a_a adag_b
      if (na > 0 && nb + 1 < s.levels[b])
        cb(i - sa + sb, i, static_cast<int>(e), std::sqrt(double(na) * (nb + 1)));
      if (form == CouplingForm::full) {
        // -adag_a adag_b
        if (na + 1 < s.levels[a] && nb + 1 < s.levels[b])
          cb(i + sa + sb, i, static_cast<int>(e), -std::sqrt(double(na + 1) * (nb + 1)));
        // -a_a a_b
        if (na > 0 && nb > 0)
          cb(i - sa - sb, i, static_cast<int>(e), -std::sqrt(double(na) * nb));
      }
    }
  }
}

std::vector<double> edge_strengths(const SystemModel& m, const std::vector<double>& omega) {
  if (omega.size() != m.modes.size())
    throw PhysicsError("frequency vector length does not match mode count");
  std::vector<double> g(m.couplings.size());
  for (std::size_t e = 0; e < m.couplings.size(); ++e)
    g[e] = coupling_strength(m.couplings[e].beta, omega[m.couplings[e].a],
                             omega[m.couplings[e].b]);
  return g;
}

template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> assemble_impl(const SystemModel& m,
                                                           const FockSpace& s,
                                                           const std::vector<double>& omega,
                                                           CouplingForm form) {
  auto g = edge_strengths(m, omega);
  std::vector<Eigen::Triplet<Scalar>> trip;
  trip.reserve(s.dim * (1 + 4 * m.couplings.size()));
  std::vector<int> occ;
  for (std::size_t i = 0; i < s.dim; ++i) {
    s.unflatten(i, occ);
    double d = 0.0;
    for (std::size_t mm = 0; mm < occ.size(); ++mm)
      d += omega[mm] * occ[mm] + 0.5 * m.modes[mm].alpha * occ[mm] * (occ[mm] - 1);
    trip.emplace_back(i, i, Scalar(d));
  }
  for_each_coupling_entry(m, s, form,
                          [&](std::size_t r, std::size_t c, int e, double coef) {
                            trip.emplace_back(r, c, Scalar(coef * g[e]));
                          });
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> h(s.dim, s.dim);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

}  // namespace

SpMat assemble_hamiltonian(const SystemModel& m, const FockSpace& s,
                           const std::vector<double>& omega, CouplingForm form) {
  return assemble_impl<cd>(m, s, omega, form);
}

SpMatReal assemble_hamiltonian_real(const SystemModel& m, const FockSpace& s,
                                    const std::vector<double>& omega, CouplingForm form) {
  return assemble_impl<double>(m, s, omega, form);
}

HamiltonianWorkspace::HamiltonianWorkspace(const SystemModel& m, const FockSpace& s,
                                           CouplingForm form, std::vector<int> driven_modes)
    : model_(&m), space_(s), driven_(std::move(driven_modes)) {
  const std::size_t nm = m.modes.size();
  occ_.resize(s.dim * nm);
  diag_anh_.resize(s.dim);
  std::vector<int> occ;
  for (std::size_t i = 0; i < s.dim; ++i) {
    s.unflatten(i, occ);
    double anh = 0.0;
    for (std::size_t mm = 0; mm < nm; ++mm) {
      occ_[i * nm + mm] = static_cast<std::uint8_t>(occ[mm]);
      anh += 0.5 * m.modes[mm].alpha * occ[mm] * (occ[mm] - 1);
    }
    diag_anh_[i] = anh;
  }

  std::vector<Eigen::Triplet<cd>> trip;
  for (std::size_t i = 0; i < s.dim; ++i) trip.emplace_back(i, i, cd(1.0, 0.0));
  for_each_coupling_entry(m, s, form,
                          [&](std::size_t r, std::size_t c, int, double) {
                            trip.emplace_back(r, c, cd(1.0, 0.0));
                          });
  for (int slot = 0; slot < static_cast<int>(driven_.size()); ++slot) {
    int mode = driven_[slot];
    std::size_t st = s.strides[mode];
    for (std::size_t i = 0; i < s.dim; ++i) {
      int n = static_cast<int>(i / st) % s.levels[mode];
      if (n > 0) {
        trip.emplace_back(i, i - st, cd(1.0, 0.0));
        trip.emplace_back(i - st, i, cd(1.0, 0.0));
      }
    }
  }
  proto_ = SpMat(s.dim, s.dim);
  proto_.setFromTriplets(trip.begin(), trip.end());
  proto_.makeCompressed();

  auto pos_of = [&](std::size_t row, std::size_t col) {
    const auto* outer = proto_.outerIndexPtr();
    const auto* inner = proto_.innerIndexPtr();
    auto lo = outer[row], hi = outer[row + 1];
    auto it = std::lower_bound(inner + lo, inner + hi, static_cast<SpMat::StorageIndex>(col));
    if (it == inner + hi || *it != static_cast<SpMat::StorageIndex>(col))
      throw NumericsError("internal: missing entry in Hamiltonian pattern");
    return static_cast<std::size_t>(it - inner);
  };

  diag_pos_.resize(s.dim);
  for (std::size_t i = 0; i < s.dim; ++i) diag_pos_[i] = pos_of(i, i);
  for_each_coupling_entry(m, s, form,
                          [&](std::size_t r, std::size_t c, int e, double coef) {
                            edge_entries_.push_back({pos_of(r, c), e, coef});
                          });
  for (int slot = 0; slot < static_cast<int>(driven_.size()); ++slot) {
    int mode = driven_[slot];
    std::size_t st = s.strides[mode];
    for (std::size_t i = 0; i < s.dim; ++i) {
      int n = static_cast<int>(i / st) % s.levels[mode];
      if (n > 0) {
        double r = std::sqrt(double(n));
        drive_entries_.push_back({pos_of(i, i - st), slot, r});
        drive_entries_.push_back({pos_of(i - st, i), slot, -r});
      }
    }
  }
}

void HamiltonianWorkspace::fill(const std::vector<double>& omega,
                                const std::vector<double>& drive_coeff, SpMat& out) const {
  if (out.nonZeros() != proto_.nonZeros())
    throw NumericsError("workspace fill target does not share the prototype pattern");
  if (drive_coeff.size() != driven_.size())
    throw PhysicsError("drive coefficient count does not match driven modes");
  auto g = edge_strengths(*model_, omega);
  cd* val = out.valuePtr();
  std::fill(val, val + out.nonZeros(), cd(0.0, 0.0));
  const std::size_t nm = model_->modes.size();
  for (std::size_t i = 0; i < space_.dim; ++i) {
    double d = diag_anh_[i];
    const std::uint8_t* row = &occ_[i * nm];
    for (std::size_t mm = 0; mm < nm; ++mm) d += omega[mm] * row[mm];
    val[diag_pos_[i]] = cd(d, 0.0);
  }
  for (const auto& e : edge_entries_) val[e.pos] += cd(e.coef * g[e.edge], 0.0);
  for (const auto& de : drive_entries_)
    val[de.pos] += cd(0.0, de.imag * drive_coeff[de.slot]);
}

}  // namespace ucsim
