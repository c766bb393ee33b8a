#include "ucsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace ucsim {

std::vector<double> mode_occupations(const VectorXcd& state, const FockSpace& s) {
  const std::size_t n_modes = s.levels.size();
  std::vector<double> occ(n_modes, 0.0);
  std::vector<int> digits(n_modes, 0);
  for (std::size_t i = 0; i < s.dim; ++i) {
    const double w = std::norm(state[static_cast<Eigen::Index>(i)]);
    if (w == 0.0) continue;
    s.unflatten(i, digits);
    for (std::size_t l = 0; l < n_modes; ++l) occ[l] += w * digits[l];
  }
  return occ;
}

double inverse_participation_ratio(const VectorXcd& state, const FockSpace& s) {
  if (static_cast<std::size_t>(state.size()) != s.dim)
    throw ConfigError("state dimension does not match the Fock space");
  const double nrm2 = state.squaredNorm();
  if (std::abs(nrm2 - 1.0) > 1e-8)
    throw PhysicsError("inverse participation ratio expects a normalized state");
  double ipr = 0.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const double p = std::norm(state[i]);
    ipr += p * p;
  }
  return ipr;
}

OccupationMap occupation_map(const LabeledSpectrum& ls, const SystemModel& m) {
  OccupationMap out;
  for (const auto& mode : m.modes) out.mode_labels.push_back(mode.label);
  out.qubit_modes = m.qubit_labels();

  std::vector<int> qubit_index;
  for (const auto& q : out.qubit_modes) qubit_index.push_back(m.require(q));

  const std::size_t n_states = std::size_t{1} << qubit_index.size();
  const std::size_t n_modes = m.modes.size();
  for (std::size_t code = 0; code < n_states; ++code) {
    OccupationEntry e;
    std::vector<int> occ(n_modes, 0);
    e.qubit_label.resize(qubit_index.size());
    for (std::size_t b = 0; b < qubit_index.size(); ++b) {
      const int bit = (code >> (qubit_index.size() - 1 - b)) & 1;
      e.qubit_label[b] = bit;
      occ[static_cast<std::size_t>(qubit_index[b])] = bit;
    }
    const VectorXcd state = ls.state(occ);
    e.occupation = mode_occupations(state, ls.space);
    for (std::size_t l = 0; l < n_modes; ++l) {
      e.total += e.occupation[l];
      const std::string& lbl = m.modes[l].label;
      if (lbl[0] == 'c') e.coupler_occupation += e.occupation[l];
    }
    e.group = static_cast<int>(std::lround(e.total));
    e.ipr = inverse_participation_ratio(state, ls.space);
    out.entries.push_back(std::move(e));
  }
  return out;
}

LeakageReport leakage_report(const Trajectory& traj, const SystemModel& m,
                             const FockSpace& s) {
  if (traj.states.empty())
    throw ConfigError("leakage report needs at least one trajectory snapshot");
  LeakageReport rep;
  for (const auto& mode : m.modes) rep.mode_labels.push_back(mode.label);

  const std::vector<double> first = mode_occupations(traj.states.front(), s);
  const std::vector<double> last = mode_occupations(traj.states.back(), s);
  const int center = m.require("c");
  for (std::size_t l = 0; l < rep.mode_labels.size(); ++l) {
    const double d = std::abs(last[l] - first[l]);
    rep.delta.push_back(d);
    const std::string& lbl = rep.mode_labels[l];
    if (lbl[0] == 'q') {
      rep.max_qubit_delta = std::max(rep.max_qubit_delta, d);
    } else if (static_cast<int>(l) != center) {
      rep.max_coupler_delta = std::max(rep.max_coupler_delta, d);
    }
  }
  rep.center_residual = last[static_cast<std::size_t>(center)] -
                        first[static_cast<std::size_t>(center)];
  return rep;
}

}  // namespace ucsim
