#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ucsim/types.hpp"

namespace ucsim {

// Injective row -> column assignment maximizing the total score, rows <= cols.
// O(rows^2 * cols) shortest-augmenting-path formulation.
std::vector<int> max_score_assignment(const MatrixXd& score);

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int evals = 0;
  bool converged = false;
};

// Brent root finder on [a, b]; f(a) and f(b) must differ in sign.
RootResult find_root(const std::function<double(double)>& f, double a, double b,
                     double xtol, double ftol, int max_iter = 100);

// Scans [a, b] at n points and returns the first sign-change subinterval.
bool bracket_root(const std::function<double(double)>& f, double a, double b, int n,
                  double* lo, double* hi);

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  int evals = 0;
};

GoldenResult golden_section_min(const std::function<double(double)>& f, double a, double b,
                                double xtol, int max_iter = 200);

struct NelderMeadOptions {
  int max_evals = 600;
  double ftol_abs = 1e-10;
  int restarts = 1;          // extra runs from a perturbed optimum
  double restart_scale = 0.3;
  unsigned seed = 12345;
  double stop_below = -1.0;  // stop early once f_best <= this (if >= 0)
};

struct NelderMeadResult {
  VectorXd x;
  double fx = 0.0;
  int evals = 0;
  bool converged = false;
  std::vector<std::pair<int, double>> trace;  // (eval count, best f) on improvement
};

// Downhill simplex with per-dimension initial steps and one perturbed restart.
NelderMeadResult nelder_mead(const std::function<double(const VectorXd&)>& f,
                             const VectorXd& x0, const VectorXd& step,
                             const NelderMeadOptions& opts = {});

}  // namespace ucsim
