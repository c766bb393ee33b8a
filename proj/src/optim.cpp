#include "ucsim/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ucsim {

std::vector<int> max_score_assignment(const MatrixXd& score) {
  const int n = static_cast<int>(score.rows());
  const int m = static_cast<int>(score.cols());
  if (n == 0) return {};
  if (n > m) throw NumericsError("assignment needs at least as many columns as rows");
  const double inf = 1e300;
  // shortest augmenting paths with potentials on cost = -score
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = -score(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) assign[p[j] - 1] = j - 1;
  return assign;
}

bool bracket_root(const std::function<double(double)>& f, double a, double b, int n,
                  double* lo, double* hi) {
  double prev_x = a, prev_f = f(a);
  for (int i = 1; i <= n; ++i) {
    double x = a + (b - a) * i / n;
    double fx = f(x);
    if (prev_f == 0.0 || prev_f * fx < 0.0) {
      *lo = prev_x;
      *hi = x;
      return true;
    }
    prev_x = x;
    prev_f = fx;
  }
  return false;
}

RootResult find_root(const std::function<double(double)>& f, double a, double b,
                     double xtol, double ftol, int max_iter) {
  RootResult res;
  double fa = f(a), fb = f(b);
  res.evals = 2;
  if (fa == 0.0) return {a, 0.0, res.evals, true};
  if (fb == 0.0) return {b, 0.0, res.evals, true};
  if (fa * fb > 0.0) throw NumericsError("find_root: interval does not bracket a sign change");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    double tol1 = 2.0 * 1e-16 * std::abs(b) + 0.5 * xtol;
    double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || std::abs(fb) <= ftol) {
      res.x = b;
      res.fx = fb;
      res.converged = true;
      return res;
    }
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double s = fb / fa, p, q, r;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    ++res.evals;
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  res.x = b;
  res.fx = fb;
  res.converged = false;
  return res;
}

GoldenResult golden_section_min(const std::function<double(double)>& f, double a, double b,
                                double xtol, int max_iter) {
  const double invphi = 0.61803398874989484820;
  GoldenResult res;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  res.evals = 2;
  for (int it = 0; it < max_iter && (b - a) > xtol; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
    ++res.evals;
  }
  if (f1 <= f2) {
    res.x = x1;
    res.fx = f1;
  } else {
    res.x = x2;
    res.fx = f2;
  }
  return res;
}

namespace {

NelderMeadResult nm_single(const std::function<double(const VectorXd&)>& f, const VectorXd& x0,
                           const VectorXd& step, int max_evals, double ftol_abs,
                           double stop_below, int eval_offset,
                           std::vector<std::pair<int, double>>* trace) {
  const int n = static_cast<int>(x0.size());
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  NelderMeadResult res;
  res.evals = 0;
  std::vector<VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  auto eval = [&](const VectorXd& x) {
    double v = f(x);
    if (!std::isfinite(v)) throw NumericsError("objective returned a non-finite value");
    ++res.evals;
    return v;
  };
  for (int i = 0; i <= n; ++i) {
    if (i > 0) xs[i][i - 1] += step[i - 1];
    fs[i] = eval(xs[i]);
  }
  auto record = [&](double best) {
    if (trace && (trace->empty() || best < trace->back().second))
      trace->emplace_back(eval_offset + res.evals, best);
  };
  std::vector<int> order(n + 1);
  while (res.evals < max_evals) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    record(fs[order[0]]);
    if (stop_below >= 0.0 && fs[order[0]] <= stop_below) break;
    if (fs[order[n]] - fs[order[0]] < ftol_abs) {
      res.converged = true;
      break;
    }
    VectorXd centroid = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[order[i]];
    centroid /= n;
    const int worst = order[n];
    VectorXd xr = centroid + alpha * (centroid - xs[worst]);
    double fr = eval(xr);
    if (fr < fs[order[0]]) {
      VectorXd xe = centroid + gamma * (xr - centroid);
      double fe = eval(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[order[n - 1]]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      VectorXd xc = centroid + rho * (xs[worst] - centroid);
      double fc = eval(xc);
      if (fc < fs[worst]) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          int idx = order[i];
          xs[idx] = xs[order[0]] + sigma * (xs[idx] - xs[order[0]]);
          fs[idx] = eval(xs[idx]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fs[i] < fs[best]) best = i;
  res.x = xs[best];
  res.fx = fs[best];
  record(res.fx);
  return res;
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const VectorXd&)>& f,
                             const VectorXd& x0, const VectorXd& step,
                             const NelderMeadOptions& opts) {
  if (x0.size() == 0 || x0.size() != step.size())
    throw NumericsError("nelder_mead needs matching nonempty x0 and step");
  std::vector<std::pair<int, double>> trace;
  NelderMeadResult best = nm_single(f, x0, step, opts.max_evals, opts.ftol_abs,
                                    opts.stop_below, 0, &trace);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int r = 0; r < opts.restarts; ++r) {
    int remaining = opts.max_evals - best.evals;
    if (remaining < 2 * static_cast<int>(x0.size()) ||
        (opts.stop_below >= 0.0 && best.fx <= opts.stop_below))
      break;
    VectorXd xp = best.x;
    for (int i = 0; i < xp.size(); ++i) xp[i] += opts.restart_scale * step[i] * uni(rng);
    NelderMeadResult second = nm_single(f, xp, opts.restart_scale * step, remaining,
                                        opts.ftol_abs, opts.stop_below, best.evals, &trace);
    second.evals += best.evals;
    if (second.fx < best.fx) {
      second.converged = second.converged || best.converged;
      best = second;
    } else {
      best.evals = second.evals;
    }
  }
  best.trace = std::move(trace);
  return best;
}

}  // namespace ucsim
