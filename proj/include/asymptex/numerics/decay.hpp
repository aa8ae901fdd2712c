#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "asymptex/core.hpp"
#include "asymptex/expansion.hpp"
#include "asymptex/iterated_log.hpp"
#include "asymptex/numerics/ode.hpp"
#include "asymptex/numerics/parallel.hpp"
#include "asymptex/problem.hpp"

namespace asymptex {

enum class Regressor { Time, LogIteratedLog };

inline std::string to_string(Regressor r) { return r == Regressor::Time ? "t" : "log L_m(t)"; }

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double t_a = 0.0;
  double t_b = 0.0;
  Regressor regressor = Regressor::Time;
  int m = 0;  // iterated-log index of the regressor
  std::size_t samples = 0;
};

/// Explicit fit window; unset ends fall back to the default window.
struct FitWindow {
  std::optional<double> t_a;
  std::optional<double> t_b;
};

struct Samples {
  std::vector<double> t;
  std::vector<double> r;
};

/// x coordinate of the regression: t, or log L_m(t).
inline double regressor_value(Regressor kind, int m, double t) {
  return kind == Regressor::Time ? t : std::log(iterated_log(m, t));
}

/// Least-squares slope of log r against the regressor; exponent = -slope.
///
/// Default window: the last 40% of the sampled range measured along the
/// regressor axis. Samples below 100 eps times the first sample are dropped
/// as noise floor before the window is filled.
inline DecayFit fit_decay(const Samples& s, Regressor kind, int m = 0, FitWindow window = {}) {
  if (s.t.size() != s.r.size()) throw ValidationError("fit_decay: t and r differ in length");
  if (s.t.empty()) throw ValidationError("fit_decay: window too small (no samples)");
  if (kind == Regressor::LogIteratedLog && !(s.t.front() > iterated_exp_zero(m))) {
    throw DomainError("fit_decay: log L_m(t) undefined at the first sample");
  }
  const double x0 = regressor_value(kind, m, s.t.front());
  const double x1 = regressor_value(kind, m, s.t.back());
  const double ta = window.t_a.value_or(-std::numeric_limits<double>::infinity());
  const double tb = window.t_b.value_or(std::numeric_limits<double>::infinity());
  const double xa_default = x0 + 0.6 * (x1 - x0);
  const double floor = 100.0 * std::numeric_limits<double>::epsilon() * std::abs(s.r.front());

  std::vector<double> xs, ys;
  DecayFit fit;
  fit.regressor = kind;
  fit.m = m;
  fit.t_a = std::numeric_limits<double>::infinity();
  fit.t_b = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double t = s.t[i];
    if (t < ta || t > tb) continue;
    const double x = regressor_value(kind, m, t);
    if (!window.t_a && x < xa_default) continue;
    if (!(s.r[i] > 0.0)) throw ValidationError("fit_decay: nonpositive sample at t = " + detail::time_string(t));
    if (s.r[i] < floor) continue;
    xs.push_back(x);
    ys.push_back(std::log(s.r[i]));
    fit.t_a = std::min(fit.t_a, t);
    fit.t_b = std::max(fit.t_b, t);
  }
  if (xs.size() < 8) {
    throw ValidationError("fit_decay: window too small (" + std::to_string(xs.size()) + " usable samples, need 8)");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit_decay: window too small (degenerate regressor range)");
  const double slope = sxy / sxx;
  fit.exponent = -slope;
  fit.intercept = my - slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.samples = xs.size();
  if (!std::isfinite(fit.exponent)) throw NumericalError("fit_decay: non-finite exponent");
  return fit;
}

/// Regressor matching an expansion mode: t for exponential, log L_{m*} otherwise.
inline Regressor regressor_for(Mode mode) { return mode == Mode::Exponential ? Regressor::Time : Regressor::LogIteratedLog; }

inline DecayFit fit_decay(const Samples& s, Mode mode, int m_star, FitWindow window = {}) {
  return fit_decay(s, regressor_for(mode), mode == Mode::Exponential ? 0 : m_star, window);
}

/// |y(t) - sum_{k<=N} y_k(t)| on a grid (the trajectory grid when empty),
/// clipped below at 1e-300.
inline Samples remainder_series(const Trajectory& traj, const Expansion& e, std::size_t n,
                                std::vector<double> grid = {}) {
  if (n > e.order()) throw ValidationError("remainder_series: order exceeds the expansion");
  if (grid.empty()) grid = traj.t;
  const double start = e.domain_start(n);
  Samples out;
  out.t = grid;
  out.r.resize(grid.size());
  for (double t : grid) {
    if (!(t > start)) throw DomainError("remainder_series: expansion not defined at t = " + detail::time_string(t));
  }
  const Eigen::Index dim = traj.y.front().size();
  parallel_for(grid.size(), [&](std::size_t i) {
    const ComplexVec y = traj.at(grid[i]);
    const double r = (y - e.partial_sum(n, grid[i], dim)).norm();
    out.r[i] = std::max(r, 1e-300);
  });
  return out;
}

inline std::vector<double> linear_grid(double a, double b, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = b;
  return g;
}

inline std::vector<double> geometric_grid(double a, double b, std::size_t n) {
  if (!(a > 0.0)) throw ValidationError("geometric grid needs a positive start");
  std::vector<double> g(n);
  const double la = std::log(a), lb = std::log(b);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = a;
  g.back() = b;
  return g;
}

}  // namespace asymptex
