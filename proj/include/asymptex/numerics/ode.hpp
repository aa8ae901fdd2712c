#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include "asymptex/core.hpp"
#include "asymptex/iterated_log.hpp"
#include "asymptex/problem.hpp"

namespace asymptex {

struct IntegratorOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double fixed_step = 0.0;  // > 0 disables step control
  double initial_step = 0.0;
  std::size_t max_steps = 50'000'000;
};

struct IntegratorStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

/// Accepted steps of an integration with cubic Hermite dense output.
struct Trajectory {
  std::vector<double> t;
  std::vector<ComplexVec> y;
  std::vector<ComplexVec> dy;  // y' at each grid point; empty for sampled data
  double rel_tol = 0.0;
  double abs_tol = 0.0;
  IntegratorStats stats;

  std::size_t size() const { return t.size(); }
  double t_begin() const { return t.front(); }
  double t_end() const { return t.back(); }

  ComplexVec at(double s) const {
    if (t.empty()) throw ValidationError("empty trajectory");
    if (s < t.front() || s > t.back()) {
      throw DomainError("trajectory has no data at t = " + std::to_string(s));
    }
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    if (it == t.end()) return y.back();
    const auto i = static_cast<std::size_t>(it - t.begin()) - 1;
    if (s == t[i]) return y[i];
    if (dy.empty()) throw ValidationError("trajectory lacks derivatives for dense output");
    const double h = t[i + 1] - t[i];
    const double u = (s - t[i]) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * y[i] + (h10 * h) * dy[i] + h01 * y[i + 1] + (h11 * h) * dy[i + 1];
  }

  std::vector<ComplexVec> sample(const std::vector<double>& grid) const {
    std::vector<ComplexVec> out;
    out.reserve(grid.size());
    for (double s : grid) out.push_back(at(s));
    return out;
  }
};

using ComplexRhs = std::function<ComplexVec(double, const ComplexVec&)>;

namespace detail {

inline std::string time_string(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", t);
  return buf;
}

inline void pack(const ComplexVec& z, std::vector<double>& x) {
  const auto n = static_cast<std::size_t>(z.size());
  x.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    x[2 * i] = z(static_cast<Eigen::Index>(i)).real();
    x[2 * i + 1] = z(static_cast<Eigen::Index>(i)).imag();
  }
}

inline ComplexVec unpack(const std::vector<double>& x) {
  ComplexVec z(static_cast<Eigen::Index>(x.size() / 2));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = Complex(x[2 * static_cast<std::size_t>(i)], x[2 * static_cast<std::size_t>(i) + 1]);
  }
  return z;
}

inline bool all_finite(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace detail

/// Dormand-Prince 5(4) with PI step-size control. The complex state is
/// carried as 2n real components.
inline Trajectory integrate_system(const ComplexRhs& rhs, const ComplexVec& y0, double t0, double t1,
                                   const IntegratorOptions& opt = {}) {
  using State = std::vector<double>;
  if (!(t1 > t0)) throw ValidationError("integration span must be increasing");
  if (!(opt.rel_tol > 0.0 && opt.rel_tol <= 1e-2) || !(opt.abs_tol > 0.0 && opt.abs_tol <= 1e-2)) {
    throw ValidationError("tolerances must lie in (0, 1e-2]");
  }

  Trajectory tr;
  tr.rel_tol = opt.rel_tol;
  tr.abs_tol = opt.abs_tol;
  auto system = [&](const State& x, State& dxdt, double t) {
    detail::pack(rhs(t, detail::unpack(x)), dxdt);
    ++tr.stats.rhs_evals;
  };

  boost::numeric::odeint::runge_kutta_dopri5<State> stepper;
  State x, dx, x_new, dx_new, err;
  detail::pack(y0, x);
  dx.resize(x.size());
  x_new.resize(x.size());
  dx_new.resize(x.size());
  err.resize(x.size());
  system(x, dx, t0);
  if (!detail::all_finite(x) || !detail::all_finite(dx)) {
    throw NumericalError("non-finite state at t = " + detail::time_string(t0));
  }

  auto error_norm = [&](const State& a, const State& b, const State& e) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
      s += (e[i] / sc) * (e[i] / sc);
    }
    return e.empty() ? 0.0 : std::sqrt(s / static_cast<double>(e.size()));
  };

  double t = t0;
  double h = opt.fixed_step > 0.0 ? opt.fixed_step : opt.initial_step;
  if (h <= 0.0) {
    // Starting step from the first-derivative scale.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sc = opt.abs_tol + opt.rel_tol * std::abs(x[i]);
      d0 = std::max(d0, std::abs(x[i]) / sc);
      d1 = std::max(d1, std::abs(dx[i]) / sc);
    }
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, t1 - t0);
  }

  tr.t.push_back(t);
  tr.y.push_back(detail::unpack(x));
  tr.dy.push_back(detail::unpack(dx));

  constexpr double kSafety = 0.9, kAlpha = 0.17, kBeta = 0.04;
  double err_prev = 1e-4;
  bool last_rejected = false;
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) {
      throw NumericalError("step budget exhausted at t = " + detail::time_string(t));
    }
    const bool final_step = t1 - t <= h * (1.0 + 1e-8);  // no sliver of a last step
    const double step = final_step ? t1 - t : h;
    if (step <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      throw NumericalError("step size underflow at t = " + detail::time_string(t));
    }
    stepper.do_step(system, x, dx, t, x_new, dx_new, step, err);

    if (opt.fixed_step > 0.0) {
      if (!detail::all_finite(x_new)) {
        throw NumericalError("non-finite state at t = " + detail::time_string(t + step));
      }
    } else {
      double e = detail::all_finite(x_new) && detail::all_finite(err) ? error_norm(x, x_new, err)
                                                                      : std::numeric_limits<double>::infinity();
      if (!(e <= 1.0)) {
        ++tr.stats.rejected;
        const double fac = std::isfinite(e) ? std::max(0.2, kSafety * std::pow(e, -0.2)) : 0.25;
        h = step * std::min(fac, 1.0);
        last_rejected = true;
        continue;
      }
      e = std::max(e, 1e-10);
      double fac = kSafety * std::pow(e, -kAlpha) * std::pow(err_prev, kBeta);
      fac = std::clamp(fac, 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      err_prev = e;
      last_rejected = false;
      h = step * fac;
    }

    t = final_step ? t1 : t + step;
    x.swap(x_new);
    dx.swap(dx_new);
    ++tr.stats.accepted;
    tr.t.push_back(t);
    tr.y.push_back(detail::unpack(x));
    tr.dy.push_back(detail::unpack(dx));
  }
  return tr;
}

/// f(t) = sum of the stored forcing terms.
inline ComplexVec forcing_value(const ProblemSpec& spec, double t) {
  ComplexVec r = ComplexVec::Zero(spec.dim());
  for (const auto& f : spec.forcing) r += std::visit([t](const auto& s) { return s.eval(t); }, f.term);
  return r;
}

/// Smallest t at which every forcing term can be evaluated.
inline double forcing_domain_start(const ProblemSpec& spec) {
  double start = -std::numeric_limits<double>::infinity();
  for (const auto& f : spec.forcing) {
    if (const auto* p = std::get_if<LogPowerSum>(&f.term)) start = std::max(start, iterated_exp_zero(p->depth() + 1));
  }
  return start;
}

/// y' = -A y + G(y) + f(t) on [t_span.first, t_span.second].
inline Trajectory integrate(const ProblemSpec& spec, const ComplexVec& y0, std::pair<double, double> t_span,
                            double rel_tol = 1e-10, double abs_tol = 1e-12) {
  if (y0.size() != spec.dim()) throw ValidationError("initial state has the wrong dimension");
  const double start = forcing_domain_start(spec);
  if (!(t_span.first > start)) {
    throw DomainError("forcing is not defined at t = " + detail::time_string(t_span.first) + " (needs t > " +
                      detail::time_string(start) + ")");
  }
  const ComplexRhs rhs = [&spec](double t, const ComplexVec& y) -> ComplexVec {
    return -(spec.a * y) + spec.nonlinear(y) + forcing_value(spec, t);
  };
  IntegratorOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = abs_tol;
  return integrate_system(rhs, y0, t_span.first, t_span.second, opt);
}

}  // namespace asymptex
