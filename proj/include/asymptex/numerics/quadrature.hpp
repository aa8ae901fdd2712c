#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "asymptex/core.hpp"
#include "asymptex/iterated_log.hpp"
#include "asymptex/log_power.hpp"
#include "asymptex/numerics/certificate.hpp"
#include "asymptex/numerics/decay.hpp"
#include "asymptex/numerics/parallel.hpp"

namespace asymptex {

inline constexpr unsigned kQuadratureDepth = 30;

/// Adaptive 15-point Gauss-Kronrod on [a, b] for a complex scalar integrand.
inline Complex integrate_adaptive(const std::function<Complex(double)>& f, double a, double b, double tol) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  if (b == a) return 0.0;
  double error = 0.0, l1 = 0.0;
  const Complex v = GK::integrate(f, a, b, kQuadratureDepth, tol, &error, &l1);
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || error > 100.0 * tol * std::max(l1, std::abs(v)) + 1e-300) {
    throw NumericalError("quadrature did not converge on [" + detail::time_string(a) + ", " + detail::time_string(b) +
                         "]");
  }
  return v;
}

/// e^{-sA}, memoized by exact s. Adaptive bisection from a fixed panel
/// length revisits the same dyadic nodes, so panels share kernels.
class KernelCache {
 public:
  explicit KernelCache(ComplexMat a) : a_(std::move(a)) {}

  ComplexMat operator()(double s) const {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto it = cache_.find(s); it != cache_.end()) return it->second;
    }
    ComplexMat m = expm_neg(a_, s);
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(s, std::move(m)).first->second;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

 private:
  ComplexMat a_;
  mutable std::mutex mu_;
  mutable std::map<double, ComplexMat> cache_;
};

struct IntegralDecayCheck {
  std::vector<double> t;
  std::vector<double> deviation;
  double max_deviation = 0.0;
  std::optional<DecayFit> fit;  // absent when every deviation vanishes
};

/// Compares I(t) = int_0^t e^{-(t-tau)A} p(L(T*+tau)) dtau with
/// (Z_A p)(L(T*+t)). I is advanced panel by panel,
///   I(t_{i+1}) = e^{-(t_{i+1}-t_i)A} I(t_i) + int_{t_i}^{t_{i+1}} ...,
/// and each panel only integrates the window where the kernel is above 1e-17.
/// The deviation fit regresses log|dev| on log(T*+t).
inline IntegralDecayCheck verify_integral_decay(const ComplexMat& a, const LogPowerSum& p, double t_star,
                                                std::vector<double> t_grid, double quad_tol = 1e-12) {
  if (a.rows() != p.dim()) throw ValidationError("matrix and p differ in dimension");
  if (!(t_star > iterated_exp_zero(p.depth() + 1))) {
    throw DomainError("T* must exceed E_{depth+1}(0) = " + detail::time_string(iterated_exp_zero(p.depth() + 1)));
  }
  if (t_grid.empty()) throw ValidationError("empty t grid");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()) || t_grid.front() < 0.0) {
    throw ValidationError("t grid must be sorted and nonnegative");
  }
  if (t_grid.front() > 0.0) t_grid.insert(t_grid.begin(), 0.0);

  const double lambda1 = spectral_abscissa_min(a);
  if (!(lambda1 > 0.0)) throw ValidationError("A must have its spectrum in the open right half-plane");
  const double c0 = estimate_c0(a, default_c0_grid(lambda1));
  const double window = 2.0 * (std::log(std::max(c0, 1.0)) + 40.0) / lambda1;

  const KernelCache kernel(a);
  const auto n = a.rows();
  const std::size_t panels = t_grid.size() - 1;
  std::vector<ComplexVec> contrib(panels, ComplexVec::Zero(n));
  parallel_for(panels, [&](std::size_t i) {
    const double end = t_grid[i + 1];
    const double width = std::min(end - t_grid[i], window);
    for (Eigen::Index c = 0; c < n; ++c) {
      contrib[i](c) = integrate_adaptive(
          [&](double s) -> Complex { return (kernel(s).row(c) * p.eval(t_star + end - s))(0); }, 0.0, width, quad_tol);
    }
  });

  const LogPowerSum zp = op_ZA(a, p);
  IntegralDecayCheck out;
  ComplexVec integral = ComplexVec::Zero(n);
  out.t.push_back(t_grid.front());
  out.deviation.push_back((integral - zp.eval(t_star + t_grid.front())).norm());
  for (std::size_t i = 0; i < panels; ++i) {
    const double step = t_grid[i + 1] - t_grid[i];
    integral = (step > window ? ComplexMat::Zero(n, n) : kernel(step)) * integral + contrib[i];
    out.t.push_back(t_grid[i + 1]);
    out.deviation.push_back((integral - zp.eval(t_star + t_grid[i + 1])).norm());
  }
  out.max_deviation = *std::max_element(out.deviation.begin(), out.deviation.end());

  if (out.max_deviation > 0.0) {
    Samples s;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
      s.t.push_back(t_star + out.t[i]);
      s.r.push_back(std::max(out.deviation[i], 1e-300));
    }
    out.fit = fit_decay(s, Regressor::LogIteratedLog, 0);
  }
  return out;
}

}  // namespace asymptex
