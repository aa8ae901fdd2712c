#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "asymptex/core.hpp"
#include "asymptex/numerics/parallel.hpp"
#include "asymptex/problem.hpp"

namespace asymptex {

inline ComplexMat expm_neg(const ComplexMat& a, double t) { return (ComplexMat(-t * a)).exp(); }

inline double operator_norm(const ComplexMat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMat> svd(m);
  return svd.singularValues()(0);
}

/// |e^{-tA}| (largest singular value) on a grid of t >= 0.
inline std::vector<double> matrix_exp_norm(const ComplexMat& a, const std::vector<double>& t_grid) {
  std::vector<double> out(t_grid.size());
  for (double t : t_grid) {
    if (!(t >= 0.0)) throw ValidationError("matrix_exp_norm needs t >= 0");
  }
  parallel_for(t_grid.size(), [&](std::size_t i) { out[i] = operator_norm(expm_neg(a, t_grid[i])); });
  return out;
}

/// Uniform grid on [0, T] with T long enough for e^{-lambda_1 t / 2} to reach 1e-12.
inline std::vector<double> default_c0_grid(double lambda1, std::size_t points = 801) {
  const double horizon = 2.0 * 28.0 / lambda1;
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = horizon * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

/// C_0 = max over the grid of |e^{-tA}| e^{lambda_1 t / 2}.
inline double estimate_c0(const ComplexMat& a, const std::vector<double>& t_grid) {
  const double lambda1 = spectral_abscissa_min(a);
  const auto norms = matrix_exp_norm(a, t_grid);
  double c0 = 0.0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) c0 = std::max(c0, norms[i] * std::exp(0.5 * lambda1 * t_grid[i]));
  return c0;
}

struct SmallnessCertificate {
  double lambda1 = 0.0;
  double c0 = 0.0;
  double c_star = 0.0;
  double r_star = 0.0;
  double m = 0.0;
  double eps0 = 0.0;
  double eps1 = 0.0;
  std::size_t radii = 0;
  std::size_t directions = 0;
};

namespace detail {

inline double radical_inverse(std::size_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline unsigned nth_prime(std::size_t k) {
  static const unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
  if (k >= std::size(primes)) throw ValidationError("direction sampling supports at most 16 complex dimensions");
  return primes[k];
}

// Unit directions from a Halton sequence pushed through Box-Muller.
// Real problems sample R^n, others C^n.
inline std::vector<ComplexVec> sphere_directions(Eigen::Index n, bool real, std::size_t count) {
  const std::size_t reals = real ? static_cast<std::size_t>(n) : 2 * static_cast<std::size_t>(n);
  const std::size_t pairs = (reals + 1) / 2;
  std::vector<ComplexVec> out;
  out.reserve(count);
  for (std::size_t i = 1; out.size() < count; ++i) {
    std::vector<double> g;
    for (std::size_t p = 0; p < pairs; ++p) {
      const double u1 = radical_inverse(i, nth_prime(2 * p));
      const double u2 = radical_inverse(i, nth_prime(2 * p + 1));
      const double rad = std::sqrt(-2.0 * std::log(u1));
      g.push_back(rad * std::cos(2.0 * std::numbers::pi * u2));
      g.push_back(rad * std::sin(2.0 * std::numbers::pi * u2));
    }
    ComplexVec d(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(j);
      d(j) = real ? Complex(g[k], 0.0) : Complex(g[2 * k], g[2 * k + 1]);
    }
    const double norm = d.norm();
    if (norm > 0.0) out.push_back(d / norm);
  }
  return out;
}

}  // namespace detail

/// c_* is sampled on 1024 directions per radius with radii r_star 2^{-j};
/// M, eps_0, eps_1 follow from (lambda_1, C_0, c_*, r_star) in closed form.
inline SmallnessCertificate smallness_certificate(const ProblemSpec& spec, double r_star,
                                                  std::size_t sample_budget = 16 * 1024) {
  if (!(r_star > 0.0)) throw ValidationError("r_star must be positive");
  SmallnessCertificate c;
  c.r_star = r_star;
  c.lambda1 = spectral_abscissa_min(spec.a);
  if (!(c.lambda1 > 0.0)) throw ValidationError("A must have its spectrum in the open right half-plane");

  constexpr std::size_t kDirections = 1024;
  c.directions = kDirections;
  c.radii = std::max<std::size_t>(1, sample_budget / kDirections);
  if (!spec.nonlinearity.empty()) {
    const auto dirs = detail::sphere_directions(spec.dim(), spec.is_real(), kDirections);
    std::vector<double> best(c.radii, 0.0);
    parallel_for(c.radii, [&](std::size_t j) {
      const double r = std::ldexp(r_star, -static_cast<int>(j));
      for (const auto& d : dirs) {
        const ComplexVec x = r * d;
        best[j] = std::max(best[j], spec.nonlinear(x).norm() / x.squaredNorm());
      }
    });
    c.c_star = *std::max_element(best.begin(), best.end());
  }

  c.c0 = estimate_c0(spec.a, default_c0_grid(c.lambda1));
  const double bound = c.c_star == 0.0 ? std::numeric_limits<double>::infinity() : c.lambda1 / (12.0 * c.c0 * c.c_star);
  c.m = std::min(r_star, bound);
  c.eps0 = std::min(c.m / 2.0, c.m / (6.0 * c.c0));
  c.eps1 = c.lambda1 * c.m / (12.0 * c.c0);
  return c;
}

}  // namespace asymptex
