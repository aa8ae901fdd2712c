#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/SVD>

#include "asymptex/core.hpp"
#include "asymptex/expansion.hpp"
#include "asymptex/numerics/decay.hpp"
#include "asymptex/numerics/ode.hpp"
#include "asymptex/problem.hpp"

namespace asymptex {

struct ResonantFit {
  std::vector<Complex> constants;
  std::vector<double> std_error;
  std::vector<double> relative_uncertainty;  // std_error / |c|, +inf at c = 0
  double condition = 1.0;
  double residual_rms = 0.0;
  std::size_t samples = 0;
  std::size_t iterations = 0;
  Expansion expansion;  // input expansion with the fitted constants applied
};

inline constexpr double kMaxDesignCondition = 1e10;

namespace detail {

struct LinearFit {
  Eigen::VectorXcd delta;
  std::vector<double> std_error;
  double condition = 1.0;
  double rms = 0.0;
  std::size_t samples = 0;
};

// Unweighted complex least squares of the residual onto the kernel basis,
// over trajectory grid points inside [t_a, t_b].
inline LinearFit kernel_least_squares(const Trajectory& traj, const Expansion& e, std::size_t k, std::size_t upto,
                                      double t_a, double t_b) {
  const auto& basis = e.kernels[k - 1];
  const Eigen::Index dim = traj.y.front().size();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.t[i] >= t_a && traj.t[i] <= t_b) rows.push_back(i);
  }
  const auto p = static_cast<Eigen::Index>(basis.size());
  const auto m = static_cast<Eigen::Index>(rows.size()) * dim;
  if (m <= p) throw ValidationError("resonant fit: too few samples in the window");
  ComplexMat design(m, p);
  ComplexVec rhs(m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double t = traj.t[rows[r]];
    const auto off = static_cast<Eigen::Index>(r) * dim;
    rhs.segment(off, dim) = traj.y[rows[r]] - e.partial_sum(upto, t, dim);
    for (Eigen::Index j = 0; j < p; ++j) design.block(off, j, dim, 1) = basis[static_cast<std::size_t>(j)].eval(t);
  }

  // Column scaling keeps the condition number about distinguishability,
  // not about the magnitude of e^{-mu t}.
  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    scale(j) = design.col(j).norm();
    if (!(scale(j) > 0.0)) throw NumericalError("resonant fit: ill-conditioned design (kernel vanishes on window)");
    design.col(j) /= scale(j);
  }
  Eigen::JacobiSVD<ComplexMat> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  LinearFit out;
  out.condition = sv(0) / sv(p - 1);
  if (!(sv(p - 1) > 0.0) || !(out.condition < kMaxDesignCondition)) {
    throw NumericalError("resonant fit: ill-conditioned design (kernel functions indistinguishable on window)");
  }
  const ComplexVec scaled = svd.solve(rhs);
  out.delta = scaled.cwiseQuotient(scale.cast<Complex>());
  const double rss = (design * scaled - rhs).squaredNorm();
  const double dof = static_cast<double>(m - p);
  const double sigma2 = rss / dof;
  out.rms = std::sqrt(rss / static_cast<double>(m));
  out.samples = rows.size();
  // Var(c_j) = sigma^2 [(D^H D)^{-1}]_jj, D = U S V^H.
  const ComplexMat vs = svd.matrixV() * sv.cwiseInverse().asDiagonal();
  for (Eigen::Index j = 0; j < p; ++j) {
    out.std_error.push_back(std::sqrt(sigma2 * vs.row(j).squaredNorm()) / scale(j));
  }
  return out;
}

inline void fill_uncertainty(ResonantFit& fit, const LinearFit& lf) {
  fit.std_error = lf.std_error;
  fit.relative_uncertainty.clear();
  for (std::size_t j = 0; j < fit.constants.size(); ++j) {
    const double c = std::abs(fit.constants[j]);
    fit.relative_uncertainty.push_back(c > 0.0 ? lf.std_error[j] / c : std::numeric_limits<double>::infinity());
  }
  fit.condition = lf.condition;
  fit.residual_rms = lf.rms;
  fit.samples = lf.samples;
}

inline void check_fit_args(const Trajectory& traj, const Expansion& e, std::size_t k) {
  if (e.mode != Mode::Exponential) throw ValidationError("resonant fit needs an exponential-mode expansion");
  if (k < 1 || k > e.order()) throw ValidationError("resonant fit: order out of range");
  if (traj.size() == 0) throw ValidationError("resonant fit: empty trajectory");
}

}  // namespace detail

/// Least-squares constants for the kernel basis at order k so that
/// y - sum_{j<=k} y_j - sum_i c_i b_i is smallest on [t_a, t_b]. The constants
/// add to any already stored; higher orders are left as they were.
inline ResonantFit fit_resonant_constants(const Trajectory& traj, const Expansion& e, std::size_t k, FitWindow window = {}) {
  detail::check_fit_args(traj, e, k);
  ResonantFit fit;
  fit.expansion = e;
  const auto& basis = e.kernels[k - 1];
  if (basis.empty()) return fit;
  const double ta = window.t_a.value_or(traj.t_begin() + 0.6 * (traj.t_end() - traj.t_begin()));
  const double tb = window.t_b.value_or(traj.t_end());
  const auto lf = detail::kernel_least_squares(traj, e, k, k, ta, tb);
  auto& consts = fit.expansion.free_constants[k - 1];
  auto& term = fit.expansion.exp_terms[k - 1];
  for (std::size_t j = 0; j < basis.size(); ++j) {
    consts[j] += lf.delta(static_cast<Eigen::Index>(j));
    term += lf.delta(static_cast<Eigen::Index>(j)) * basis[j];
  }
  term = canonicalize_exp(term);
  fit.constants = consts;
  fit.iterations = 1;
  detail::fill_uncertainty(fit, lf);
  return fit;
}

/// Iterated fit that rebuilds the expansion through order k + extra with the
/// current constants, so the residual excludes the next orders' dependence on
/// them. Stops when the update is below 1e-13 relative or after max_iter.
inline ResonantFit refine_resonant_constants(const Trajectory& traj, const ProblemSpec& spec, const Expansion& e,
                                             std::size_t k, std::size_t extra, FitWindow window = {},
                                             std::size_t max_iter = 25) {
  detail::check_fit_args(traj, e, k);
  ProblemSpec s = spec;
  s.order = std::max(spec.order, k + extra);
  ExpandOptions opt;
  for (std::size_t j = 1; j <= e.order(); ++j) {
    if (!e.kernels[j - 1].empty()) opt.free_constants[j] = e.free_constants[j - 1];
  }
  ResonantFit fit;
  fit.expansion = expand(s, opt);
  const auto& basis = fit.expansion.kernels[k - 1];
  if (basis.empty()) return fit;
  const double ta = window.t_a.value_or(traj.t_begin() + 0.6 * (traj.t_end() - traj.t_begin()));
  const double tb = window.t_b.value_or(traj.t_end());
  std::vector<Complex> c = fit.expansion.free_constants[k - 1];

  detail::LinearFit lf;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    lf = detail::kernel_least_squares(traj, fit.expansion, k, k + extra, ta, tb);
    double change = 0.0, size = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      c[j] += lf.delta(static_cast<Eigen::Index>(j));
      change = std::max(change, std::abs(lf.delta(static_cast<Eigen::Index>(j))));
      size = std::max(size, std::abs(c[j]));
    }
    opt.free_constants[k] = c;
    fit.expansion = expand(s, opt);
    fit.iterations = it;
    if (change <= 1e-13 * std::max(size, 1.0)) break;
  }
  fit.constants = c;
  detail::fill_uncertainty(fit, lf);
  return fit;
}

}  // namespace asymptex
