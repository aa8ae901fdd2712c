#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "asymptex/core.hpp"

namespace asymptex {

/// E_k(0): the k-fold iterated exponential at zero, E_0(0) = 0, E_{k+1}(0) = exp(E_k(0)).
/// L_k is defined on (E_k(0), inf) and positive on (E_{k+1}(0), inf).
inline double iterated_exp_zero(int k) {
  if (k <= 0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  double v = 0.0;
  for (int i = 0; i < k; ++i) {
    v = std::exp(v);
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
  }
  return v;
}

/// The ladder (L_{-1}(t), L_0(t), ..., L_k(t)) = (e^t, t, ln t, ln ln t, ...).
///
/// `logs` holds (L_0, ..., L_{k+1}) when the point is strictly inside the
/// positivity domain; log(L_j) == L_{j+1} is used for complex powers so that
/// e^t never has to be formed.
struct LadderPoint {
  double t = 0.0;
  int depth = -1;
  std::vector<double> values;  // values[j + 1] == L_j(t), j = -1..depth

  double L(int j) const { return values.at(static_cast<std::size_t>(j + 1)); }
};

/// Exact iterated values at depth k; requires t > E_k(0).
inline LadderPoint ladder_eval(int depth, double t) {
  if (depth < -1) throw ValidationError("ladder depth must be >= -1");
  if (!(t > iterated_exp_zero(depth))) {
    throw DomainError("ladder_eval: t = " + std::to_string(t) + " is not above E_" +
                      std::to_string(depth) + "(0)");
  }
  LadderPoint p;
  p.t = t;
  p.depth = depth;
  p.values.reserve(static_cast<std::size_t>(depth + 2));
  p.values.push_back(std::exp(t));
  if (depth >= 0) p.values.push_back(t);
  for (int j = 1; j <= depth; ++j) p.values.push_back(std::log(p.values.back()));
  return p;
}

/// log L_j(t) for j = -1..depth, i.e. (t, ln t, ..., L_{depth+1}(t)).
/// Requires t > E_{depth+1}(0) so every L_j is strictly positive.
inline std::vector<double> ladder_logs(int depth, double t) {
  if (!(t > iterated_exp_zero(depth + 1))) {
    throw DomainError("ladder point t = " + std::to_string(t) + " is not above E_" +
                      std::to_string(depth + 1) + "(0)");
  }
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(depth + 2));
  logs.push_back(t);
  for (int j = 0; j <= depth; ++j) logs.push_back(std::log(logs.back()));
  return logs;
}

/// L_m(t) alone, m >= -1; requires t > E_m(0).
inline double iterated_log(int m, double t) {
  if (m == -1) return std::exp(t);
  if (!(t > iterated_exp_zero(m))) throw DomainError("iterated_log: t outside domain");
  double v = t;
  for (int j = 0; j < m; ++j) v = std::log(v);
  return v;
}

}  // namespace asymptex
