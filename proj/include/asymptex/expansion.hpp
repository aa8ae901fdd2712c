#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "asymptex/core.hpp"
#include "asymptex/exp_poly.hpp"
#include "asymptex/exponent_ladder.hpp"
#include "asymptex/log_power.hpp"
#include "asymptex/problem.hpp"
#include "asymptex/resolvent.hpp"

namespace asymptex {

/// Truncated asymptotic expansion y ~ sum_k y_k built order by order.
///
/// Exponential mode stores y_k in F_E(-mu_k) (including any fitted multiples
/// of the homogeneous modes at that rate); power and log modes store q_k with
/// y_k(t) = q_k(L_{n_k}(t)).
struct Expansion {
  Mode mode = Mode::Exponential;
  int m_star = 0;
  std::vector<double> mu;
  std::vector<int> depth;
  std::vector<ExpPolySum> exp_terms;
  std::vector<LogPowerSum> log_terms;
  std::vector<std::vector<ExpPolySum>> kernels;
  std::vector<std::vector<Complex>> free_constants;
  std::vector<std::string> notes;

  std::size_t order() const { return mu.size(); }

  /// sum_{k<=n} y_k(t).
  ComplexVec partial_sum(std::size_t n, double t, Eigen::Index dim) const {
    ComplexVec r = ComplexVec::Zero(dim);
    for (std::size_t k = 0; k < std::min(n, order()); ++k) r += term_value(k + 1, t);
    return r;
  }

  ComplexVec term_value(std::size_t k, double t) const {
    if (mode == Mode::Exponential) return exp_terms.at(k - 1).eval(t);
    return log_terms.at(k - 1).eval(t);
  }

  /// Smallest t at which every stored term up to order n can be evaluated.
  double domain_start(std::size_t n) const {
    if (mode == Mode::Exponential) return -std::numeric_limits<double>::infinity();
    int d = -1;
    for (std::size_t k = 0; k < std::min(n, order()); ++k) d = std::max(d, depth[k]);
    return iterated_exp_zero(d + 1);
  }
};

/// Free constants per order (1-based) multiplying the stored kernel basis.
struct ExpandOptions {
  std::map<std::size_t, std::vector<Complex>> free_constants;
};

namespace detail {

// Distinct orderings of a nondecreasing index multiset.
inline std::vector<std::vector<std::size_t>> orderings(std::vector<std::size_t> multiset) {
  std::vector<std::vector<std::size_t>> out;
  std::sort(multiset.begin(), multiset.end());
  do {
    out.push_back(multiset);
  } while (std::next_permutation(multiset.begin(), multiset.end()));
  return out;
}

inline std::size_t max_arity(const ProblemSpec& spec, double mu_k) {
  const double mu1 = spec.ladder.mu(1);
  const auto bound = static_cast<std::size_t>(std::ceil(2.0 * mu_k / mu1 - 1e-9));
  return std::min<std::size_t>(std::max<std::size_t>(bound, 2), static_cast<std::size_t>(spec.max_degree()));
}

inline double trim_scale(double scale) { return 1e-13 * scale; }

}  // namespace detail

/// Nonlinear coupling J_k = sum_m sum_{mu_j1 + ... + mu_jm = mu_k} G_m(y_j1, ..., y_jm)
/// over ordered index tuples, from the stored terms of orders < k.
inline ExpPolySum coupling_exp(const ProblemSpec& spec, const Expansion& e, std::size_t k) {
  ExpPolySum j(spec.dim());
  if (spec.max_degree() < 2) return j;
  const double mu_k = spec.ladder.mu(k);
  for (const auto& ms : decompose(spec.ladder, mu_k, detail::max_arity(spec, mu_k))) {
    for (const auto& tuple : detail::orderings(ms)) {
      std::vector<ExpPolySum> args;
      for (auto idx : tuple) args.push_back(e.exp_terms.at(idx - 1));
      for (const auto& g : spec.nonlinearity) {
        if (static_cast<std::size_t>(g.arity()) == tuple.size()) {
          j += mul_apply_exp(g, std::span<const ExpPolySum>(args));
        }
      }
    }
  }
  return j;
}

inline LogPowerSum coupling_logpower(const ProblemSpec& spec, const Expansion& e, std::size_t k, int depth) {
  LogPowerSum j(depth, spec.dim());
  if (spec.max_degree() < 2) return j;
  const double mu_k = spec.ladder.mu(k);
  for (const auto& ms : decompose(spec.ladder, mu_k, detail::max_arity(spec, mu_k))) {
    for (const auto& tuple : detail::orderings(ms)) {
      std::vector<LogPowerSum> args;
      for (auto idx : tuple) args.push_back(embed_depth(e.log_terms.at(idx - 1), depth));
      for (const auto& g : spec.nonlinearity) {
        if (static_cast<std::size_t>(g.arity()) == tuple.size()) {
          j += mul_apply_logpower(g, std::span<const LogPowerSum>(args));
        }
      }
    }
  }
  return j;
}

/// Depth n_k: override when given, else the largest forcing depth among rates <= mu_k (at least m*).
inline int order_depth(const ProblemSpec& spec, std::size_t k) {
  int d = spec.m_star;
  const double mu_k = spec.ladder.mu(k);
  for (const auto& f : spec.forcing) {
    if (f.mu <= mu_k + 1e-12) {
      if (const auto* p = std::get_if<LogPowerSum>(&f.term)) d = std::max(d, p->depth());
    }
  }
  if (k <= spec.depth_schedule.size()) {
    const int o = spec.depth_schedule[k - 1];
    if (o < d) {
      throw ValidationError("problem.depth_schedule[" + std::to_string(k - 1) + "] = " + std::to_string(o) +
                            " is below the forcing depth " + std::to_string(d));
    }
    d = o;
  }
  return d;
}

/// chi_k = R q_lambda when mu_lambda + 1 = mu_k for some lambda < k (power mode only).
inline LogPowerSum chi_term(const ProblemSpec& spec, const Expansion& e, std::size_t k, int depth) {
  LogPowerSum chi(depth, spec.dim());
  if (spec.mode != Mode::Power) return chi;
  const auto lambda = spec.ladder.index_of(spec.ladder.mu(k) - 1.0);
  if (lambda && *lambda < k) chi = embed_depth(op_R(e.log_terms.at(*lambda - 1)), depth);
  return chi;
}

inline Expansion empty_expansion(const ProblemSpec& spec) {
  Expansion e;
  e.mode = spec.mode;
  e.m_star = spec.m_star;
  if (spec.mode == Mode::Exponential || spec.mode == Mode::Power || spec.mode == Mode::Log) {
    const auto cap = static_cast<std::size_t>(spec.max_degree());
    if (spec.max_degree() >= 2) {
      const double mu_n = spec.ladder.mu(std::min(spec.order, spec.ladder.size()));
      const auto needed = static_cast<std::size_t>(std::floor(mu_n / spec.ladder.mu(1) + 1e-9));
      if (needed > cap) {
        e.notes.push_back("nonlinearity truncated at degree " + std::to_string(cap) +
                          "; decompositions of arity up to " + std::to_string(needed) + " exist");
      }
    }
  }
  return e;
}

/// Appends order k = e.order() + 1 without touching the stored lower orders.
inline void extend_expansion(const ProblemSpec& spec, Expansion& e, const ExpandOptions& opt = {}) {
  const std::size_t k = e.order() + 1;
  if (k > spec.ladder.size()) {
    throw ValidationError("ladder overflow: order " + std::to_string(k) + " exceeds realized ladder of size " +
                          std::to_string(spec.ladder.size()));
  }
  const double mu_k = spec.ladder.mu(k);
  const ForcingTerm* f = spec.forcing_at(mu_k);
  const auto n = spec.dim();

  if (spec.mode == Mode::Exponential) {
    ExpPolySum rhs = coupling_exp(spec, e, k);
    if (f) rhs += std::get<ExpPolySum>(f->term);
    rhs = canonicalize_exp(rhs, {1e-13, detail::trim_scale(rhs.max_coeff_norm())});
    auto solved = resolvent_solve_exp(spec.a, rhs);
    std::vector<ExpPolySum> kernel;
    for (const Complex lam : clustered_eigenvalues(spec.a)) {
      if (!same_exponent(lam.real(), mu_k)) continue;
      for (auto& mode : homogeneous_modes(spec.a, -lam)) kernel.push_back(std::move(mode));
    }
    ExpPolySum y = solved.z;
    std::vector<Complex> consts(kernel.size(), 0.0);
    if (auto it = opt.free_constants.find(k); it != opt.free_constants.end()) {
      if (it->second.size() != kernel.size()) {
        throw ValidationError("free constants for order " + std::to_string(k) + ": expected " +
                              std::to_string(kernel.size()) + ", got " + std::to_string(it->second.size()));
      }
      consts = it->second;
      for (std::size_t i = 0; i < kernel.size(); ++i) y += consts[i] * kernel[i];
      y = canonicalize_exp(y);
    }
    e.mu.push_back(mu_k);
    e.depth.push_back(-1);
    e.exp_terms.push_back(std::move(y));
    e.kernels.push_back(std::move(kernel));
    e.free_constants.push_back(std::move(consts));
    return;
  }

  const int depth = order_depth(spec, k);
  LogPowerSum rhs = coupling_logpower(spec, e, k, depth);
  if (f) rhs += embed_depth(std::get<LogPowerSum>(f->term), depth);
  rhs -= chi_term(spec, e, k, depth);
  rhs = canonicalize_logpower(rhs, {1e-13, detail::trim_scale(rhs.max_coeff_norm())});
  LogPowerSum q = op_ZA(spec.a, rhs);
  if (!q.in_class(spec.m_star, -mu_k)) {
    throw NumericalError("order " + std::to_string(k) + " left its class P_" + std::to_string(spec.m_star) +
                         "(n_k, -mu_k)");
  }
  e.mu.push_back(mu_k);
  e.depth.push_back(depth);
  e.log_terms.push_back(std::move(q));
  e.kernels.emplace_back();
  e.free_constants.emplace_back();
  (void)n;
}

inline Expansion expand(const ProblemSpec& spec, const ExpandOptions& opt = {}) {
  validate(spec);
  Expansion e = empty_expansion(spec);
  for (std::size_t k = 1; k <= spec.order; ++k) extend_expansion(spec, e, opt);
  return e;
}

inline Expansion expand_exponential(const ProblemSpec& spec, const ExpandOptions& opt = {}) {
  if (spec.mode != Mode::Exponential) throw ValidationError("expand_exponential: mode is " + to_string(spec.mode));
  return expand(spec, opt);
}

inline Expansion expand_power(const ProblemSpec& spec) {
  if (spec.mode != Mode::Power) throw ValidationError("expand_power: mode is " + to_string(spec.mode));
  return expand(spec);
}

inline Expansion expand_log(const ProblemSpec& spec) {
  if (spec.mode != Mode::Log) throw ValidationError("expand_log: mode is " + to_string(spec.mode));
  return expand(spec);
}

/// Residual of the order-k equation with negligible coefficients (below 1e-12
/// of the operand scale) removed; the zero sum for a correct expansion.
///   exponential: y_k' + A y_k - J_k - f_k
///   power/log:   (A + M_{-1}) q_k - (J_k + p_k - chi_k)
inline std::variant<ExpPolySum, LogPowerSum> symbolic_defect(const ProblemSpec& spec, const Expansion& e,
                                                             std::size_t k) {
  if (k < 1 || k > e.order()) throw ValidationError("symbolic_defect: order out of range");
  const ForcingTerm* f = spec.forcing_at(e.mu[k - 1]);
  if (spec.mode == Mode::Exponential) {
    const auto& y = e.exp_terms[k - 1];
    ExpPolySum rhs = coupling_exp(spec, e, k);
    if (f) rhs += std::get<ExpPolySum>(f->term);
    ExpPolySum lhs = derivative_exp(y) + y.apply_matrix(spec.a);
    const double scale = std::max({lhs.max_coeff_norm(), rhs.max_coeff_norm(), 1e-300});
    return canonicalize_exp(lhs - rhs, {1e-13, 1e-12 * scale});
  }
  const int depth = e.depth[k - 1];
  const auto& q = e.log_terms[k - 1];
  LogPowerSum rhs = coupling_logpower(spec, e, k, depth);
  if (f) rhs += embed_depth(std::get<LogPowerSum>(f->term), depth);
  rhs -= chi_term(spec, e, k, depth);
  LogPowerSum lhs = q.apply_matrix(spec.a) + op_M(-1, q);
  const double scale = std::max({lhs.max_coeff_norm(), rhs.max_coeff_norm(), 1e-300});
  return canonicalize_logpower(lhs - rhs, {1e-13, 1e-12 * scale});
}

inline bool defect_is_zero(const std::variant<ExpPolySum, LogPowerSum>& d) {
  return std::visit([](const auto& s) { return s.empty(); }, d);
}

}  // namespace asymptex
