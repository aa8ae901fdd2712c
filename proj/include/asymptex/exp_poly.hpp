#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "asymptex/core.hpp"
#include "asymptex/multilinear.hpp"

namespace asymptex {

/// Thresholds applied by canonicalization. A coefficient vector is dropped when
/// its norm is below `term_rel` times the largest coefficient norm of its term,
/// or below `abs_floor`.
struct TrimPolicy {
  double term_rel = 1e-13;
  double abs_floor = 0.0;
};

/// Polynomial in t with C^n coefficients, coeffs[d] multiplies t^d.
using VecPoly = std::vector<ComplexVec>;

inline VecPoly poly_derivative(const VecPoly& p) {
  VecPoly d;
  for (std::size_t j = 1; j < p.size(); ++j) d.push_back(static_cast<double>(j) * p[j]);
  return d;
}

inline ComplexVec poly_eval(const VecPoly& p, double t, Eigen::Index dim) {
  ComplexVec acc = ComplexVec::Zero(dim);
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * t + *it;
  return acc;
}

/// Finite sum  sum_nu p_nu(t) e^{nu t}  with vector polynomial coefficients: an
/// element of the exponential-polynomial class F_E(C^n). Exponents are snapped
/// keys, so equal exponents always share one term.
class ExpPolySum {
 public:
  using TermMap = std::map<Complex, VecPoly, ComplexLess>;

  explicit ExpPolySum(Eigen::Index dim = 1) : dim_(dim) {}

  static ExpPolySum monomial(Complex exponent, VecPoly coeffs) {
    if (coeffs.empty()) throw ValidationError("exp-poly term needs at least one coefficient");
    ExpPolySum s(coeffs.front().size());
    s.add_term(exponent, std::move(coeffs));
    return s;
  }

  /// Scalar shorthand: sum_d c_d t^d e^{nu t} on C^1.
  static ExpPolySum scalar(Complex exponent, std::vector<Complex> coeffs) {
    VecPoly p;
    for (auto c : coeffs) p.push_back(ComplexVec::Constant(1, c));
    return monomial(exponent, std::move(p));
  }

  Eigen::Index dim() const { return dim_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  /// Adds p(t) e^{nu t}; coefficients are summed into an existing term of equal exponent.
  void add_term(Complex exponent, const VecPoly& coeffs) {
    for (const auto& c : coeffs) {
      if (c.size() != dim_) throw ValidationError("exp-poly coefficient dimension mismatch");
    }
    auto& dst = terms_[snap(exponent)];
    if (dst.size() < coeffs.size()) dst.resize(coeffs.size(), ComplexVec::Zero(dim_));
    for (std::size_t j = 0; j < coeffs.size(); ++j) dst[j] += coeffs[j];
  }

  std::size_t max_degree() const {
    std::size_t d = 0;
    for (const auto& [nu, p] : terms_) d = std::max(d, p.empty() ? 0 : p.size() - 1);
    return d;
  }

  double max_coeff_norm() const {
    double m = 0.0;
    for (const auto& [nu, p] : terms_) {
      for (const auto& c : p) m = std::max(m, c.norm());
    }
    return m;
  }

  /// sum_nu p_nu(t) e^{nu t}, Horner per term.
  ComplexVec eval(double t) const {
    ComplexVec r = ComplexVec::Zero(dim_);
    for (const auto& [nu, p] : terms_) r += std::exp(nu * t) * poly_eval(p, t, dim_);
    return r;
  }

  /// Membership in F_E(mu): every exponent has real part mu.
  bool in_class(double mu, double tol = 1e-10) const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [&](const auto& kv) { return std::abs(kv.first.real() - mu) <= tol; });
  }

  ExpPolySum& operator+=(const ExpPolySum& o) {
    check_dim(o);
    for (const auto& [nu, p] : o.terms_) add_term(nu, p);
    return *this;
  }
  ExpPolySum& operator-=(const ExpPolySum& o) { return *this += (-1.0) * o; }

  friend ExpPolySum operator+(ExpPolySum a, const ExpPolySum& b) { return a += b; }
  friend ExpPolySum operator-(ExpPolySum a, const ExpPolySum& b) { return a -= b; }
  friend ExpPolySum operator*(Complex c, ExpPolySum a) {
    for (auto& [nu, p] : a.terms_) {
      for (auto& v : p) v *= c;
    }
    return a;
  }

  /// Left multiplication of every coefficient by a matrix (m x n).
  ExpPolySum apply_matrix(const ComplexMat& m) const {
    if (m.cols() != dim_) throw ValidationError("matrix/exp-poly dimension mismatch");
    ExpPolySum r(m.rows());
    for (const auto& [nu, p] : terms_) {
      VecPoly q;
      q.reserve(p.size());
      for (const auto& c : p) q.push_back(m * c);
      r.terms_[nu] = std::move(q);
    }
    return r;
  }

  /// Multiplies every term by e^{shift t}.
  ExpPolySum shift_exponent(Complex shift) const {
    ExpPolySum r(dim_);
    for (const auto& [nu, p] : terms_) r.add_term(nu + shift, p);
    return r;
  }

  friend bool operator==(const ExpPolySum& a, const ExpPolySum& b) {
    if (a.dim_ != b.dim_ || a.terms_.size() != b.terms_.size()) return false;
    auto ib = b.terms_.begin();
    for (const auto& [nu, p] : a.terms_) {
      if (nu != ib->first || p.size() != ib->second.size()) return false;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] != ib->second[j]) return false;
      }
      ++ib;
    }
    return true;
  }

  void check_dim(const ExpPolySum& o) const {
    if (o.dim_ != dim_) throw ValidationError("exp-poly dimension mismatch");
  }

  TermMap& mutable_terms() { return terms_; }

 private:
  Eigen::Index dim_;
  TermMap terms_;
};

/// Drops negligible coefficients, trims trailing zero coefficients and removes
/// empty terms. Idempotent; evaluation changes by at most the dropped amounts.
inline ExpPolySum canonicalize_exp(const ExpPolySum& s, TrimPolicy policy = {}) {
  ExpPolySum r(s.dim());
  for (const auto& [nu, p] : s.terms()) {
    double largest = 0.0;
    for (const auto& c : p) largest = std::max(largest, c.norm());
    const double cut = std::max(policy.term_rel * largest, policy.abs_floor);
    VecPoly q = p;
    for (auto& c : q) {
      const double nc = c.norm();
      if (nc == 0.0 || nc < cut) c.setZero();
    }
    while (!q.empty() && q.back().isZero(0.0)) q.pop_back();
    if (!q.empty()) r.mutable_terms().emplace(nu, std::move(q));
  }
  return r;
}

/// Termwise derivative: (p e^{nu t})' = (p' + nu p) e^{nu t}.
inline ExpPolySum derivative_exp(const ExpPolySum& s) {
  ExpPolySum r(s.dim());
  for (const auto& [nu, p] : s.terms()) {
    VecPoly q(p.size(), ComplexVec::Zero(s.dim()));
    for (std::size_t j = 0; j < p.size(); ++j) {
      q[j] += nu * p[j];
      if (j > 0) q[j - 1] += static_cast<double>(j) * p[j];
    }
    r.add_term(nu, q);
  }
  return canonicalize_exp(r);
}

/// G(a_1, ..., a_m) for exp-poly arguments: exponents add across the chosen
/// terms and polynomial coefficients convolve through G.
inline ExpPolySum mul_apply_exp(const MultiLinearMap& g, std::span<const ExpPolySum> args) {
  g.check_args(args.size());
  for (const auto& a : args) {
    if (a.dim() != g.dim()) throw ValidationError("mul_apply_exp: argument dimension mismatch");
  }
  const auto m = static_cast<std::size_t>(g.arity());
  ExpPolySum out(g.dim());
  std::vector<ExpPolySum::TermMap::const_iterator> pick(m);
  std::vector<ComplexVec> slot(m);

  // Every choice of one term per argument, then every degree split.
  std::function<void(std::size_t, Complex)> over_terms = [&](std::size_t l, Complex nu) {
    if (l == m) {
      std::size_t total = 0;
      for (auto it : pick) total += it->second.size() - 1;
      VecPoly poly(total + 1, ComplexVec::Zero(g.dim()));
      std::function<void(std::size_t, std::size_t)> over_degrees = [&](std::size_t q, std::size_t deg) {
        if (q == m) {
          poly[deg] += g.apply(std::span<const ComplexVec>(slot));
          return;
        }
        const auto& coeffs = pick[q]->second;
        for (std::size_t d = 0; d < coeffs.size(); ++d) {
          slot[q] = coeffs[d];
          over_degrees(q + 1, deg + d);
        }
      };
      over_degrees(0, 0);
      out.add_term(nu, poly);
      return;
    }
    for (auto it = args[l].terms().begin(); it != args[l].terms().end(); ++it) {
      pick[l] = it;
      over_terms(l + 1, nu + it->first);
    }
  };
  over_terms(0, 0.0);
  return canonicalize_exp(out);
}

inline ExpPolySum mul_apply_exp(const MultiLinearMap& g, std::initializer_list<ExpPolySum> args) {
  std::vector<ExpPolySum> v(args);
  return mul_apply_exp(g, std::span<const ExpPolySum>(v));
}

/// Sample times on which two exp-polys with at most `terms` terms and degree
/// `max_degree` are compared for equality: 2 * (terms + max_degree + 1) points
/// spread over a window where every |e^{nu t}| ratio stays above 1e-10.
inline std::vector<double> uniqueness_grid(const ExpPolySum& a, const ExpPolySum& b) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto* s : {&a, &b}) {
    for (const auto& [nu, p] : s->terms()) {
      if (first) lo = hi = nu.real(), first = false;
      lo = std::min(lo, nu.real());
      hi = std::max(hi, nu.real());
    }
  }
  const std::size_t count = 2 * (a.size() + b.size() + std::max(a.max_degree(), b.max_degree()) + 1);
  const double spread = hi - lo;
  double window = spread > 0.0 ? std::log(1e10) / spread : 8.0;
  window = std::min(window, 8.0);
  // Irregular spacing so that no frequency aliases onto the grid.
  std::vector<double> grid;
  grid.reserve(count);
  constexpr double golden = 0.6180339887498949;
  for (std::size_t i = 0; i < count; ++i) {
    const double u = std::fmod(0.5 + golden * static_cast<double>(i + 1), 1.0);
    grid.push_back(window * u);
  }
  std::sort(grid.begin(), grid.end());
  return grid;
}

/// True when a and b agree on every grid time up to rel times the largest value seen.
inline bool evaluations_agree(const ExpPolySum& a, const ExpPolySum& b, const std::vector<double>& grid,
                              double rel = 1e-9) {
  double diff = 0.0, scale = 0.0;
  for (double t : grid) {
    const ComplexVec va = a.eval(t), vb = b.eval(t);
    diff = std::max(diff, (va - vb).norm());
    scale = std::max({scale, va.norm(), vb.norm()});
  }
  return diff <= rel * scale;
}

/// Same exponent keys and degrees, coefficients equal up to rel times the largest coefficient.
inline bool same_terms(const ExpPolySum& a, const ExpPolySum& b, double rel = 1e-12) {
  if (a.dim() != b.dim() || a.size() != b.size()) return false;
  const double tol = rel * std::max({a.max_coeff_norm(), b.max_coeff_norm(), 1e-300});
  auto ib = b.terms().begin();
  for (const auto& [nu, p] : a.terms()) {
    if (nu != ib->first || p.size() != ib->second.size()) return false;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if ((p[j] - ib->second[j]).norm() > tol) return false;
    }
    ++ib;
  }
  return true;
}

}  // namespace asymptex
