#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "asymptex/core.hpp"
#include "asymptex/exp_poly.hpp"
#include "asymptex/iterated_log.hpp"
#include "asymptex/multilinear.hpp"

namespace asymptex {

/// Exponent vector (alpha_{-1}, alpha_0, ..., alpha_k); alpha[j + 1] is alpha_j.
using ExponentVector = std::vector<Complex>;

struct ExponentVectorLess {
  bool operator()(const ExponentVector& a, const ExponentVector& b) const {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), ComplexLess{});
  }
};

inline int exponent_depth(const ExponentVector& a) { return static_cast<int>(a.size()) - 2; }

inline Complex alpha_at(const ExponentVector& a, int j) { return a.at(static_cast<std::size_t>(j + 1)); }

/// alpha in E(m, k, mu): Re alpha_j = 0 for -1 <= j < m and Re alpha_m = mu.
inline bool in_index_set(const ExponentVector& a, int m, double mu, double tol = 1e-10) {
  if (m < -1 || m > exponent_depth(a)) return false;
  for (int j = -1; j < m; ++j) {
    if (std::abs(alpha_at(a, j).real()) > tol) return false;
  }
  return std::abs(alpha_at(a, m).real() - mu) <= tol;
}

/// Finite sum  sum_alpha z^alpha xi_alpha  over z = (z_{-1}, ..., z_k): an element
/// of P(k, C^n), evaluated on the iterated-log ladder z = (e^t, t, ln t, ...).
class LogPowerSum {
 public:
  using TermMap = std::map<ExponentVector, ComplexVec, ExponentVectorLess>;

  LogPowerSum(int depth = 0, Eigen::Index dim = 1) : depth_(depth), dim_(dim) {
    if (depth < -1) throw ValidationError("log-power depth must be >= -1");
  }

  static LogPowerSum monomial(ExponentVector alpha, ComplexVec xi) {
    LogPowerSum p(exponent_depth(alpha), xi.size());
    p.add_term(std::move(alpha), xi);
    return p;
  }

  /// Scalar shorthand on C^1.
  static LogPowerSum scalar(ExponentVector alpha, Complex xi) {
    return monomial(std::move(alpha), ComplexVec::Constant(1, xi));
  }

  int depth() const { return depth_; }
  Eigen::Index dim() const { return dim_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  void add_term(ExponentVector alpha, const ComplexVec& xi) {
    if (exponent_depth(alpha) != depth_) {
      throw ValidationError("exponent vector of depth " + std::to_string(exponent_depth(alpha)) +
                            " added to log-power sum of depth " + std::to_string(depth_));
    }
    if (xi.size() != dim_) throw ValidationError("log-power coefficient dimension mismatch");
    for (auto& c : alpha) c = snap(c);
    auto [it, inserted] = terms_.try_emplace(std::move(alpha), xi);
    if (!inserted) it->second += xi;
  }

  double max_coeff_norm() const {
    double m = 0.0;
    for (const auto& [a, xi] : terms_) m = std::max(m, xi.norm());
    return m;
  }

  /// Evaluation on the ladder; requires t > E_{k+1}(0) so all components are positive.
  ComplexVec eval(double t) const {
    const auto logs = ladder_logs(depth_, t);
    ComplexVec r = ComplexVec::Zero(dim_);
    for (const auto& [a, xi] : terms_) {
      Complex e = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] != Complex(0.0)) e += a[j] * logs[j];
      }
      r += std::exp(e) * xi;
    }
    return r;
  }

  /// Membership in P_m(k, mu, C^n).
  bool in_class(int m, double mu, double tol = 1e-10) const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [&](const auto& kv) { return in_index_set(kv.first, m, mu, tol); });
  }

  LogPowerSum& operator+=(const LogPowerSum& o) {
    check_compatible(o);
    for (const auto& [a, xi] : o.terms_) add_term(a, xi);
    return *this;
  }
  LogPowerSum& operator-=(const LogPowerSum& o) { return *this += (-1.0) * o; }
  friend LogPowerSum operator+(LogPowerSum a, const LogPowerSum& b) { return a += b; }
  friend LogPowerSum operator-(LogPowerSum a, const LogPowerSum& b) { return a -= b; }
  friend LogPowerSum operator*(Complex c, LogPowerSum a) {
    for (auto& [alpha, xi] : a.terms_) xi *= c;
    return a;
  }

  LogPowerSum apply_matrix(const ComplexMat& m) const {
    if (m.cols() != dim_) throw ValidationError("matrix/log-power dimension mismatch");
    LogPowerSum r(depth_, m.rows());
    for (const auto& [a, xi] : terms_) r.terms_.emplace(a, m * xi);
    return r;
  }

  friend bool operator==(const LogPowerSum& a, const LogPowerSum& b) {
    return a.depth_ == b.depth_ && a.dim_ == b.dim_ && a.terms_ == b.terms_;
  }

  void check_compatible(const LogPowerSum& o) const {
    if (o.dim_ != dim_) throw ValidationError("log-power dimension mismatch");
    if (o.depth_ != depth_) {
      throw ValidationError("log-power depth mismatch (" + std::to_string(depth_) + " vs " +
                            std::to_string(o.depth_) + "); embed first");
    }
  }

  TermMap& mutable_terms() { return terms_; }

 private:
  int depth_;
  Eigen::Index dim_;
  TermMap terms_;
};

/// Drops coefficients with norm below max(term_rel * largest norm in the sum, abs_floor).
inline LogPowerSum canonicalize_logpower(const LogPowerSum& p, TrimPolicy policy = {}) {
  const double cut = std::max(policy.term_rel * p.max_coeff_norm(), policy.abs_floor);
  LogPowerSum r(p.depth(), p.dim());
  for (const auto& [a, xi] : p.terms()) {
    const double n = xi.norm();
    if (n == 0.0 || n < cut) continue;
    r.mutable_terms().emplace(a, xi);
  }
  return r;
}

/// Zero-pads exponent vectors to depth k'; evaluation is unchanged.
inline LogPowerSum embed_depth(const LogPowerSum& p, int new_depth) {
  if (new_depth < p.depth()) {
    throw ValidationError("embed_depth: target depth " + std::to_string(new_depth) +
                          " below current depth " + std::to_string(p.depth()));
  }
  if (new_depth == p.depth()) return p;
  LogPowerSum r(new_depth, p.dim());
  for (const auto& [a, xi] : p.terms()) {
    ExponentVector b = a;
    b.resize(static_cast<std::size_t>(new_depth + 2), Complex(0.0));
    r.mutable_terms().emplace(std::move(b), xi);
  }
  return r;
}

/// (M_j p)(z) = sum alpha_j z^alpha xi_alpha.
inline LogPowerSum op_M(int j, const LogPowerSum& p) {
  if (j < -1 || j > p.depth()) {
    throw ValidationError("op_M: index " + std::to_string(j) + " outside [-1, " +
                          std::to_string(p.depth()) + "]");
  }
  LogPowerSum r(p.depth(), p.dim());
  for (const auto& [a, xi] : p.terms()) {
    const Complex s = alpha_at(a, j);
    if (s != Complex(0.0)) r.mutable_terms().emplace(a, s * xi);
  }
  return r;
}

/// (R p)(z) = sum_{j=0}^k z_0^{-1} ... z_j^{-1} (M_j p)(z), the chain-rule part
/// of d/dt p(L(t)) that is not carried by z_{-1}.
inline LogPowerSum op_R(const LogPowerSum& p) {
  if (p.depth() < 0) throw ValidationError("op_R requires depth >= 0");
  LogPowerSum r(p.depth(), p.dim());
  for (const auto& [a, xi] : p.terms()) {
    for (int j = 0; j <= p.depth(); ++j) {
      const Complex s = alpha_at(a, j);
      if (s == Complex(0.0)) continue;
      ExponentVector b = a;
      for (int l = 0; l <= j; ++l) b[static_cast<std::size_t>(l + 1)] -= 1.0;
      r.add_term(std::move(b), s * xi);
    }
  }
  return canonicalize_logpower(r);
}

/// Memoized LU factors of A + s I, keyed by the (snapped) shift s.
/// Safe to share between threads.
class ResolventCache {
 public:
  explicit ResolventCache(ComplexMat a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) throw ValidationError("resolvent matrix must be square");
  }

  const ComplexMat& matrix() const { return a_; }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

  /// (A + s I)^{-1} x; throws when A + s I is numerically singular.
  ComplexVec solve(Complex s, const ComplexVec& x) const {
    return factor(s).solve(x);
  }

  const Eigen::PartialPivLU<ComplexMat>& factor(Complex s) const {
    const Complex key = snap(s);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      ComplexMat shifted = a_ + key * ComplexMat::Identity(a_.rows(), a_.cols());
      auto lu = std::make_unique<Eigen::PartialPivLU<ComplexMat>>(shifted);
      if (!(lu->rcond() > 1e-13)) {
        throw NumericalError("A + (" + std::to_string(key.real()) + "+" + std::to_string(key.imag()) +
                             "i) I is numerically singular (rcond " + std::to_string(lu->rcond()) +
                             "); eigenvalues of A need positive real parts");
      }
      it = cache_.emplace(key, std::move(lu)).first;
    }
    return *it->second;
  }

 private:
  ComplexMat a_;
  mutable std::mutex mu_;
  mutable std::map<Complex, std::unique_ptr<Eigen::PartialPivLU<ComplexMat>>, ComplexLess> cache_;
};

/// (Z_A p)(z) = sum z^alpha (A + alpha_{-1} I)^{-1} xi_alpha, for p with Re alpha_{-1} = 0.
inline LogPowerSum op_ZA(const ResolventCache& a, const LogPowerSum& p) {
  if (a.matrix().rows() != p.dim()) throw ValidationError("op_ZA: dimension mismatch");
  LogPowerSum r(p.depth(), p.dim());
  for (const auto& [alpha, xi] : p.terms()) {
    const Complex s = alpha.front();
    if (std::abs(s.real()) > 1e-12) {
      throw ValidationError("op_ZA: term with Re alpha_{-1} = " + std::to_string(s.real()) +
                            " is outside P_{-1}(k, 0)");
    }
    r.mutable_terms().emplace(alpha, a.solve(s, xi));
  }
  return r;
}

inline LogPowerSum op_ZA(const ComplexMat& a, const LogPowerSum& p) {
  return op_ZA(ResolventCache(a), p);
}

/// G(a_1, ..., a_m): exponent vectors add componentwise, coefficients combine
/// through G. Arguments of lower depth are embedded to the largest depth.
inline LogPowerSum mul_apply_logpower(const MultiLinearMap& g, std::span<const LogPowerSum> args) {
  g.check_args(args.size());
  int depth = -1;
  for (const auto& a : args) {
    if (a.dim() != g.dim()) throw ValidationError("mul_apply_logpower: argument dimension mismatch");
    depth = std::max(depth, a.depth());
  }
  std::vector<LogPowerSum> lifted;
  lifted.reserve(args.size());
  for (const auto& a : args) lifted.push_back(embed_depth(a, depth));

  const auto m = static_cast<std::size_t>(g.arity());
  LogPowerSum out(depth, g.dim());
  std::vector<ComplexVec> slot(m);
  std::function<void(std::size_t, const ExponentVector&)> rec = [&](std::size_t l, const ExponentVector& sum) {
    if (l == m) {
      out.add_term(sum, g.apply(std::span<const ComplexVec>(slot)));
      return;
    }
    for (const auto& [a, xi] : lifted[l].terms()) {
      ExponentVector next = sum;
      for (std::size_t j = 0; j < a.size(); ++j) next[j] += a[j];
      slot[l] = xi;
      rec(l + 1, next);
    }
  };
  rec(0, ExponentVector(static_cast<std::size_t>(depth + 2), Complex(0.0)));
  return canonicalize_logpower(out);
}

inline LogPowerSum mul_apply_logpower(const MultiLinearMap& g, std::initializer_list<LogPowerSum> args) {
  std::vector<LogPowerSum> v(args);
  return mul_apply_logpower(g, std::span<const LogPowerSum>(v));
}

}  // namespace asymptex
