#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "asymptex/core.hpp"
#include "asymptex/exp_poly.hpp"
#include "asymptex/iterated_log.hpp"
#include "asymptex/log_power.hpp"
#include "asymptex/multilinear.hpp"

namespace asymptex {

enum class Phase { Cos, Sin };

inline const char* to_string(Phase p) { return p == Phase::Cos ? "cos" : "sin"; }

inline double apply_phase(Phase p, double x) { return p == Phase::Cos ? std::cos(x) : std::sin(x); }

/// Real multilinear maps act on C^n with the same entries; rejects non-real entries.
inline MultiLinearMap complexify_map(const MultiLinearMap& g) {
  if (!g.has_real_entries()) throw ValidationError("complexify_map: map has non-real entries");
  return g;
}

namespace detail {

inline bool coeff_is_conj(const ComplexVec& a, const ComplexVec& b, double tol) {
  return (a - b.conjugate()).norm() <= tol;
}

inline ExponentVector conj_exponent(const ExponentVector& a) {
  ExponentVector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = snap(std::conj(a[i]));
  return c;
}

inline bool is_real_exponent(const ExponentVector& a) {
  return std::all_of(a.begin(), a.end(), [](Complex z) { return z.imag() == 0.0; });
}

}  // namespace detail

/// Termwise conjugate: alpha -> conj(alpha), xi -> conj(xi).
inline LogPowerSum conjugate(const LogPowerSum& p) {
  LogPowerSum r(p.depth(), p.dim());
  for (const auto& [a, xi] : p.terms()) r.add_term(detail::conj_exponent(a), xi.conjugate());
  return r;
}

inline ExpPolySum conjugate(const ExpPolySum& s) {
  ExpPolySum r(s.dim());
  for (const auto& [nu, p] : s.terms()) {
    VecPoly q;
    for (const auto& c : p) q.push_back(c.conjugate());
    r.add_term(std::conj(nu), q);
  }
  return r;
}

/// Term set closed under conjugation with conjugate coefficients, to rel_tol
/// times the largest coefficient norm.
inline bool check_conjugation_symmetry(const LogPowerSum& p, double rel_tol = 1e-12) {
  const double tol = rel_tol * std::max(p.max_coeff_norm(), 1e-300);
  for (const auto& [a, xi] : p.terms()) {
    auto it = p.terms().find(detail::conj_exponent(a));
    if (it == p.terms().end()) {
      if (xi.norm() > tol) return false;
      continue;
    }
    if (!detail::coeff_is_conj(xi, it->second, tol)) return false;
  }
  return true;
}

inline bool check_conjugation_symmetry(const ExpPolySum& s, double rel_tol = 1e-12) {
  const double tol = rel_tol * std::max(s.max_coeff_norm(), 1e-300);
  for (const auto& [nu, p] : s.terms()) {
    auto it = s.terms().find(snap(std::conj(nu)));
    if (it == s.terms().end()) return false;
    const auto& q = it->second;
    for (std::size_t j = 0; j < std::max(p.size(), q.size()); ++j) {
      const ComplexVec a = j < p.size() ? p[j] : ComplexVec::Zero(s.dim());
      const ComplexVec b = j < q.size() ? q[j] : ComplexVec::Zero(s.dim());
      if (!detail::coeff_is_conj(a, b, tol)) return false;
    }
  }
  return true;
}

/// Offending terms for diagnostics: exponent vectors whose conjugate partner is missing or mismatched.
inline std::vector<ExponentVector> conjugation_violations(const LogPowerSum& p, double rel_tol = 1e-12) {
  std::vector<ExponentVector> bad;
  const double tol = rel_tol * std::max(p.max_coeff_norm(), 1e-300);
  for (const auto& [a, xi] : p.terms()) {
    auto it = p.terms().find(detail::conj_exponent(a));
    const bool ok = it == p.terms().end() ? xi.norm() <= tol : detail::coeff_is_conj(xi, it->second, tol);
    if (!ok) bad.push_back(a);
  }
  return bad;
}

/// Real S-polynomial: sum of t^m cos(w t) Z or t^m sin(w t) Z with w >= 0.
class RealSPoly {
 public:
  using Key = std::tuple<int, double, Phase>;  // (power, frequency, phase)

  explicit RealSPoly(Eigen::Index dim = 1) : dim_(dim) {}

  Eigen::Index dim() const { return dim_; }
  const std::map<Key, RealVec>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  /// Adds c t^m phase(w t) z, folding negative frequencies and dropping sin(0).
  void add(int power, double freq, Phase phase, const RealVec& z) {
    freq = snap(freq);
    double sign = 1.0;
    if (freq < 0.0) {
      freq = -freq;
      if (phase == Phase::Sin) sign = -1.0;
    }
    if (freq == 0.0 && phase == Phase::Sin) return;
    auto [it, inserted] = terms_.try_emplace(Key{power, freq, phase}, sign * z);
    if (!inserted) it->second += sign * z;
  }

  RealVec eval(double t) const {
    RealVec r = RealVec::Zero(dim_);
    for (const auto& [k, z] : terms_) {
      const auto& [m, w, ph] = k;
      r += std::pow(t, m) * apply_phase(ph, w * t) * z;
    }
    return r;
  }

  /// Removes coefficients below rel times the largest.
  void trim(double rel = 1e-13) {
    double big = 0.0;
    for (const auto& [k, z] : terms_) big = std::max(big, z.norm());
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (it->second.norm() <= rel * big) {
        it = terms_.erase(it);
      } else {
        ++it;
      }
    }
  }

 private:
  Eigen::Index dim_;
  std::map<Key, RealVec> terms_;
};

/// Folds a conjugation-symmetric sum with purely imaginary exponents into
/// cos/sin terms: p e^{iwt} + conj = 2 Re(p) cos(wt) - 2 Im(p) sin(wt).
inline RealSPoly to_real_spoly(const ExpPolySum& s, double rel_tol = 1e-12) {
  for (const auto& [nu, p] : s.terms()) {
    if (std::abs(nu.real()) > 1e-12) {
      throw ValidationError("to_real_spoly: exponent with nonzero real part " + std::to_string(nu.real()));
    }
  }
  if (!check_conjugation_symmetry(s, rel_tol)) throw ValidationError("to_real_spoly: sum is not conjugation-symmetric");
  RealSPoly r(s.dim());
  for (const auto& [nu, p] : s.terms()) {
    const double w = nu.imag();
    if (w < 0.0) continue;  // carried by its partner
    for (std::size_t m = 0; m < p.size(); ++m) {
      if (w == 0.0) {
        r.add(static_cast<int>(m), 0.0, Phase::Cos, p[m].real());
      } else {
        r.add(static_cast<int>(m), w, Phase::Cos, 2.0 * p[m].real());
        r.add(static_cast<int>(m), w, Phase::Sin, -2.0 * p[m].imag());
      }
    }
  }
  r.trim();
  return r;
}

/// Real form of an exponential-mode term y in F_E(-mu): y(t) = e^{-mu t} h(t).
inline RealSPoly to_real_spoly_scaled(const ExpPolySum& y, double mu, double rel_tol = 1e-12) {
  return to_real_spoly(y.shift_exponent(mu), rel_tol);
}

/// One real log-power monomial z^alpha prod_{j=0}^k phase_j(w_j z_j) xi.
struct RealLogTerm {
  std::vector<double> alpha;   // alpha[j + 1] is the power of z_j, j = -1..k
  std::vector<double> freq;    // freq[j] for z_j, j = 0..k, all >= 0
  std::vector<Phase> phase;    // cos whenever freq is 0
  RealVec xi;
};

/// Element of P^1(k, R^n): real powers of the ladder variables times cos/sin of ladder variables.
class RealLogPower {
 public:
  using Key = std::tuple<std::vector<double>, std::vector<double>, std::vector<Phase>>;

  RealLogPower(int depth = 0, Eigen::Index dim = 1) : depth_(depth), dim_(dim) {
    if (depth < 0) throw ValidationError("real log-power depth must be >= 0");
  }

  int depth() const { return depth_; }
  Eigen::Index dim() const { return dim_; }
  const std::map<Key, RealVec>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  /// Adds one term after normalizing frequencies to w >= 0 (sin carries the sign).
  void add(std::vector<double> alpha, std::vector<double> freq, std::vector<Phase> phase, const RealVec& xi) {
    const auto k = static_cast<std::size_t>(depth_);
    if (alpha.size() != k + 2 || freq.size() != k + 1 || phase.size() != k + 1) {
      throw ValidationError("real log-power term does not match depth " + std::to_string(depth_));
    }
    if (xi.size() != dim_) throw ValidationError("real log-power coefficient dimension mismatch");
    double sign = 1.0;
    for (std::size_t j = 0; j <= k; ++j) {
      freq[j] = snap(freq[j]);
      if (freq[j] < 0.0) {
        freq[j] = -freq[j];
        if (phase[j] == Phase::Sin) sign = -sign;
      }
      if (freq[j] == 0.0) {
        if (phase[j] == Phase::Sin) return;
        phase[j] = Phase::Cos;
      }
    }
    for (auto& a : alpha) a = snap(a);
    auto [it, inserted] = terms_.try_emplace(Key{std::move(alpha), std::move(freq), std::move(phase)}, sign * xi);
    if (!inserted) it->second += sign * xi;
  }

  void add(const RealLogTerm& t) { add(t.alpha, t.freq, t.phase, t.xi); }

  RealVec eval(double t) const {
    const auto logs = ladder_logs(depth_, t);  // logs[j + 1] = ln L_j, logs[j] = L_j for j >= 0
    RealVec r = RealVec::Zero(dim_);
    for (const auto& [key, xi] : terms_) {
      const auto& [alpha, freq, phase] = key;
      double e = 0.0;
      for (std::size_t j = 0; j < alpha.size(); ++j) {
        if (alpha[j] != 0.0) e += alpha[j] * logs[j];
      }
      double v = std::exp(e);
      for (std::size_t j = 0; j < freq.size(); ++j) {
        if (freq[j] != 0.0) v *= apply_phase(phase[j], freq[j] * logs[j]);
      }
      r += v * xi;
    }
    return r;
  }

  bool has_oscillation() const {
    for (const auto& [key, xi] : terms_) {
      for (double w : std::get<1>(key)) {
        if (w != 0.0) return true;
      }
    }
    return false;
  }

  /// Real exponents satisfy alpha_j = 0 for -1 <= j < m and alpha_m = mu.
  bool in_class(int m, double mu, double tol = 1e-10) const {
    for (const auto& [key, xi] : terms_) {
      const auto& alpha = std::get<0>(key);
      if (m + 1 >= static_cast<int>(alpha.size())) return false;
      for (int j = -1; j < m; ++j) {
        if (std::abs(alpha[static_cast<std::size_t>(j + 1)]) > tol) return false;
      }
      if (std::abs(alpha[static_cast<std::size_t>(m + 1)] - mu) > tol) return false;
    }
    return true;
  }

  void trim(double rel = 1e-13) {
    double big = 0.0;
    for (const auto& [k, z] : terms_) big = std::max(big, z.norm());
    for (auto it = terms_.begin(); it != terms_.end();) {
      if (it->second.norm() <= rel * big) {
        it = terms_.erase(it);
      } else {
        ++it;
      }
    }
  }

 private:
  int depth_;
  Eigen::Index dim_;
  std::map<Key, RealVec> terms_;
};

namespace detail {

// Angle-addition expansion of cos or sin of a sum of angles into products of
// single-angle cos/sin factors: returns (sign, per-angle phase) pairs.
inline std::vector<std::pair<double, std::vector<Phase>>> expand_angle_sum(Phase outer, std::size_t count) {
  if (count == 0) return {{outer == Phase::Cos ? 1.0 : 0.0, {}}};
  if (count == 1) return {{1.0, {outer}}};
  // f(a + B) in terms of a and the tail B.
  const auto tail_cos = expand_angle_sum(Phase::Cos, count - 1);
  const auto tail_sin = expand_angle_sum(Phase::Sin, count - 1);
  std::vector<std::pair<double, std::vector<Phase>>> out;
  auto emit = [&](double sign, Phase head, const auto& tail) {
    for (const auto& [s, ph] : tail) {
      std::vector<Phase> v{head};
      v.insert(v.end(), ph.begin(), ph.end());
      out.emplace_back(sign * s, std::move(v));
    }
  };
  if (outer == Phase::Cos) {
    emit(1.0, Phase::Cos, tail_cos);   // cos a cos B
    emit(-1.0, Phase::Sin, tail_sin);  // - sin a sin B
  } else {
    emit(1.0, Phase::Sin, tail_cos);  // sin a cos B
    emit(1.0, Phase::Cos, tail_sin);  // + cos a sin B
  }
  return out;
}

}  // namespace detail

/// Real form of a conjugation-symmetric log-power sum. Imaginary exponent
/// parts on z_j become cos/sin factors of z_{j+1}, because L_j^{iw} = e^{iw L_{j+1}};
/// the result has depth k + 1 unless every Im alpha_k vanishes.
inline RealLogPower to_real_logpower(const LogPowerSum& p, double rel_tol = 1e-12) {
  if (!check_conjugation_symmetry(p, rel_tol)) {
    throw ValidationError("to_real_logpower: sum is not conjugation-symmetric");
  }
  const int k = p.depth();
  bool top_oscillates = false;
  for (const auto& [a, xi] : p.terms()) {
    if (a.back().imag() != 0.0) top_oscillates = true;
  }
  const int out_depth = std::max(top_oscillates ? k + 1 : k, 0);
  const auto slots = static_cast<std::size_t>(out_depth + 1);
  RealLogPower r(out_depth, p.dim());

  for (const auto& [a, xi] : p.terms()) {
    std::vector<double> alpha(static_cast<std::size_t>(out_depth + 2), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) alpha[i] = a[i].real();
    if (detail::is_real_exponent(a)) {
      r.add(alpha, std::vector<double>(slots, 0.0), std::vector<Phase>(slots, Phase::Cos), xi.real());
      continue;
    }
    // Keep one representative of each conjugate pair.
    const auto partner = detail::conj_exponent(a);
    if (!ExponentVectorLess{}(a, partner)) continue;

    // Oscillating angles: w_j = Im alpha_{j-1} on z_j, j = 0..k+1.
    std::vector<std::size_t> idx;
    std::vector<double> w;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].imag() != 0.0) {
        idx.push_back(i);  // alpha index i is z_{i-1}; its angle sits on z_i, i.e. freq slot i
        w.push_back(a[i].imag());
      }
    }
    // 2 Re(xi e^{i Theta}) = 2 Re(xi) cos Theta - 2 Im(xi) sin Theta.
    for (const auto& [outer, coeff] :
         {std::pair{Phase::Cos, RealVec(2.0 * xi.real())}, std::pair{Phase::Sin, RealVec(-2.0 * xi.imag())}}) {
      if (coeff.isZero(0.0)) continue;
      for (const auto& [sign, phases] : detail::expand_angle_sum(outer, idx.size())) {
        std::vector<double> freq(slots, 0.0);
        std::vector<Phase> ph(slots, Phase::Cos);
        for (std::size_t q = 0; q < idx.size(); ++q) {
          freq[idx[q]] = w[q];
          ph[idx[q]] = phases[q];
        }
        r.add(alpha, freq, ph, sign * coeff);
      }
    }
  }
  r.trim();
  return r;
}

/// Complex form of a real log-power: cos(w z_j) = (z_{j-1}^{iw} + z_{j-1}^{-iw}) / 2 and
/// sin(w z_j) = (z_{j-1}^{iw} - z_{j-1}^{-iw}) / (2i). Depth is unchanged.
inline LogPowerSum from_real_logpower(const RealLogPower& q) {
  LogPowerSum out(q.depth(), q.dim());
  for (const auto& [key, xi] : q.terms()) {
    const auto& [alpha, freq, phase] = key;
    std::vector<std::pair<ExponentVector, Complex>> partial{{ExponentVector(alpha.begin(), alpha.end()), 1.0}};
    for (std::size_t j = 0; j < freq.size(); ++j) {
      if (freq[j] == 0.0) continue;
      std::vector<std::pair<ExponentVector, Complex>> next;
      for (const auto& [e, c] : partial) {
        for (double s : {1.0, -1.0}) {
          ExponentVector f = e;
          f[j] += Complex(0.0, s * freq[j]);  // exponent slot j is z_{j-1}
          const Complex factor = phase[j] == Phase::Cos ? Complex(0.5) : Complex(0.0, -0.5 * s);
          next.emplace_back(std::move(f), c * factor);
        }
      }
      partial = std::move(next);
    }
    for (const auto& [e, c] : partial) out.add_term(e, c * xi.cast<Complex>());
  }
  return canonicalize_logpower(out);
}

}  // namespace asymptex
