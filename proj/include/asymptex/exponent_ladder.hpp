#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "asymptex/core.hpp"

namespace asymptex {

/// Two real exponents are the same ladder element when |a - b| < 1e-10 max(1, |a|).
inline bool same_exponent(double a, double b) {
  return std::abs(a - b) < 1e-10 * std::max(1.0, std::abs(a));
}

struct LadderFlags {
  bool additive = true;
  bool unit_increment = false;
};

/// Sorted prefix (mu_1 < mu_2 < ...) of the set generated from positive base
/// exponents under addition and, optionally, the unit increment mu -> mu + 1.
class ExponentLadder {
 public:
  ExponentLadder() = default;
  ExponentLadder(std::vector<double> base, LadderFlags flags, double cutoff, std::vector<double> values)
      : base_(std::move(base)), flags_(flags), cutoff_(cutoff), values_(std::move(values)) {}

  const std::vector<double>& base() const { return base_; }
  LadderFlags flags() const { return flags_; }
  double cutoff() const { return cutoff_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// mu_k with the 1-based index used throughout the expansion recursions.
  double mu(std::size_t k) const { return values_.at(k - 1); }

  /// 1-based index of a realized value, if any.
  std::optional<std::size_t> index_of(double mu) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), mu - 1e-10 * std::max(1.0, std::abs(mu)));
    if (it != values_.end() && same_exponent(*it, mu)) return static_cast<std::size_t>(it - values_.begin()) + 1;
    return std::nullopt;
  }

  bool contains(double mu) const { return index_of(mu).has_value(); }

 private:
  std::vector<double> base_;
  LadderFlags flags_;
  double cutoff_ = 0.0;
  std::vector<double> values_;
};

/// Every ladder element <= cutoff, deduplicated under an absolute 1e-12 tolerance.
inline ExponentLadder build_ladder(std::vector<double> base, LadderFlags flags, double cutoff) {
  if (base.empty()) throw ValidationError("build_ladder: empty base");
  for (double b : base) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ValidationError("build_ladder: base exponents must be positive");
  }
  std::sort(base.begin(), base.end());
  if (!(cutoff >= base.front())) {
    throw ValidationError("build_ladder: cutoff " + std::to_string(cutoff) + " below smallest base exponent");
  }
  constexpr double dedup = 1e-12;
  std::vector<double> set;
  auto insert = [&](double v) {
    if (v > cutoff + dedup) return false;
    auto it = std::lower_bound(set.begin(), set.end(), v - dedup);
    if (it != set.end() && std::abs(*it - v) <= dedup) return false;
    set.insert(it, v);
    return true;
  };
  for (double b : base) insert(b);
  bool grew = true;
  while (grew) {
    grew = false;
    const std::vector<double> snapshot = set;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
      if (flags.unit_increment) grew |= insert(snapshot[i] + 1.0);
      if (!flags.additive) continue;
      for (std::size_t j = i; j < snapshot.size(); ++j) {
        const double s = snapshot[i] + snapshot[j];
        if (s > cutoff + dedup) break;
        grew |= insert(s);
      }
    }
  }
  return ExponentLadder(std::move(base), flags, cutoff, std::move(set));
}

/// All multisets of realized ladder elements (as nondecreasing 1-based index
/// lists) of size 2..max_arity whose values sum to mu.
inline std::vector<std::vector<std::size_t>> decompose(const ExponentLadder& ladder, double mu,
                                                       std::size_t max_arity) {
  if (!ladder.contains(mu)) {
    throw ValidationError("decompose: " + std::to_string(mu) + " is not a realized ladder element");
  }
  const double tol = 1e-10 * std::max(1.0, std::abs(mu));
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  const auto& v = ladder.values();
  std::function<void(std::size_t, double)> rec = [&](std::size_t from, double rest) {
    if (std::abs(rest) < tol) {
      if (cur.size() >= 2) out.push_back(cur);
      return;
    }
    if (cur.size() == max_arity) return;
    for (std::size_t i = from; i < v.size(); ++i) {
      if (v[i] > rest + tol) break;
      // A single part equal to mu is not a decomposition.
      if (cur.empty() && std::abs(v[i] - mu) < tol) break;
      cur.push_back(i + 1);
      rec(i, rest - v[i]);
      cur.pop_back();
    }
  };
  rec(0, mu);
  return out;
}

}  // namespace asymptex
