#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "asymptex/core.hpp"
#include "asymptex/exp_poly.hpp"
#include "asymptex/exponent_ladder.hpp"
#include "asymptex/log_power.hpp"
#include "asymptex/multilinear.hpp"

namespace asymptex {

/// Which decay class the forcing expansion lives in.
enum class Mode {
  Exponential,  // f_k in F_E(-mu_k)
  Power,        // f_k = p_k(L(t)), p_k in P_0(n_k, -mu_k)
  Log,          // f_k = p_k(L(t)), p_k in P_{m*}(n_k, -mu_k), m* >= 1
};

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Exponential: return "exponential";
    case Mode::Power: return "power";
    case Mode::Log: return "log";
  }
  return "?";
}

/// One forcing expansion term f_k at decay rate mu_k.
struct ForcingTerm {
  double mu = 0.0;
  std::variant<ExpPolySum, LogPowerSum> term;
};

/// y' = -A y + sum_m G_m(y, ..., y) + f(t) together with the expansion setup.
struct ProblemSpec {
  ComplexMat a;
  std::vector<MultiLinearMap> nonlinearity;
  std::vector<ForcingTerm> forcing;  // sorted by mu, distinct mu
  Mode mode = Mode::Exponential;
  int m_star = 0;
  ExponentLadder ladder;
  std::vector<int> depth_schedule;  // optional n_k override, 1-based order -> index k-1
  std::size_t order = 1;

  Eigen::Index dim() const { return a.rows(); }

  int max_degree() const {
    int d = 0;
    for (const auto& g : nonlinearity) d = std::max(d, g.arity());
    return d;
  }

  /// G(x) = sum_m G_m(x, ..., x).
  ComplexVec nonlinear(const ComplexVec& x) const {
    ComplexVec r = ComplexVec::Zero(x.size());
    for (const auto& g : nonlinearity) r += g.diagonal(x);
    return r;
  }

  const ForcingTerm* forcing_at(double mu) const {
    for (const auto& f : forcing) {
      if (same_exponent(f.mu, mu)) return &f;
    }
    return nullptr;
  }

  bool is_real() const {
    if (!asymptex::is_real(a)) return false;
    return std::all_of(nonlinearity.begin(), nonlinearity.end(),
                       [](const MultiLinearMap& g) { return g.has_real_entries(); });
  }
};

inline Eigen::VectorXcd eigenvalues(const ComplexMat& a) {
  Eigen::ComplexEigenSolver<ComplexMat> es(a, false);
  return es.eigenvalues();
}

/// Smallest real part of the spectrum (lambda_1).
inline double spectral_abscissa_min(const ComplexMat& a) {
  return eigenvalues(a).real().minCoeff();
}

/// Distinct real parts of the spectrum, clustered at 1e-8.
inline std::vector<double> spectrum_real_parts(const ComplexMat& a) {
  const Eigen::VectorXcd ev = eigenvalues(a);
  std::vector<double> re;
  for (Eigen::Index i = 0; i < ev.size(); ++i) re.push_back(ev(i).real());
  std::sort(re.begin(), re.end());
  std::vector<double> out;
  for (double r : re) {
    if (out.empty() || std::abs(r - out.back()) > 1e-8 * std::max(1.0, std::abs(r))) out.push_back(r);
  }
  return out;
}

/// Eigenvalues clustered at 1e-6 (split Jordan blocks rejoin); cluster means returned.
inline std::vector<Complex> clustered_eigenvalues(const ComplexMat& a) {
  const Eigen::VectorXcd ev = eigenvalues(a);
  std::vector<std::vector<Complex>> groups;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    bool placed = false;
    for (auto& g : groups) {
      if (std::abs(g.front() - ev(i)) < 1e-6 * std::max(1.0, std::abs(ev(i)))) {
        g.push_back(ev(i));
        placed = true;
        break;
      }
    }
    if (!placed) groups.push_back({ev(i)});
  }
  std::vector<Complex> out;
  for (const auto& g : groups) {
    Complex s = 0.0;
    for (auto z : g) s += z;
    out.push_back(s / static_cast<double>(g.size()));
  }
  std::sort(out.begin(), out.end(), ComplexLess{});
  return out;
}

/// Groups an exp-poly forcing into terms f_k in F_E(-mu_k), mu_k = -Re nu.
inline std::vector<ForcingTerm> split_forcing(const ExpPolySum& f) {
  std::map<double, ExpPolySum> by_mu;
  for (const auto& [nu, p] : f.terms()) {
    const double mu = -nu.real();
    auto it = std::find_if(by_mu.begin(), by_mu.end(), [&](const auto& kv) { return same_exponent(kv.first, mu); });
    if (it == by_mu.end()) it = by_mu.emplace(mu, ExpPolySum(f.dim())).first;
    it->second.add_term(nu, p);
  }
  std::vector<ForcingTerm> out;
  for (auto& [mu, s] : by_mu) out.push_back({mu, canonicalize_exp(s)});
  return out;
}

/// Groups a log-power forcing into terms p_k in P_{m*}(k, -mu_k), mu_k = -Re alpha_{m*}.
inline std::vector<ForcingTerm> split_forcing(const LogPowerSum& f, int m_star) {
  if (f.depth() < m_star) {
    throw ValidationError("forcing depth " + std::to_string(f.depth()) + " is below m* = " + std::to_string(m_star));
  }
  std::map<double, LogPowerSum> by_mu;
  for (const auto& [alpha, xi] : f.terms()) {
    for (int j = -1; j < m_star; ++j) {
      if (std::abs(alpha_at(alpha, j).real()) > 1e-10) {
        throw ValidationError("forcing term violates class P_" + std::to_string(m_star) + ": Re alpha_" +
                              std::to_string(j) + " = " + std::to_string(alpha_at(alpha, j).real()) +
                              " is not zero");
      }
    }
    const double mu = -alpha_at(alpha, m_star).real();
    auto it = std::find_if(by_mu.begin(), by_mu.end(), [&](const auto& kv) { return same_exponent(kv.first, mu); });
    if (it == by_mu.end()) it = by_mu.emplace(mu, LogPowerSum(f.depth(), f.dim())).first;
    it->second.add_term(alpha, xi);
  }
  std::vector<ForcingTerm> out;
  for (auto& [mu, s] : by_mu) out.push_back({mu, canonicalize_logpower(s)});
  return out;
}

inline void validate_matrix(const ComplexMat& a) {
  const Eigen::Index n = a.rows();
  if (n < 1 || a.cols() != n) throw ValidationError("problem.matrix: A must be a nonempty square matrix");
  const double lambda1 = spectral_abscissa_min(a);
  if (!(lambda1 > 1e-10)) {
    throw ValidationError("problem.matrix: all eigenvalues of A need positive real parts (min Re = " +
                          std::to_string(lambda1) + ")");
  }
}

/// Checks the problem against the standing assumptions of its mode. Throws
/// ValidationError naming the violated condition.
inline void validate(const ProblemSpec& spec) {
  const Eigen::Index n = spec.a.rows();
  validate_matrix(spec.a);
  for (const auto& g : spec.nonlinearity) {
    if (g.dim() != n) throw ValidationError("problem.nonlinearity: map dimension does not match A");
  }
  if (spec.order < 1) throw ValidationError("expansion.order must be >= 1");
  if (spec.mode == Mode::Log && spec.m_star < 1) throw ValidationError("problem.m_star must be >= 1 in log mode");
  if (spec.mode == Mode::Power && spec.m_star != 0) throw ValidationError("problem.m_star must be 0 in power mode");

  const auto& ladder = spec.ladder;
  if (ladder.size() < spec.order) {
    throw ValidationError("ladder overflow: cutoff " + std::to_string(ladder.cutoff()) + " realizes only " +
                          std::to_string(ladder.size()) + " exponents, order " + std::to_string(spec.order) +
                          " requested");
  }
  if (!ladder.flags().additive) throw ValidationError("ladder must be closed under addition");
  if (spec.mode == Mode::Power && !ladder.flags().unit_increment) {
    throw ValidationError("power mode needs a ladder closed under the unit increment");
  }
  if (spec.mode == Mode::Exponential) {
    for (double re : spectrum_real_parts(spec.a)) {
      if (re <= ladder.cutoff() + 1e-12 && !ladder.contains(re)) {
        throw ValidationError("exponential-mode ladder assumption violated: the base must contain every Re sigma(A), " +
                              std::to_string(re) + " is missing");
      }
    }
  }

  for (std::size_t i = 0; i < spec.forcing.size(); ++i) {
    const auto& f = spec.forcing[i];
    const std::string where = "problem.forcing[mu=" + std::to_string(f.mu) + "]";
    if (!(f.mu > 0.0)) throw ValidationError(where + ": decay rates must be positive");
    if (f.mu <= ladder.cutoff() + 1e-12 && !ladder.contains(f.mu)) {
      throw ValidationError(where + ": decay rate is not a ladder element");
    }
    if (spec.mode == Mode::Exponential) {
      const auto* e = std::get_if<ExpPolySum>(&f.term);
      if (!e) throw ValidationError(where + ": exponential mode needs exp-poly forcing");
      if (e->dim() != n) throw ValidationError(where + ": dimension mismatch");
      if (!e->in_class(-f.mu)) throw ValidationError(where + ": term is not in F_E(-mu)");
    } else {
      const auto* p = std::get_if<LogPowerSum>(&f.term);
      if (!p) throw ValidationError(where + ": power/log mode needs log-power forcing");
      if (p->dim() != n) throw ValidationError(where + ": dimension mismatch");
      if (p->depth() < spec.m_star) throw ValidationError(where + ": depth below m*");
      if (!p->in_class(spec.m_star, -f.mu)) {
        throw ValidationError(where + ": term is not in P_" + std::to_string(spec.m_star) + "(k, -mu)");
      }
    }
  }
}

/// Default ladder base: forcing decay rates, plus Re sigma(A) in exponential mode.
inline std::vector<double> default_ladder_base(const ComplexMat& a, const std::vector<ForcingTerm>& forcing, Mode mode) {
  std::vector<double> base;
  for (const auto& f : forcing) base.push_back(f.mu);
  if (mode == Mode::Exponential) {
    for (double re : spectrum_real_parts(a)) base.push_back(re);
  }
  if (base.empty()) {
    // Zero forcing outside exponential mode: only the unit rate is meaningful.
    base.push_back(1.0);
  }
  return base;
}

/// Ladder large enough for `order` elements: cutoff defaults to order * min(base).
inline ExponentLadder default_ladder(std::vector<double> base, Mode mode, std::size_t order,
                                     std::optional<double> cutoff = std::nullopt) {
  const double lo = *std::min_element(base.begin(), base.end());
  LadderFlags flags{true, mode == Mode::Power};
  return build_ladder(std::move(base), flags, cutoff.value_or(static_cast<double>(order) * lo));
}

/// Assembles a problem from a whole forcing sum: splits it by decay rate and
/// builds the default ladder unless a base or cutoff is given.
inline ProblemSpec make_problem(ComplexMat a, std::vector<MultiLinearMap> nonlinearity,
                                const std::variant<ExpPolySum, LogPowerSum>& forcing, Mode mode, int m_star,
                                std::size_t order, std::optional<std::vector<double>> base = std::nullopt,
                                std::optional<double> cutoff = std::nullopt) {
  validate_matrix(a);  // the default ladder reads Re sigma(A)
  ProblemSpec spec;
  spec.a = std::move(a);
  spec.nonlinearity = std::move(nonlinearity);
  spec.mode = mode;
  spec.m_star = m_star;
  spec.order = order;
  if (const auto* e = std::get_if<ExpPolySum>(&forcing)) {
    if (mode != Mode::Exponential) throw ValidationError("problem.forcing: exp-poly forcing needs exponential mode");
    spec.forcing = split_forcing(*e);
  } else {
    if (mode == Mode::Exponential) throw ValidationError("problem.forcing: exponential mode needs exp-poly forcing");
    spec.forcing = split_forcing(std::get<LogPowerSum>(forcing), m_star);
  }
  spec.ladder = default_ladder(base ? *base : default_ladder_base(spec.a, spec.forcing, mode), mode, order, cutoff);
  return spec;
}

}  // namespace asymptex
