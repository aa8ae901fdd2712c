#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "asymptex/config.hpp"
#include "asymptex/expansion.hpp"
#include "asymptex/numerics/certificate.hpp"
#include "asymptex/numerics/decay.hpp"
#include "asymptex/numerics/ode.hpp"
#include "asymptex/numerics/resonance.hpp"
#include "asymptex/realify.hpp"
#include "asymptex/serialize.hpp"

namespace asymptex {

/// A header row plus string cells, rendered as aligned text or CSV.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    auto cell = [](const std::string& s) {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    };
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + cell(r[i]);
      out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  std::string text() const {
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& r : rows) {
      for (std::size_t i = 0; i + 1 < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      std::string s;
      for (std::size_t i = 0; i < r.size(); ++i) {
        s += r[i];
        if (i + 1 < r.size()) s += std::string(width[i] - r[i].size() + 2, ' ');
      }
      out += s + "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  std::string render(const std::string& format) const { return format == "csv" ? csv() : text(); }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

// ---------------------------------------------------------------------------
// expand

struct ExpandReport {
  ProblemSpec spec;
  Expansion expansion;
  Table table;
};

inline std::string order_term_string(const Expansion& e, std::size_t k) {
  return e.mode == Mode::Exponential ? term_string(e.exp_terms[k - 1]) : term_string(e.log_terms[k - 1]);
}

inline bool order_in_class(const Expansion& e, std::size_t k) {
  const double mu = e.mu[k - 1];
  return e.mode == Mode::Exponential ? e.exp_terms[k - 1].in_class(-mu) : e.log_terms[k - 1].in_class(e.m_star, -mu);
}

inline std::string class_name(const Expansion& e, std::size_t k) {
  const std::string mu = fmt_short(-e.mu[k - 1]);
  if (e.mode == Mode::Exponential) return "F_E(" + mu + ")";
  return "P_" + std::to_string(e.m_star) + "(" + std::to_string(e.depth[k - 1]) + ", " + mu + ")";
}

inline Table expansion_table(const Expansion& e) {
  Table t{{"k", "mu_k", "depth", "term", "class", "in_class", "kernel", "free_constants"}, {}};
  for (std::size_t k = 1; k <= e.order(); ++k) {
    std::string consts;
    for (const auto& c : e.free_constants[k - 1]) consts += (consts.empty() ? "" : " ") + complex_string(c);
    t.rows.push_back({std::to_string(k), fmt_short(e.mu[k - 1]), std::to_string(e.depth[k - 1]),
                      order_term_string(e, k), class_name(e, k), order_in_class(e, k) ? "yes" : "no",
                      std::to_string(e.kernels[k - 1].size()), consts.empty() ? "-" : consts});
  }
  return t;
}

inline ExpandReport cmd_expand(const RunConfig& c) {
  ExpandReport r{build_problem(c), {}, {}};
  r.expansion = expand(r.spec);
  r.table = expansion_table(r.expansion);
  return r;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyRow {
  std::size_t n = 0;
  double target = 0.0;  // mu_N, or mu_1 for N = 0
  DecayFit fit;
  bool pass = false;
};

struct ResonanceRow {
  std::size_t k = 0;
  ResonantFit fit;
};

struct VerifyReport {
  ProblemSpec spec;
  Expansion expansion;
  Trajectory trajectory;
  std::vector<double> grid;
  std::vector<Samples> remainders;  // index N = 0..order
  std::vector<VerifyRow> rows;
  std::vector<ResonanceRow> resonance;
  bool pass = true;

  Table table() const {
    Table t{{"N", "target_mu", "exponent", "r2", "t_a", "t_b", "samples", "verdict"}, {}};
    for (const auto& r : rows) {
      t.rows.push_back({std::to_string(r.n), fmt_short(r.target), fmt_short(r.fit.exponent), fmt_short(r.fit.r2),
                        fmt_short(r.fit.t_a), fmt_short(r.fit.t_b), std::to_string(r.fit.samples),
                        r.pass ? "pass" : "fail"});
    }
    return t;
  }

  /// t, state components (re, im), remainder per N; 17 significant digits.
  std::string remainder_csv() const {
    std::string out = "t";
    const auto dim = spec.dim();
    for (Eigen::Index i = 0; i < dim; ++i) out += ",y" + std::to_string(i) + "_re,y" + std::to_string(i) + "_im";
    for (std::size_t n = 0; n < remainders.size(); ++n) out += ",r" + std::to_string(n);
    out += "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out += fmt17(grid[i]);
      const ComplexVec y = trajectory.at(grid[i]);
      for (Eigen::Index j = 0; j < dim; ++j) out += "," + fmt17(y(j).real()) + "," + fmt17(y(j).imag());
      for (const auto& s : remainders) out += "," + fmt17(s.r[i]);
      out += "\n";
    }
    return out;
  }
};

inline Expansion truncate_expansion(Expansion e, std::size_t n) {
  if (e.order() <= n) return e;
  e.mu.resize(n);
  e.depth.resize(n);
  if (e.mode == Mode::Exponential) {
    e.exp_terms.resize(n);
  } else {
    e.log_terms.resize(n);
  }
  e.kernels.resize(n);
  e.free_constants.resize(n);
  return e;
}

/// Integrates the configured trajectory, fits the remainder decay of the given
/// expansion for every N <= its order and compares against mu_N - margin.
inline VerifyReport verify_expansion(const RunConfig& c, Expansion expansion) {
  const auto& vc = c.verification;
  if (!vc.present) throw ValidationError("verification: section missing");
  VerifyReport r;
  r.spec = build_problem(c);
  r.expansion = std::move(expansion);
  const std::size_t order = r.expansion.order();
  const double start = std::max(forcing_domain_start(r.spec), r.expansion.domain_start(order));
  if (!(vc.t_span.first > start)) {
    throw ValidationError("verification.t_span: the expansion needs t > " + fmt17(start));
  }

  r.trajectory = integrate(r.spec, vc.y0, vc.t_span, vc.rel_tol, vc.abs_tol);

  if (c.expansion.resonance == ConstantsPolicy::Fit && r.spec.mode == Mode::Exponential) {
    const ProblemSpec wide = vc.refine_orders > 0 ? build_problem(c, order + vc.refine_orders) : r.spec;
    for (std::size_t k = 1; k <= order; ++k) {
      if (r.expansion.kernels[k - 1].empty()) continue;
      ResonantFit fit = vc.refine_orders > 0
                            ? refine_resonant_constants(r.trajectory, wide, r.expansion, k, vc.refine_orders,
                                                        vc.resonance_window)
                            : fit_resonant_constants(r.trajectory, r.expansion, k, vc.resonance_window);
      r.expansion = truncate_expansion(fit.expansion, order);
      fit.expansion = Expansion{};
      r.resonance.push_back({k, std::move(fit)});
    }
  }

  r.grid = r.spec.mode == Mode::Exponential ? linear_grid(vc.t_span.first, vc.t_span.second, vc.samples)
                                            : geometric_grid(vc.t_span.first, vc.t_span.second, vc.samples);
  for (std::size_t n = 0; n <= order; ++n) {
    r.remainders.push_back(remainder_series(r.trajectory, r.expansion, n, r.grid));
    VerifyRow row;
    row.n = n;
    row.target = r.expansion.mu[n == 0 ? 0 : n - 1];
    row.fit = fit_decay(r.remainders.back(), r.spec.mode, r.spec.m_star, vc.fit_window);
    row.pass = row.fit.exponent >= row.target - vc.margin;
    r.pass = r.pass && row.pass;
    r.rows.push_back(row);
  }
  return r;
}

inline VerifyReport cmd_verify(const RunConfig& c) { return verify_expansion(c, expand(build_problem(c))); }

// ---------------------------------------------------------------------------
// realify

struct RealifyRow {
  std::size_t k = 0;
  double mu = 0.0;
  int depth = 0;
  std::string term;
  bool in_class = false;
  bool oscillating = false;
};

struct RealifyReport {
  ProblemSpec spec;
  Expansion expansion;
  std::vector<RealLogPower> log_forms;  // power/log modes
  std::vector<RealSPoly> exp_forms;     // exponential mode: y_k = e^{-mu_k t} h_k(t)
  std::vector<RealifyRow> rows;
  std::vector<double> grid;
  double max_imag_residue = 0.0;
  double max_real_mismatch = 0.0;  // max |real - Re(complex)| over max |complex|, per order.
                                   // Complex evaluation folds t into a phase, so expect ~t*eps at large t.
  bool pass = false;

  Table table() const {
    Table t{{"k", "mu_k", "depth", "real_term", "in_class", "oscillating"}, {}};
    for (const auto& r : rows) {
      t.rows.push_back({std::to_string(r.k), fmt_short(r.mu), std::to_string(r.depth), r.term, r.in_class ? "yes" : "no",
                        r.oscillating ? "yes" : "no"});
    }
    return t;
  }
};

inline constexpr double kImagResidueLimit = 1e-11;

/// Throws naming the forcing terms whose conjugate partner is missing.
inline void require_symmetric_forcing(const ProblemSpec& spec) {
  std::vector<std::string> bad;
  for (const auto& f : spec.forcing) {
    if (const auto* p = std::get_if<LogPowerSum>(&f.term)) {
      for (const auto& a : conjugation_violations(*p)) {
        LogPowerSum one(p->depth(), p->dim());
        one.add_term(a, p->terms().at(a));
        bad.push_back(term_string(one));
      }
    } else {
      const auto& s = std::get<ExpPolySum>(f.term);
      if (!check_conjugation_symmetry(s)) {
        for (const auto& [nu, poly] : s.terms()) {
          const auto it = s.terms().find(std::conj(nu));
          bool ok = it != s.terms().end() && it->second.size() == poly.size();
          for (std::size_t m = 0; ok && m < poly.size(); ++m) {
            ok = (it->second[m] - poly[m].conjugate()).norm() <= 1e-12 * std::max(1.0, s.max_coeff_norm());
          }
          if (!ok) bad.push_back(term_string(ExpPolySum::monomial(nu, poly)));
        }
      }
    }
  }
  if (!bad.empty()) {
    std::string msg = "forcing is not conjugation-symmetric; offending terms:";
    for (const auto& b : bad) msg += " [" + b + "]";
    throw ValidationError(msg);
  }
}

inline std::vector<double> default_realify_grid(const ProblemSpec& spec, const Expansion& e, std::size_t n) {
  if (spec.mode == Mode::Exponential) return linear_grid(0.5, 20.0, n);
  const double start = std::max(20.0, 2.6 * std::max(forcing_domain_start(spec), e.domain_start(e.order())));
  return geometric_grid(start, std::max(1e12, 100.0 * start), n);
}

inline RealifyReport cmd_realify(const RunConfig& c) {
  RealifyReport r;
  r.spec = build_problem(c);
  if (!r.spec.is_real()) throw ValidationError("realify needs a real matrix A and real nonlinearity entries");
  require_symmetric_forcing(r.spec);
  r.expansion = expand(r.spec);
  const auto& e = r.expansion;
  r.grid = c.realify.t_range
               ? (r.spec.mode == Mode::Exponential ? linear_grid(c.realify.t_range->first, c.realify.t_range->second, c.realify.samples)
                                                   : geometric_grid(c.realify.t_range->first, c.realify.t_range->second, c.realify.samples))
               : default_realify_grid(r.spec, e, c.realify.samples);

  for (std::size_t k = 1; k <= e.order(); ++k) {
    RealifyRow row;
    row.k = k;
    row.mu = e.mu[k - 1];
    if (e.mode == Mode::Exponential) {
      RealSPoly h = to_real_spoly_scaled(e.exp_terms[k - 1], row.mu);
      row.depth = -1;
      row.term = h.empty() ? "0" : "e^(" + fmt_short(-row.mu) + " t)*[" + term_string(h) + "]";
      row.in_class = true;
      for (const auto& [key, z] : h.terms()) row.oscillating = row.oscillating || std::get<1>(key) != 0.0;
      double scale = 0.0, diff = 0.0;
      for (double t : r.grid) {
        const ComplexVec y = e.exp_terms[k - 1].eval(t);
        const RealVec yr = std::exp(-row.mu * t) * h.eval(t);
        r.max_imag_residue = std::max(r.max_imag_residue, y.imag().cwiseAbs().maxCoeff());
        scale = std::max(scale, y.norm());
        diff = std::max(diff, (yr - y.real()).norm());
      }
      if (scale > 0.0) r.max_real_mismatch = std::max(r.max_real_mismatch, diff / scale);
      r.exp_forms.push_back(std::move(h));
    } else {
      RealLogPower q = to_real_logpower(e.log_terms[k - 1]);
      row.depth = q.depth();
      row.term = term_string(q);
      row.in_class = q.in_class(e.m_star, -row.mu);
      row.oscillating = q.has_oscillation();
      double scale = 0.0, diff = 0.0;
      for (double t : r.grid) {
        const ComplexVec y = e.log_terms[k - 1].eval(t);
        const RealVec yr = q.eval(t);
        r.max_imag_residue = std::max(r.max_imag_residue, y.imag().cwiseAbs().maxCoeff());
        scale = std::max(scale, y.norm());
        diff = std::max(diff, (yr - y.real()).norm());
      }
      if (scale > 0.0) r.max_real_mismatch = std::max(r.max_real_mismatch, diff / scale);
      r.log_forms.push_back(std::move(q));
    }
    r.rows.push_back(row);
  }
  r.pass = r.max_imag_residue < kImagResidueLimit &&
           std::all_of(r.rows.begin(), r.rows.end(), [](const RealifyRow& x) { return x.in_class; });
  return r;
}

// ---------------------------------------------------------------------------
// certificate

struct CertificateReport {
  ProblemSpec spec;
  SmallnessCertificate cert;

  Table table() const {
    return {{"field", "value"},
            {{"lambda_1", fmt17(cert.lambda1)},
             {"C_0", fmt17(cert.c0)},
             {"c_star", fmt17(cert.c_star)},
             {"r_star", fmt17(cert.r_star)},
             {"M", fmt17(cert.m)},
             {"eps_0", fmt17(cert.eps0)},
             {"eps_1", fmt17(cert.eps1)},
             {"radii", std::to_string(cert.radii)},
             {"directions", std::to_string(cert.directions)}}};
  }
};

inline CertificateReport cmd_certificate(const RunConfig& c) {
  CertificateReport r{build_problem(c), {}};
  r.cert = smallness_certificate(r.spec, c.certificate.r_star, c.certificate.sample_budget);
  return r;
}

inline Json to_json(const SmallnessCertificate& c) {
  return {{"lambda_1", c.lambda1}, {"C_0", c.c0}, {"c_star", c.c_star}, {"r_star", c.r_star}, {"M", c.m},
          {"eps_0", c.eps0},        {"eps_1", c.eps1}, {"radii", c.radii}, {"directions", c.directions}};
}

inline Json to_json(const DecayFit& f) {
  return {{"exponent", f.exponent}, {"intercept", f.intercept}, {"r2", f.r2},      {"t_a", f.t_a},
          {"t_b", f.t_b},           {"regressor", to_string(f.regressor)}, {"m", f.m}, {"samples", f.samples}};
}

}  // namespace asymptex
