#pragma once

#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"  // nlohmann, vendored

#include "asymptex/core.hpp"
#include "asymptex/exp_poly.hpp"
#include "asymptex/expansion.hpp"
#include "asymptex/log_power.hpp"
#include "asymptex/realify.hpp"

namespace asymptex {

using Json = nlohmann::ordered_json;

/// %.17g: enough digits to round-trip a double.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Short form for tables.
inline std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x == 0.0 ? 0.0 : x);
  return buf;
}

// ---------------------------------------------------------------------------
// Reading with field-path diagnostics

/// A JSON value together with its dotted path, for error messages.
struct JsonField {
  const Json& value;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(path.empty() ? what : path + ": " + what);
  }

  JsonField at(const std::string& key) const {
    if (!value.is_object()) fail("expected an object");
    if (!value.contains(key)) fail("missing field '" + key + "'");
    return {value.at(key), path.empty() ? key : path + "." + key};
  }
  JsonField at(std::size_t i) const { return {value.at(i), path + "[" + std::to_string(i) + "]"}; }
  bool has(const std::string& key) const { return value.is_object() && value.contains(key); }

  /// Rejects keys outside the allowed set.
  void only(std::initializer_list<const char*> allowed) const {
    if (!value.is_object()) fail("expected an object");
    for (const auto& [k, v] : value.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail("unknown field '" + k + "'");
    }
  }

  std::size_t size() const {
    if (!value.is_array()) fail("expected an array");
    return value.size();
  }

  double number() const {
    if (!value.is_number()) fail("expected a number");
    return value.get<double>();
  }
  int integer() const {
    if (!value.is_number_integer()) fail("expected an integer");
    return value.get<int>();
  }
  std::string string() const {
    if (!value.is_string()) fail("expected a string");
    return value.get<std::string>();
  }

  /// A complex number is a JSON number or a pair [re, im].
  Complex complex() const {
    if (value.is_number()) return value.get<double>();
    if (value.is_array() && value.size() == 2 && value[0].is_number() && value[1].is_number()) {
      return {value[0].get<double>(), value[1].get<double>()};
    }
    fail("expected a number or [re, im]");
  }

  ComplexVec complex_vec(Eigen::Index dim = -1) const {
    const auto n = static_cast<Eigen::Index>(size());
    if (dim >= 0 && n != dim) fail("expected " + std::to_string(dim) + " components, got " + std::to_string(n));
    ComplexVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = at(static_cast<std::size_t>(i)).complex();
    return v;
  }

  RealVec real_vec(Eigen::Index dim = -1) const {
    const auto n = static_cast<Eigen::Index>(size());
    if (dim >= 0 && n != dim) fail("expected " + std::to_string(dim) + " components, got " + std::to_string(n));
    RealVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = at(static_cast<std::size_t>(i)).number();
    return v;
  }

  std::vector<double> numbers() const {
    std::vector<double> v;
    for (std::size_t i = 0; i < size(); ++i) v.push_back(at(i).number());
    return v;
  }
};

// ---------------------------------------------------------------------------
// Writing

inline Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json to_json(const ComplexVec& v) {
  Json a = Json::array();
  for (const auto& z : v) a.push_back(to_json(z));
  return a;
}

inline Json to_json(const RealVec& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Json to_json(const ExpPolySum& s) {
  Json terms = Json::array();
  for (const auto& [nu, p] : s.terms()) {
    Json coeffs = Json::array();
    for (const auto& c : p) coeffs.push_back(to_json(c));
    terms.push_back({{"exponent", to_json(nu)}, {"coeffs", coeffs}});
  }
  return {{"type", "exp_poly"}, {"dim", s.dim()}, {"terms", terms}};
}

inline Json to_json(const LogPowerSum& p) {
  Json terms = Json::array();
  for (const auto& [a, xi] : p.terms()) {
    Json alpha = Json::array();
    for (const auto& z : a) alpha.push_back(to_json(z));
    terms.push_back({{"alpha", alpha}, {"xi", to_json(xi)}});
  }
  return {{"type", "log_power"}, {"depth", p.depth()}, {"dim", p.dim()}, {"terms", terms}};
}

inline Json to_json(const RealLogPower& p) {
  Json terms = Json::array();
  for (const auto& [key, xi] : p.terms()) {
    const auto& [alpha, freq, phase] = key;
    Json ph = Json::array();
    for (Phase f : phase) ph.push_back(to_string(f));
    terms.push_back({{"alpha", alpha}, {"freq", freq}, {"phase", ph}, {"xi", to_json(xi)}});
  }
  return {{"type", "real_log_power"}, {"depth", p.depth()}, {"dim", p.dim()}, {"terms", terms}};
}

inline Json to_json(const RealSPoly& s) {
  Json terms = Json::array();
  for (const auto& [key, z] : s.terms()) {
    const auto& [m, w, ph] = key;
    terms.push_back({{"power", m}, {"freq", w}, {"phase", to_string(ph)}, {"z", to_json(z)}});
  }
  return {{"type", "real_s_poly"}, {"dim", s.dim()}, {"terms", terms}};
}

inline Json to_json(const Expansion& e) {
  Json orders = Json::array();
  for (std::size_t k = 1; k <= e.order(); ++k) {
    Json o = {{"k", k}, {"mu", e.mu[k - 1]}, {"depth", e.depth[k - 1]}};
    if (e.mode == Mode::Exponential) {
      o["term"] = to_json(e.exp_terms[k - 1]);
    } else {
      o["term"] = to_json(e.log_terms[k - 1]);
    }
    Json kernel = Json::array();
    for (const auto& b : e.kernels[k - 1]) kernel.push_back(to_json(b));
    o["kernel"] = kernel;
    Json consts = Json::array();
    for (const auto& c : e.free_constants[k - 1]) consts.push_back(to_json(c));
    o["free_constants"] = consts;
    orders.push_back(o);
  }
  return {{"mode", to_string(e.mode)}, {"m_star", e.m_star}, {"orders", orders}, {"notes", e.notes}};
}

// ---------------------------------------------------------------------------
// Reading the same records back

inline Mode mode_from_string(const JsonField& f) {
  const auto s = f.string();
  if (s == "exponential") return Mode::Exponential;
  if (s == "power") return Mode::Power;
  if (s == "log") return Mode::Log;
  f.fail("unknown mode '" + s + "' (expected exponential, power or log)");
}

inline Phase phase_from_string(const JsonField& f) {
  const auto s = f.string();
  if (s == "cos") return Phase::Cos;
  if (s == "sin") return Phase::Sin;
  f.fail("unknown phase '" + s + "' (expected cos or sin)");
}

inline Eigen::Index record_dim(const JsonField& f, Eigen::Index dim) {
  if (!f.has("dim")) {
    if (dim < 1) f.fail("missing field 'dim'");
    return dim;
  }
  const int d = f.at("dim").integer();
  if (d < 1) f.at("dim").fail("must be >= 1");
  if (dim >= 1 && d != dim) f.at("dim").fail("expected " + std::to_string(dim) + ", got " + std::to_string(d));
  return d;
}

inline void check_type(const JsonField& f, const char* type) {
  if (f.has("type") && f.at("type").string() != type) {
    f.at("type").fail("expected '" + std::string(type) + "', got '" + f.at("type").string() + "'");
  }
}

inline ExpPolySum exp_poly_from_json(const JsonField& f, Eigen::Index dim = -1) {
  f.only({"type", "dim", "terms"});
  check_type(f, "exp_poly");
  const auto n = record_dim(f, dim);
  ExpPolySum s(n);
  const auto terms = f.at("terms");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto t = terms.at(i);
    t.only({"exponent", "coeffs"});
    const auto coeffs = t.at("coeffs");
    VecPoly p;
    for (std::size_t m = 0; m < coeffs.size(); ++m) p.push_back(coeffs.at(m).complex_vec(n));
    s.add_term(t.at("exponent").complex(), p);
  }
  return canonicalize_exp(s, {0.0, 0.0});
}

inline LogPowerSum log_power_from_json(const JsonField& f, Eigen::Index dim = -1) {
  f.only({"type", "depth", "dim", "terms"});
  check_type(f, "log_power");
  const auto n = record_dim(f, dim);
  const int depth = f.at("depth").integer();
  if (depth < 0) f.at("depth").fail("must be >= 0");
  LogPowerSum p(depth, n);
  const auto terms = f.at("terms");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto t = terms.at(i);
    t.only({"alpha", "xi"});
    const auto alpha = t.at("alpha");
    if (alpha.size() != static_cast<std::size_t>(depth + 2)) {
      alpha.fail("expected " + std::to_string(depth + 2) + " exponents (z_{-1} .. z_depth)");
    }
    ExponentVector a;
    for (std::size_t j = 0; j < alpha.size(); ++j) a.push_back(alpha.at(j).complex());
    p.add_term(a, t.at("xi").complex_vec(n));
  }
  return canonicalize_logpower(p, {0.0, 0.0});
}

inline RealLogPower real_log_power_from_json(const JsonField& f, Eigen::Index dim = -1) {
  f.only({"type", "depth", "dim", "terms"});
  check_type(f, "real_log_power");
  const auto n = record_dim(f, dim);
  const int depth = f.at("depth").integer();
  if (depth < 0) f.at("depth").fail("must be >= 0");
  RealLogPower p(depth, n);
  const auto terms = f.at("terms");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto t = terms.at(i);
    t.only({"alpha", "freq", "phase", "xi"});
    const auto alpha = t.at("alpha").numbers();
    const auto freq = t.at("freq").numbers();
    std::vector<Phase> phase;
    const auto ph = t.at("phase");
    for (std::size_t j = 0; j < ph.size(); ++j) phase.push_back(phase_from_string(ph.at(j)));
    if (alpha.size() != static_cast<std::size_t>(depth + 2)) t.at("alpha").fail("expected depth + 2 entries");
    if (freq.size() != static_cast<std::size_t>(depth + 1)) t.at("freq").fail("expected depth + 1 entries");
    if (phase.size() != static_cast<std::size_t>(depth + 1)) t.at("phase").fail("expected depth + 1 entries");
    p.add(alpha, freq, phase, t.at("xi").real_vec(n));
  }
  return p;
}

/// Forcing record: exp_poly, log_power, or real_log_power (complexified).
inline std::variant<ExpPolySum, LogPowerSum> forcing_from_json(const JsonField& f, Eigen::Index dim) {
  const auto type = f.at("type").string();
  if (type == "exp_poly") return exp_poly_from_json(f, dim);
  if (type == "log_power") return log_power_from_json(f, dim);
  if (type == "real_log_power") return from_real_logpower(real_log_power_from_json(f, dim));
  f.at("type").fail("unknown forcing type '" + type + "' (expected exp_poly, log_power or real_log_power)");
}

inline Expansion expansion_from_json(const JsonField& f) {
  f.only({"mode", "m_star", "orders", "notes"});
  Expansion e;
  e.mode = mode_from_string(f.at("mode"));
  e.m_star = f.at("m_star").integer();
  const auto orders = f.at("orders");
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const auto o = orders.at(i);
    o.only({"k", "mu", "depth", "term", "kernel", "free_constants"});
    if (o.at("k").integer() != static_cast<int>(i + 1)) o.at("k").fail("orders must be listed 1, 2, ...");
    e.mu.push_back(o.at("mu").number());
    e.depth.push_back(o.at("depth").integer());
    if (e.mode == Mode::Exponential) {
      e.exp_terms.push_back(exp_poly_from_json(o.at("term")));
    } else {
      e.log_terms.push_back(log_power_from_json(o.at("term")));
    }
    std::vector<ExpPolySum> kernel;
    const auto kf = o.at("kernel");
    for (std::size_t j = 0; j < kf.size(); ++j) kernel.push_back(exp_poly_from_json(kf.at(j)));
    e.kernels.push_back(std::move(kernel));
    std::vector<Complex> consts;
    const auto cf = o.at("free_constants");
    for (std::size_t j = 0; j < cf.size(); ++j) consts.push_back(cf.at(j).complex());
    e.free_constants.push_back(std::move(consts));
  }
  if (f.has("notes")) {
    const auto nf = f.at("notes");
    for (std::size_t j = 0; j < nf.size(); ++j) e.notes.push_back(nf.at(j).string());
  }
  return e;
}

// ---------------------------------------------------------------------------
// Human-readable term strings, e.g. "2*t^-2" or "(0, -1)*e^((-1+2i) t)"

inline std::string complex_string(Complex z) {
  if (z.imag() == 0.0) return fmt_short(z.real());
  if (z.real() == 0.0) return fmt_short(z.imag()) + "i";
  const std::string im = fmt_short(std::abs(z.imag()));
  return "(" + fmt_short(z.real()) + (z.imag() < 0 ? "-" : "+") + im + "i)";
}

inline std::string coeff_string(const ComplexVec& v) {
  if (v.size() == 1) return complex_string(v(0));
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + complex_string(v(i));
  return s + ")";
}

inline std::string coeff_string(const RealVec& v) {
  if (v.size() == 1) return fmt_short(v(0));
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_short(v(i));
  return s + ")";
}

/// Name of ladder variable z_j: e^t, t, ln(t), ln(ln(t)), L3(t), ...
inline std::string ladder_name(int j) {
  switch (j) {
    case -1: return "e^t";
    case 0: return "t";
    case 1: return "ln(t)";
    case 2: return "ln(ln(t))";
    default: return "L" + std::to_string(j) + "(t)";
  }
}

inline std::string power_string(int j, Complex a) {
  if (j == -1) return "e^(" + complex_string(a) + " t)";
  if (a == Complex(1.0, 0.0)) return ladder_name(j);
  return ladder_name(j) + "^" + complex_string(a);
}

inline std::string join_product(const std::string& coeff, const std::vector<std::string>& factors) {
  std::string body;
  for (const auto& f : factors) body += (body.empty() ? "" : "*") + f;
  if (body.empty()) return coeff;
  if (coeff == "1") return body;
  if (coeff == "-1") return "-" + body;
  return coeff + "*" + body;
}

inline std::string join_sum(const std::vector<std::string>& parts) {
  if (parts.empty()) return "0";
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : " + ") + p;
  return s;
}

inline std::string term_string(const LogPowerSum& p) {
  std::vector<std::string> parts;
  for (const auto& [a, xi] : p.terms()) {
    std::vector<std::string> f;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[j] != Complex(0.0, 0.0)) f.push_back(power_string(static_cast<int>(j) - 1, a[j]));
    }
    parts.push_back(join_product(coeff_string(xi), f));
  }
  return join_sum(parts);
}

inline std::string term_string(const ExpPolySum& s) {
  std::vector<std::string> parts;
  for (const auto& [nu, p] : s.terms()) {
    for (std::size_t m = 0; m < p.size(); ++m) {
      if (p[m].norm() == 0.0) continue;
      std::vector<std::string> f;
      if (m == 1) f.push_back("t");
      if (m > 1) f.push_back("t^" + std::to_string(m));
      if (nu != Complex(0.0, 0.0)) f.push_back(power_string(-1, nu));
      parts.push_back(join_product(coeff_string(p[m]), f));
    }
  }
  return join_sum(parts);
}

inline std::string term_string(const RealLogPower& p) {
  std::vector<std::string> parts;
  for (const auto& [key, xi] : p.terms()) {
    const auto& [alpha, freq, phase] = key;
    std::vector<std::string> f;
    for (std::size_t j = 0; j < freq.size(); ++j) {
      if (freq[j] == 0.0) continue;
      const std::string arg = freq[j] == 1.0 ? ladder_name(static_cast<int>(j)) : fmt_short(freq[j]) + " " + ladder_name(static_cast<int>(j));
      f.push_back(std::string(to_string(phase[j])) + "(" + arg + ")");
    }
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      if (alpha[j] != 0.0) f.push_back(power_string(static_cast<int>(j) - 1, alpha[j]));
    }
    parts.push_back(join_product(coeff_string(xi), f));
  }
  return join_sum(parts);
}

inline std::string term_string(const RealSPoly& s) {
  std::vector<std::string> parts;
  for (const auto& [key, z] : s.terms()) {
    const auto& [m, w, ph] = key;
    std::vector<std::string> f;
    if (m == 1) f.push_back("t");
    if (m > 1) f.push_back("t^" + std::to_string(m));
    if (w != 0.0) f.push_back(std::string(to_string(ph)) + "(" + (w == 1.0 ? "" : fmt_short(w) + " ") + "t)");
    parts.push_back(join_product(coeff_string(z), f));
  }
  return join_sum(parts);
}

}  // namespace asymptex
