#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "asymptex/core.hpp"
#include "asymptex/multilinear.hpp"
#include "asymptex/numerics/decay.hpp"
#include "asymptex/problem.hpp"
#include "asymptex/serialize.hpp"

namespace asymptex {

struct ProblemConfig {
  ComplexMat a;
  std::vector<MultiLinearMap> nonlinearity;
  std::variant<ExpPolySum, LogPowerSum> forcing;
  Mode mode = Mode::Exponential;
  int m_star = 0;
  std::vector<int> depth_schedule;
};

enum class ConstantsPolicy { Zero, Fit };

struct ExpansionConfig {
  std::size_t order = 1;
  std::optional<std::vector<double>> ladder_base;
  std::optional<double> cutoff;
  ConstantsPolicy resonance = ConstantsPolicy::Zero;
};

struct VerificationConfig {
  bool present = false;
  ComplexVec y0;
  std::pair<double, double> t_span{0.0, 1.0};
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  FitWindow fit_window;
  double margin = 0.1;
  std::size_t samples = 400;
  FitWindow resonance_window;
  std::size_t refine_orders = 0;  // 0: single least-squares pass
};

struct RealifyConfig {
  std::optional<std::pair<double, double>> t_range;
  std::size_t samples = 60;
};

struct CertificateConfig {
  double r_star = 1.0;
  std::size_t sample_budget = 16 * 1024;
};

struct OutputConfig {
  std::string dir = ".";
  std::string format = "txt";
};

struct RunConfig {
  ProblemConfig problem;
  ExpansionConfig expansion;
  VerificationConfig verification;
  RealifyConfig realify;
  CertificateConfig certificate;
  OutputConfig output;
};

namespace detail {

inline std::size_t positive_count(const JsonField& f) {
  const int v = f.integer();
  if (v < 1) f.fail("must be >= 1");
  return static_cast<std::size_t>(v);
}

inline std::pair<double, double> interval(const JsonField& f) {
  if (f.size() != 2) f.fail("expected [a, b]");
  const double a = f.at(std::size_t{0}).number(), b = f.at(std::size_t{1}).number();
  if (!(b > a)) f.fail("expected a < b");
  return {a, b};
}

inline FitWindow window(const JsonField& f) {
  const auto [a, b] = interval(f);
  return {a, b};
}

inline ComplexMat matrix(const JsonField& f) {
  const std::size_t n = f.size();
  if (n == 0) f.fail("matrix must be nonempty");
  ComplexMat a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = f.at(i);
    if (row.size() != n) row.fail("expected " + std::to_string(n) + " entries (square matrix)");
    for (std::size_t j = 0; j < n; ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row.at(j).complex();
    }
  }
  return a;
}

inline std::vector<MultiLinearMap> nonlinearity(const JsonField& f, int dim) {
  std::vector<MultiLinearMap> out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto g = f.at(i);
    g.only({"arity", "entries"});
    const int arity = g.at("arity").integer();
    if (arity < 2) g.at("arity").fail("must be >= 2");
    MultiLinearMap map(arity, dim);
    const auto entries = g.at("entries");
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto en = entries.at(e);
      en.only({"out", "in", "value"});
      std::vector<int> in;
      const auto inf = en.at("in");
      for (std::size_t l = 0; l < inf.size(); ++l) in.push_back(inf.at(l).integer());
      try {
        map.add(en.at("out").integer(), in, en.at("value").complex());
      } catch (const ValidationError& err) {
        en.fail(err.what());
      }
    }
    out.push_back(std::move(map));
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_config(const Json& j) {
  const JsonField root{j, ""};
  root.only({"problem", "expansion", "verification", "realify", "certificate", "output"});
  RunConfig c;

  const auto p = root.at("problem");
  p.only({"A", "nonlinearity", "forcing", "mode", "m_star", "depth_schedule"});
  c.problem.a = detail::matrix(p.at("A"));
  const auto n = c.problem.a.rows();
  if (p.has("nonlinearity")) c.problem.nonlinearity = detail::nonlinearity(p.at("nonlinearity"), static_cast<int>(n));
  c.problem.mode = mode_from_string(p.at("mode"));
  c.problem.m_star = p.has("m_star") ? p.at("m_star").integer() : 0;
  if (c.problem.m_star < 0) p.at("m_star").fail("must be >= 0");
  c.problem.forcing = forcing_from_json(p.at("forcing"), n);
  if (p.has("depth_schedule")) {
    const auto ds = p.at("depth_schedule");
    for (std::size_t i = 0; i < ds.size(); ++i) c.problem.depth_schedule.push_back(ds.at(i).integer());
  }

  if (root.has("expansion")) {
    const auto e = root.at("expansion");
    e.only({"order", "ladder_base", "cutoff", "resonance"});
    if (e.has("order")) c.expansion.order = detail::positive_count(e.at("order"));
    if (e.has("ladder_base")) c.expansion.ladder_base = e.at("ladder_base").numbers();
    if (e.has("cutoff")) c.expansion.cutoff = e.at("cutoff").number();
    if (e.has("resonance")) {
      const auto r = e.at("resonance").string();
      if (r == "zero") {
        c.expansion.resonance = ConstantsPolicy::Zero;
      } else if (r == "fit") {
        c.expansion.resonance = ConstantsPolicy::Fit;
      } else {
        e.at("resonance").fail("expected 'zero' or 'fit'");
      }
    }
  }

  if (root.has("verification")) {
    const auto v = root.at("verification");
    v.only({"y0", "t_span", "rel_tol", "abs_tol", "fit_window", "margin", "samples", "resonance_window",
            "refine_orders"});
    auto& vc = c.verification;
    vc.present = true;
    vc.y0 = v.at("y0").complex_vec(n);
    vc.t_span = detail::interval(v.at("t_span"));
    if (v.has("rel_tol")) vc.rel_tol = v.at("rel_tol").number();
    if (v.has("abs_tol")) vc.abs_tol = v.at("abs_tol").number();
    if (v.has("fit_window")) vc.fit_window = detail::window(v.at("fit_window"));
    if (v.has("margin")) vc.margin = v.at("margin").number();
    if (v.has("samples")) vc.samples = detail::positive_count(v.at("samples"));
    if (v.has("resonance_window")) vc.resonance_window = detail::window(v.at("resonance_window"));
    if (v.has("refine_orders")) {
      const int r = v.at("refine_orders").integer();
      if (r < 0) v.at("refine_orders").fail("must be >= 0");
      vc.refine_orders = static_cast<std::size_t>(r);
    }
  }

  if (root.has("realify")) {
    const auto r = root.at("realify");
    r.only({"t_range", "samples"});
    if (r.has("t_range")) c.realify.t_range = detail::interval(r.at("t_range"));
    if (r.has("samples")) c.realify.samples = detail::positive_count(r.at("samples"));
  }

  if (root.has("certificate")) {
    const auto r = root.at("certificate");
    r.only({"r_star", "sample_budget"});
    if (r.has("r_star")) c.certificate.r_star = r.at("r_star").number();
    if (r.has("sample_budget")) c.certificate.sample_budget = detail::positive_count(r.at("sample_budget"));
  }

  if (root.has("output")) {
    const auto o = root.at("output");
    o.only({"dir", "format"});
    if (o.has("dir")) c.output.dir = o.at("dir").string();
    if (o.has("format")) {
      c.output.format = o.at("format").string();
      if (c.output.format != "txt" && c.output.format != "csv") o.at("format").fail("expected 'txt' or 'csv'");
    }
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Problem for the configured order (or an explicit one), validated.
inline ProblemSpec build_problem(const RunConfig& c, std::optional<std::size_t> order = std::nullopt) {
  const auto& p = c.problem;
  ProblemSpec spec = make_problem(p.a, p.nonlinearity, p.forcing, p.mode, p.m_star, order.value_or(c.expansion.order),
                                  c.expansion.ladder_base, c.expansion.cutoff);
  spec.depth_schedule = p.depth_schedule;
  validate(spec);
  return spec;
}

}  // namespace asymptex
