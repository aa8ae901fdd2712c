// asymptex_cli: expand / verify / realify / certificate driven by a JSON config.
//
// Exit codes: 0 ok, 1 verification or realify check failed, 2 invalid input
// (config, validation, domain), 3 anything else.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "asymptex/commands.hpp"

namespace fs = std::filesystem;
using namespace asymptex;

namespace {

struct Options {
  std::string config;
  std::optional<std::size_t> order;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

RunConfig prepare(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.order) {
    if (*o.order < 1) throw ValidationError("--order: must be >= 1");
    c.expansion.order = *o.order;
  }
  if (o.out) c.output.dir = *o.out;
  if (o.format) c.output.format = *o.format;
  return c;
}

std::string ext(const RunConfig& c) { return c.output.format == "csv" ? ".csv" : ".txt"; }

int run_expand(const RunConfig& c) {
  const auto r = cmd_expand(c);
  const fs::path dir = c.output.dir;
  Json j = to_json(r.expansion);
  write_file(dir / "expansion.json", j.dump(2) + "\n");
  const std::string table = r.table.render(c.output.format);
  write_file(dir / ("expansion" + ext(c)), table);
  std::cout << table;
  return 0;
}

int run_verify(const RunConfig& c) {
  const auto r = cmd_verify(c);
  const fs::path dir = c.output.dir;
  write_file(dir / "remainder.csv", r.remainder_csv());
  write_file(dir / "expansion.json", to_json(r.expansion).dump(2) + "\n");
  Json fits = Json::array();
  for (const auto& row : r.rows) {
    Json f = to_json(row.fit);
    f["N"] = row.n;
    f["target_mu"] = row.target;
    f["pass"] = row.pass;
    fits.push_back(f);
  }
  Json res = Json::array();
  for (const auto& rr : r.resonance) {
    Json consts = Json::array();
    for (const auto& z : rr.fit.constants) consts.push_back(to_json(z));
    Json rel = Json::array();
    for (double u : rr.fit.relative_uncertainty) rel.push_back(u);
    Json item;
    item["k"] = rr.k;
    item["constants"] = consts;
    item["relative_uncertainty"] = rel;
    item["condition"] = rr.fit.condition;
    item["residual_rms"] = rr.fit.residual_rms;
    item["iterations"] = rr.fit.iterations;
    res.push_back(item);
  }
  write_file(dir / "verify.json", Json{{"pass", r.pass}, {"fits", fits}, {"resonance", res}}.dump(2) + "\n");
  const std::string table = r.table().render(c.output.format);
  write_file(dir / ("verify" + ext(c)), table);
  std::cout << table;
  for (const auto& rr : r.resonance) {
    std::cout << "resonant constants at k=" << rr.k << ":";
    for (std::size_t i = 0; i < rr.fit.constants.size(); ++i) {
      std::cout << " " << complex_string(rr.fit.constants[i]) << " (rel. uncertainty "
                << fmt_short(rr.fit.relative_uncertainty[i]) << ")";
    }
    std::cout << "\n";
  }
  std::cout << (r.pass ? "verify: pass" : "verify: FAIL") << "\n";
  return r.pass ? 0 : 1;
}

int run_realify(const RunConfig& c) {
  const auto r = cmd_realify(c);
  const fs::path dir = c.output.dir;
  Json forms = Json::array();
  for (const auto& q : r.log_forms) forms.push_back(to_json(q));
  for (const auto& h : r.exp_forms) forms.push_back(to_json(h));
  write_file(dir / "realify.json", Json{{"pass", r.pass},
                                        {"max_imag_residue", r.max_imag_residue},
                                        {"max_real_mismatch", r.max_real_mismatch},
                                        {"orders", forms}}
                                           .dump(2) +
                                       "\n");
  const std::string table = r.table().render(c.output.format);
  write_file(dir / ("realify" + ext(c)), table);
  std::cout << table << "max imaginary residue " << fmt_short(r.max_imag_residue) << ", real-form mismatch "
            << fmt_short(r.max_real_mismatch) << "\n"
            << (r.pass ? "realify: pass" : "realify: FAIL") << "\n";
  return r.pass ? 0 : 1;
}

int run_certificate(const RunConfig& c) {
  const auto r = cmd_certificate(c);
  const fs::path dir = c.output.dir;
  write_file(dir / "certificate.json", to_json(r.cert).dump(2) + "\n");
  const std::string table = r.table().render(c.output.format);
  write_file(dir / ("certificate" + ext(c)), table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymptotic expansions for y' = -Ay + G(y) + f(t)"};
  app.require_subcommand(1);
  Options opt;
  auto add = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--order", opt.order, "expansion order N");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--format", opt.format, "table format")->check(CLI::IsMember({"csv", "txt"}));
    return sub;
  };
  auto* expand_cmd = add("expand", "compute y_1..y_N and print the per-order table");
  auto* verify_cmd = add("verify", "integrate numerically and fit remainder decay");
  auto* realify_cmd = add("realify", "rewrite the expansion in real form");
  auto* cert_cmd = add("certificate", "smallness constants for the containment argument");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig c = prepare(opt);
    if (expand_cmd->parsed()) return run_expand(c);
    if (verify_cmd->parsed()) return run_verify(c);
    if (realify_cmd->parsed()) return run_realify(c);
    if (cert_cmd->parsed()) return run_certificate(c);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
