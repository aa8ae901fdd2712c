#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "asymptex/commands.hpp"

using namespace asymptex;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = ASYMPTEX_CONFIG_DIR;
const std::string kCli = ASYMPTEX_CLI_PATH;

RunConfig config(const std::string& name) { return load_config(kConfigDir + "/" + name + ".json"); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("asymptex_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

// A minimal valid scalar config; tests splice one defect into it.
std::string scalar_config(const std::string& problem_extra = "", const std::string& tail = "") {
  return R"({"problem": {"A": [[1]], "mode": "exponential",
             "forcing": {"type": "exp_poly", "terms": [{"exponent": -0.5, "coeffs": [[1]]}]})" +
         problem_extra + "}" + tail + "}";
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(ConfigParse, ValidMinimal) {
  const auto c = parse_config_text(scalar_config());
  EXPECT_EQ(c.problem.a.rows(), 1);
  EXPECT_EQ(c.expansion.order, 1u);
  EXPECT_FALSE(c.verification.present);
  EXPECT_EQ(c.output.format, "txt");
}

TEST(ConfigParse, ComplexEntriesAsPairs) {
  const auto c = parse_config_text(R"({"problem": {"A": [[[1, 2]]], "mode": "exponential",
      "forcing": {"type": "exp_poly", "terms": [{"exponent": [-1, 3], "coeffs": [[[0, -1]]]}]}}})");
  EXPECT_EQ(c.problem.a(0, 0), Complex(1, 2));
  const auto& f = std::get<ExpPolySum>(c.problem.forcing);
  ASSERT_EQ(f.terms().size(), 1u);
  EXPECT_EQ(f.terms().begin()->first, Complex(-1, 3));
  EXPECT_EQ(f.terms().begin()->second[0](0), Complex(0, -1));
}

TEST(ConfigParse, UnknownFieldsRejectedWithPath) {
  EXPECT_EQ(error_of(scalar_config("", R"(, "extra": 1)")), "unknown field 'extra'");
  EXPECT_EQ(error_of(scalar_config(R"(, "colour": "red")")), "problem: unknown field 'colour'");
  EXPECT_EQ(error_of(R"({"problem": {"A": [[1]], "mode": "exponential",
      "forcing": {"type": "exp_poly", "terms": [{"exponent": -1, "coeffs": [[1]], "x": 0}]}}})"),
            "problem.forcing.terms[0]: unknown field 'x'");
}

TEST(ConfigParse, FieldPathDiagnostics) {
  EXPECT_EQ(error_of(R"({"problem": {"A": [[1, 2]], "mode": "power",
      "forcing": {"type": "log_power", "depth": 0, "terms": []}}})"),
            "problem.A[0]: expected 1 entries (square matrix)");
  EXPECT_EQ(error_of(R"({"problem": {"A": [[1]], "forcing": {"type": "exp_poly", "terms": []}}})"),
            "problem: missing field 'mode'");
  EXPECT_EQ(error_of(scalar_config("", R"(, "expansion": {"order": 0})")), "expansion.order: must be >= 1");
  EXPECT_EQ(error_of(scalar_config("", R"(, "expansion": {"resonance": "guess"})")),
            "expansion.resonance: expected 'zero' or 'fit'");
  EXPECT_EQ(error_of(scalar_config("", R"(, "verification": {"y0": [0, 0], "t_span": [0, 1]})")),
            "verification.y0: expected 1 components, got 2");
  EXPECT_EQ(error_of(scalar_config("", R"(, "verification": {"y0": [0], "t_span": [3, 1]})")),
            "verification.t_span: expected a < b");
  EXPECT_EQ(error_of(R"({"problem": {"A": [[1]], "mode": "power",
      "forcing": {"type": "log_power", "depth": 0, "terms": [{"alpha": [0], "xi": [1]}]}}})"),
            "problem.forcing.terms[0].alpha: expected 2 exponents (z_{-1} .. z_depth)");
  EXPECT_EQ(error_of(R"({"problem": {"A": [[1]], "mode": "exponential", "forcing": {"type": "spline"}}})"),
            "problem.forcing.type: unknown forcing type 'spline' (expected exp_poly, log_power or real_log_power)");
  EXPECT_NE(error_of("{not json").find("config is not valid JSON"), std::string::npos);
}

TEST(ConfigParse, NonlinearityEntriesChecked) {
  const auto msg = error_of(scalar_config(R"(, "nonlinearity": [{"arity": 2, "entries": [{"out": 3, "in": [0, 0], "value": 1}]}])"));
  EXPECT_EQ(msg.rfind("problem.nonlinearity[0].entries[0]: ", 0), 0u) << msg;
}

TEST(CmdExpand, RiccatiTable) {
  const auto r = cmd_expand(config("riccati_power"));
  ASSERT_EQ(r.table.rows.size(), 2u);
  EXPECT_EQ(r.table.rows[0][0], "1");
  EXPECT_EQ(r.table.rows[0][3], "t^-1");
  EXPECT_EQ(r.table.rows[1][0], "2");
  EXPECT_EQ(r.table.rows[1][3], "2*t^-2");
  EXPECT_EQ(r.table.rows[1][5], "yes");
}

TEST(CmdExpand, ZeroForcingAllZero) {
  auto c = config("certificate");
  c.expansion.order = 3;
  const auto r = cmd_expand(c);
  ASSERT_EQ(r.table.rows.size(), 3u);
  for (const auto& row : r.table.rows) EXPECT_EQ(row[3], "0");
}

TEST(CmdExpand, ComplexTermString) {
  // forcing c e^{nu t} with c = (A + nu) (0, -1), so y_1 = (0, -1) e^{nu t}; nu = -1 + 2i
  auto c = parse_config_text(R"({"problem": {"A": [[1, 1], [0, 2]], "mode": "exponential",
      "forcing": {"type": "exp_poly", "terms": [{"exponent": [-1, 2], "coeffs": [[-1, [-1, -2]]]}]}}})");
  const auto r = cmd_expand(c);
  ASSERT_EQ(r.table.rows.size(), 1u);
  EXPECT_EQ(r.table.rows[0][3], "(0, -1)*e^((-1+2i) t)");
}

TEST(CmdExpand, MissingSpectrumInBase) {
  // Re sigma(A) = 1.3 is below the cutoff 2 but not generated by {1}
  auto c = parse_config_text(R"({"problem": {"A": [[1.3]], "mode": "exponential",
      "forcing": {"type": "exp_poly", "terms": [{"exponent": -1, "coeffs": [[1]]}]}},
      "expansion": {"ladder_base": [1], "order": 2}})");
  try {
    cmd_expand(c);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("the base must contain every Re sigma(A)"), std::string::npos) << e.what();
  }
}

TEST(CmdVerify, RiccatiPasses) {
  const auto r = cmd_verify(config("riccati_power"));
  ASSERT_EQ(r.rows.size(), 3u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.pass) << "N=" << row.n;
    EXPECT_GT(row.fit.r2, 0.99);
  }
  EXPECT_GE(r.rows[1].fit.exponent, 0.9);
  EXPECT_GE(r.rows[2].fit.exponent, 1.9);
  EXPECT_TRUE(r.pass);
}

TEST(CmdVerify, WrongTermFailsAtThatOrder) {
  const auto c = config("riccati_power");
  Expansion e = expand(build_problem(c));
  // Spurious t^-1.5 in y_2: r_2 then decays only like t^-1.5.
  e.log_terms[1] += LogPowerSum::scalar({0.0, -1.5}, 1.0);
  const auto r = verify_expansion(c, e);
  EXPECT_TRUE(r.rows[0].pass);
  EXPECT_TRUE(r.rows[1].pass);
  EXPECT_FALSE(r.rows[2].pass);
  EXPECT_NEAR(r.rows[2].fit.exponent, 1.5, 0.05);
  EXPECT_FALSE(r.pass);
}

TEST(CmdVerify, WrongCoefficientSitsOnTheBoundary) {
  // 3 t^-2 instead of 2 t^-2 leaves r_2 ~ t^-2 = t^-mu_2: the verdict cannot
  // tell it from a correct term, but the fitted exponent drops by one.
  const auto c = config("riccati_power");
  Expansion e = expand(build_problem(c));
  e.log_terms[1] = LogPowerSum::scalar({0.0, -2.0}, 3.0);
  const auto r = verify_expansion(c, e);
  EXPECT_NEAR(r.rows[2].fit.exponent, 2.0, 0.05);
  EXPECT_LT(r.rows[2].fit.exponent, cmd_verify(c).rows[2].fit.exponent - 0.9);
}

TEST(CmdVerify, OrderZeroFitsNormAgainstMu1) {
  auto c = config("decaying_exponential");
  const auto r = cmd_verify(c);
  ASSERT_GE(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].n, 0u);
  EXPECT_DOUBLE_EQ(r.rows[0].target, 0.5);
  EXPECT_NEAR(r.rows[0].fit.exponent, 0.5, 0.02);
  EXPECT_TRUE(r.rows[0].pass);
}

TEST(CmdVerify, ResonanceConstantFitted) {
  const auto r = cmd_verify(config("resonance"));
  ASSERT_EQ(r.resonance.size(), 1u);
  EXPECT_EQ(r.resonance[0].k, 2u);
  EXPECT_NEAR(r.resonance[0].fit.constants[0].real(), -1.70721884858253, 1e-8);
  EXPECT_GT(r.rows[2].fit.exponent, 2.2);
  EXPECT_TRUE(r.pass);
}

TEST(CmdVerify, MissingSectionAndDomain) {
  EXPECT_THROW(cmd_verify(config("certificate")), ValidationError);
  auto c = config("riccati_power");
  c.verification.t_span = {0.5, 10.0};  // expansion in t^-k needs t > 1 at depth 0
  EXPECT_THROW(cmd_verify(c), ValidationError);
}

TEST(CmdVerify, RemainderCsvShape) {
  auto c = config("riccati_power");
  c.verification.samples = 20;
  const auto r = cmd_verify(c);
  const std::string csv = r.remainder_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,y0_re,y0_im,r0,r1,r2");
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 3), "10,");
}

TEST(CmdRealify, RealForcingHasNoTrig) {
  const auto r = cmd_realify(config("riccati_power"));
  for (const auto& row : r.rows) {
    EXPECT_FALSE(row.oscillating);
    EXPECT_EQ(row.term.find("cos"), std::string::npos);
    EXPECT_EQ(row.term.find("sin"), std::string::npos);
  }
  EXPECT_LT(r.max_imag_residue, 1e-11);
  EXPECT_TRUE(r.pass);
}

TEST(CmdRealify, AsymmetricForcingRejected) {
  auto c = parse_config_text(R"({"problem": {"A": [[1]], "mode": "exponential",
      "forcing": {"type": "exp_poly", "terms": [{"exponent": [-1, 2], "coeffs": [[1]]}]}}})");
  try {
    cmd_realify(c);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("not conjugation-symmetric"), std::string::npos) << msg;
    EXPECT_NE(msg.find("e^((-1+2i) t)"), std::string::npos) << msg;
  }
}

TEST(CmdRealify, ComplexMatrixRejected) {
  auto c = parse_config_text(R"({"problem": {"A": [[[1, 1]]], "mode": "exponential",
      "forcing": {"type": "exp_poly", "terms": []}}})");
  EXPECT_THROW(cmd_realify(c), ValidationError);
}

TEST(CmdRealify, OscillatingPowerShape) {
  // cos(t) ln(t) (ln ln t)^(-1/3) t^-1 (1, 1): terms q_k(t) / t^(k) built from cos/sin of t.
  const auto r = cmd_realify(config("oscillating_power"));
  ASSERT_EQ(r.rows.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(r.rows[k].mu, static_cast<double>(k + 1));
    EXPECT_TRUE(r.rows[k].in_class);
    EXPECT_TRUE(r.rows[k].oscillating);
    EXPECT_NE(r.rows[k].term.find("t^-" + std::to_string(k + 1)), std::string::npos);
  }
  EXPECT_NE(r.rows[0].term.find("cos(t)"), std::string::npos);
  EXPECT_NE(r.rows[0].term.find("sin(t)"), std::string::npos);
  EXPECT_LT(r.max_imag_residue, 1e-11);
  EXPECT_LT(r.max_real_mismatch, 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(CmdRealify, OscillatingLogOrders) {
  const auto r = cmd_realify(config("oscillating_log"));
  ASSERT_EQ(r.rows.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(r.rows[k].mu, 0.5 * static_cast<double>(k + 1));
    EXPECT_TRUE(r.rows[k].in_class);
  }
  EXPECT_LT(r.max_imag_residue, 1e-11);
  EXPECT_TRUE(r.pass);
}

TEST(CmdCertificate, ScalarSquare) {
  const auto r = cmd_certificate(config("certificate"));
  EXPECT_EQ(r.cert.c_star, 1.0);
  EXPECT_DOUBLE_EQ(r.cert.m, 1.0 / 12.0);
  EXPECT_DOUBLE_EQ(r.cert.eps0, 1.0 / 72.0);
  EXPECT_DOUBLE_EQ(r.cert.eps1, 1.0 / 144.0);
}

TEST(Serialization, ExpansionRoundTrip) {
  for (const char* name : {"riccati_power", "oscillating_log", "oscillating_power", "resonance"}) {
    const auto c = config(name);
    const Expansion e = expand(build_problem(c));
    const Json j = Json::parse(to_json(e).dump());
    const Expansion back = expansion_from_json(JsonField{j, "expansion"});
    ASSERT_EQ(back.order(), e.order()) << name;
    const double t0 = std::max(20.0, 2.0 * e.domain_start(e.order()));
    for (double t : geometric_grid(t0, 1e9, 25)) {
      for (std::size_t k = 1; k <= e.order(); ++k) {
        const ComplexVec a = e.term_value(k, t), b = back.term_value(k, t);
        EXPECT_LE((a - b).norm(), 1e-15 * std::max(a.norm(), 1e-300)) << name << " k=" << k << " t=" << t;
      }
    }
  }
}

TEST(Determinism, ByteIdenticalOutputs) {
  for (const std::string cmd : {"expand", "verify"}) {
    const auto a = scratch(cmd + "_a"), b = scratch(cmd + "_b");
    const std::string base = cmd + " --config " + kConfigDir + "/riccati_power.json --format csv --out ";
    ASSERT_EQ(run_cli(base + a.string(), a / "log"), 0);
    ASSERT_EQ(run_cli(base + b.string(), b / "log"), 0);
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto name = entry.path().filename();
      EXPECT_EQ(read_file(a / name), read_file(b / name)) << cmd << " " << name;
    }
  }
  const auto c = config("oscillating_log");
  EXPECT_EQ(cmd_certificate(c).table().csv(), cmd_certificate(c).table().csv());
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("exit");
  EXPECT_EQ(run_cli("expand --config " + kConfigDir + "/riccati_power.json --out " + dir.string(), dir / "log"), 0);
  EXPECT_TRUE(fs::exists(dir / "expansion.json"));
  EXPECT_TRUE(fs::exists(dir / "expansion.txt"));

  // verification failure: demand more than the truth via the margin
  std::ifstream in(kConfigDir + "/riccati_power.json");
  Json j = Json::parse(in);
  j["verification"]["margin"] = -0.5;
  j["verification"]["samples"] = 100;
  std::ofstream(dir / "strict.json") << j.dump();
  EXPECT_EQ(run_cli("verify --config " + (dir / "strict.json").string() + " --out " + dir.string(), dir / "log"), 1);
  EXPECT_NE(read_file(dir / "log").find("verify: FAIL"), std::string::npos);

  std::ofstream(dir / "bad.json") << R"({"problem": {"A": [[-1]], "mode": "exponential",
      "forcing": {"type": "exp_poly", "terms": []}}})";
  EXPECT_EQ(run_cli("expand --config " + (dir / "bad.json").string() + " --out " + dir.string(), dir / "log"), 2);
  EXPECT_NE(read_file(dir / "log").find("positive real parts"), std::string::npos);

  EXPECT_EQ(run_cli("expand --config " + (dir / "missing.json").string(), dir / "log"), 2);
  EXPECT_EQ(run_cli("expand --config " + kConfigDir + "/riccati_power.json --format xml", dir / "log"), 2);
  EXPECT_EQ(run_cli("", dir / "log"), 2);

  // integration failure is a runtime error carrying the failure time
  j["verification"]["y0"] = Json::array({50.0});
  j["verification"]["margin"] = 0.1;
  std::ofstream(dir / "blowup.json") << j.dump();
  EXPECT_EQ(run_cli("verify --config " + (dir / "blowup.json").string() + " --out " + dir.string(), dir / "log"), 3);
  EXPECT_NE(read_file(dir / "log").find("at t = 10.0"), std::string::npos) << read_file(dir / "log");
}

TEST(Cli, OrderOverrideAndFormat) {
  const auto dir = scratch("order");
  ASSERT_EQ(run_cli("expand --config " + kConfigDir + "/riccati_power.json --order 4 --format csv --out " +
                        dir.string(),
                    dir / "log"),
            0);
  const std::string csv = read_file(dir / "expansion.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "k,mu_k,depth,term,class,in_class,kernel,free_constants");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("\"P_0(0, -4)\""), std::string::npos);
}
