#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "asymptex/exp_poly.hpp"
#include "asymptex/iterated_log.hpp"
#include "asymptex/log_power.hpp"
#include "asymptex/resolvent.hpp"
#include "test_util.hpp"

using namespace asymptex;
using testutil::vec1;

namespace {

ExpPolySum scal(Complex nu, std::vector<Complex> c) { return ExpPolySum::scalar(nu, std::move(c)); }

// The exact derivative identity z' + A z - f, canonicalized relative to its operands.
ExpPolySum resolvent_residual(const ComplexMat& a, const ExpPolySum& z, const ExpPolySum& f) {
  ExpPolySum lhs = derivative_exp(z) + z.apply_matrix(a);
  const double scale = std::max({lhs.max_coeff_norm(), f.max_coeff_norm(), 1e-300});
  return canonicalize_exp(lhs - f, {1e-13, 1e-12 * scale});
}

}  // namespace

// ---- canonicalize_exp ----

TEST(CanonicalizeExp, CancellationGivesEmptySum) {
  auto s = scal(-1.0, {1.0}) + scal(-1.0, {-1.0});
  EXPECT_TRUE(canonicalize_exp(s).empty());
}

TEST(CanonicalizeExp, CoefficientwiseMerge) {
  auto s = canonicalize_exp(scal(-1.0, {0.0, 2.0}) + scal(-1.0, {3.0, 0.0}));
  ASSERT_EQ(s.size(), 1u);
  const auto& p = s.terms().begin()->second;
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0](0), Complex(3.0));
  EXPECT_EQ(p[1](0), Complex(2.0));
}

TEST(CanonicalizeExp, IdempotentOnRandomSums) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    auto s = testutil::rand_exp(rng, 2, 4) + testutil::rand_exp(rng, 2, 3);
    auto once = canonicalize_exp(s);
    EXPECT_TRUE(canonicalize_exp(once) == once);
    for (double t : {0.0, 0.7, 2.5}) EXPECT_LT(testutil::rel_err(once.eval(t), s.eval(t)), 1e-12);
  }
}

TEST(CanonicalizeExp, TrimsTinyCoefficientsRelativeToTerm) {
  auto s = canonicalize_exp(scal(-1.0, {1.0, 1e-15}));
  EXPECT_EQ(s.terms().begin()->second.size(), 1u);
}

TEST(CanonicalizeExp, SnapsNearlyEqualExponents) {
  auto s = scal(Complex(-1.0, 0.0), {1.0}) + scal(Complex(-1.0 + 1e-14, 0.0), {1.0});
  EXPECT_EQ(canonicalize_exp(s).size(), 1u);
}

// ---- eval_exp ----

TEST(EvalExp, Constant) { EXPECT_EQ(scal(0.0, {1.0}).eval(5.0)(0), Complex(1.0)); }

TEST(EvalExp, TTimesDecay) {
  EXPECT_NEAR(scal(-1.0, {0.0, 1.0}).eval(1.0)(0).real(), std::exp(-1.0), 1e-15);
}

TEST(EvalExp, Euler) {
  auto v = scal(Complex(0.0, 1.0), {1.0}).eval(std::numbers::pi)(0);
  EXPECT_NEAR(v.real(), -1.0, 1e-15);
  EXPECT_NEAR(v.imag(), 0.0, 1e-15);
}

// ---- mul_apply_exp ----

TEST(MulApplyExp, ProductOfDecays) {
  auto g = scalar_power_map(2);
  auto r = mul_apply_exp(g, {scal(-1.0, {1.0}), scal(-1.0, {1.0})});
  EXPECT_TRUE(r == scal(-2.0, {1.0}));
}

TEST(MulApplyExp, ExponentAndDegreeAdd) {
  auto g = scalar_power_map(2);
  auto r = mul_apply_exp(g, {scal(-1.0, {0.0, 1.0}), scal(-2.0, {1.0})});
  EXPECT_TRUE(r == scal(-3.0, {0.0, 1.0}));
}

TEST(MulApplyExp, ArityMismatchThrows) {
  auto g = scalar_power_map(2);
  EXPECT_THROW(mul_apply_exp(g, {scal(-1.0, {1.0})}), ValidationError);
}

TEST(MulApplyExp, PointwiseOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = testutil::rand_map(rng, 2, 3, 6);
    auto a = testutil::rand_exp(rng, 3), b = testutil::rand_exp(rng, 3);
    auto r = mul_apply_exp(g, {a, b});
    for (int i = 0; i < 20; ++i) {
      const double t = 0.15 * i;
      EXPECT_LT(testutil::rel_err(r.eval(t), g.apply({a.eval(t), b.eval(t)})), 1e-12);
    }
  }
}

TEST(MulApplyExp, ClassOfProduct) {
  auto g = scalar_power_map(3);
  auto a = scal(Complex(-1.0, 2.0), {1.0, 1.0}) + scal(Complex(-1.0, -2.0), {1.0});
  auto r = mul_apply_exp(g, {a, a, scal(-0.5, {1.0})});
  EXPECT_TRUE(r.in_class(-2.5));
}

// ---- resolvent_solve_exp ----

TEST(Resolvent, NonResonantScalar) {
  ComplexMat a(1, 1);
  a << 2.0;
  auto r = resolvent_solve_exp(a, scal(-1.0, {1.0}));
  EXPECT_TRUE(same_terms(r.z, scal(-1.0, {1.0})));
  EXPECT_TRUE(r.resonant_modes.empty());
}

TEST(Resolvent, ResonantScalarBumpsDegree) {
  ComplexMat a(1, 1);
  a << 1.0;
  auto r = resolvent_solve_exp(a, scal(-1.0, {1.0}));
  EXPECT_TRUE(same_terms(r.z, scal(-1.0, {0.0, 1.0})));
  ASSERT_EQ(r.resonant_modes.size(), 1u);
  EXPECT_TRUE(same_terms(r.resonant_modes[0], scal(-1.0, {1.0})));
}

TEST(Resolvent, RotationBlock) {
  ComplexMat a(2, 2);
  a << 1.0, -1.0, 1.0, 1.0;
  ComplexVec e0(2), expect(2);
  e0 << 1.0, 0.0;
  expect << 0.0, -1.0;
  auto f = ExpPolySum::monomial(-1.0, {e0});
  auto r = resolvent_solve_exp(a, f);
  EXPECT_TRUE(same_terms(r.z, ExpPolySum::monomial(-1.0, {expect})));
  EXPECT_TRUE(resolvent_residual(a, r.z, f).empty());
}

TEST(Resolvent, JordanBlockResonance) {
  // A = [[1,1],[0,1]] at nu = -1: needs the degree raised by two.
  ComplexMat a(2, 2);
  a << 1.0, 1.0, 0.0, 1.0;
  ComplexVec e1(2);
  e1 << 0.0, 1.0;
  auto f = ExpPolySum::monomial(-1.0, {e1});
  auto r = resolvent_solve_exp(a, f);
  EXPECT_TRUE(resolvent_residual(a, r.z, f).empty());
  EXPECT_EQ(r.z.max_degree(), 2u);
  EXPECT_EQ(r.resonant_modes.size(), 2u);
  for (const auto& m : r.resonant_modes) EXPECT_TRUE(resolvent_residual(a, m, ExpPolySum(2)).empty());
}

TEST(Resolvent, IdentityOnRandomProblems) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 1 + trial % 4;
    ComplexMat a = testutil::rand_stable(rng, n);
    auto f = testutil::rand_exp(rng, n, 3, 3);
    auto r = resolvent_solve_exp(a, f);
    EXPECT_TRUE(resolvent_residual(a, r.z, f).empty());
  }
}

TEST(Resolvent, DimensionMismatchThrows) {
  ComplexMat a = ComplexMat::Identity(2, 2);
  EXPECT_THROW(resolvent_solve_exp(a, scal(-1.0, {1.0})), ValidationError);
}

// ---- derivative_exp ----

TEST(DerivativeExp, Decay) { EXPECT_TRUE(derivative_exp(scal(-1.0, {1.0})) == scal(-1.0, {-1.0})); }

TEST(DerivativeExp, PolynomialTimesDecay) {
  EXPECT_TRUE(derivative_exp(scal(-2.0, {0.0, 1.0})) == scal(-2.0, {1.0, -2.0}));
}

TEST(DerivativeExp, CentralDifferences) {
  std::mt19937_64 rng(17);
  auto s = testutil::rand_exp(rng, 2, 4, 3);
  auto d = derivative_exp(s);
  const double h = 1e-6;
  for (int i = 0; i < 10; ++i) {
    const double t = 0.3 + 0.25 * i;
    ComplexVec fd = (s.eval(t + h) - s.eval(t - h)) / (2 * h);
    EXPECT_LT(testutil::rel_err(d.eval(t), fd), 1e-8);
  }
}

// ---- ladder_eval ----

TEST(LadderEval, DepthOneAtE) {
  auto p = ladder_eval(1, std::numbers::e);
  EXPECT_NEAR(p.L(-1), std::exp(std::numbers::e), 1e-12);
  EXPECT_DOUBLE_EQ(p.L(0), std::numbers::e);
  EXPECT_NEAR(p.L(1), 1.0, 1e-15);
}

TEST(LadderEval, BoundaryIsRejected) { EXPECT_THROW(ladder_eval(2, std::numbers::e), DomainError); }

TEST(LadderEval, DepthZero) {
  auto p = ladder_eval(0, 3.0);
  EXPECT_NEAR(p.L(-1), std::exp(3.0), 1e-12);
  EXPECT_EQ(p.L(0), 3.0);
}

TEST(LadderEval, MonotoneComponents) {
  double prev2 = -1e300, prev3 = -1e300;
  for (double t = 16.0; t < 1e6; t *= 1.7) {
    auto p = ladder_eval(3, t);
    EXPECT_GT(p.L(2), prev2);
    EXPECT_GT(p.L(3), prev3);
    prev2 = p.L(2);
    prev3 = p.L(3);
  }
}

TEST(IteratedExp, KnownValues) {
  EXPECT_EQ(iterated_exp_zero(0), 0.0);
  EXPECT_EQ(iterated_exp_zero(1), 1.0);
  EXPECT_NEAR(iterated_exp_zero(2), std::numbers::e, 1e-15);
  EXPECT_NEAR(iterated_exp_zero(3), std::exp(std::numbers::e), 1e-12);
}

// ---- eval_logpower ----

TEST(EvalLogPower, InversePower) {
  auto p = LogPowerSum::scalar({0.0, -1.0, 0.0}, 1.0);
  EXPECT_NEAR(p.eval(4.0)(0).real(), 0.25, 1e-15);
}

TEST(EvalLogPower, ImaginaryExponentialPower) {
  auto v = LogPowerSum::scalar({Complex(0, 1), 0.0}, 1.0).eval(std::numbers::pi)(0);
  EXPECT_NEAR(v.real(), -1.0, 1e-14);
  EXPECT_NEAR(v.imag(), 0.0, 1e-14);
}

TEST(EvalLogPower, ImaginaryLogPower) {
  const double t = std::exp(std::exp(std::numbers::pi));
  auto v = LogPowerSum::scalar({0.0, 0.0, Complex(0, 1)}, 1.0).eval(t)(0);
  EXPECT_NEAR(std::abs(v), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(std::arg(v)), std::numbers::pi, 1e-12);
}

TEST(EvalLogPower, DomainGuard) {
  auto p = LogPowerSum::scalar({0.0, 0.0, 0.0, -1.0}, 1.0);  // depth 2 needs t > e^e
  EXPECT_THROW(p.eval(10.0), DomainError);
  EXPECT_NO_THROW(p.eval(16.0));
}

// ---- op_M / op_R ----

TEST(OpM, ScalesByExponent) {
  auto p = LogPowerSum::scalar({0.0, -1.0}, 1.0);
  EXPECT_TRUE(op_M(0, p) == LogPowerSum::scalar({0.0, -1.0}, -1.0));
}

TEST(OpM, MinusOneIndex) {
  auto p = LogPowerSum::scalar({Complex(0, 1), -1.0}, 2.0);
  EXPECT_TRUE(op_M(-1, p) == LogPowerSum::scalar({Complex(0, 1), -1.0}, Complex(0, 2)));
}

TEST(OpM, ZeroSumStaysZero) { EXPECT_TRUE(op_M(0, LogPowerSum(1, 1)).empty()); }

TEST(OpM, IndexOutOfRange) {
  auto p = LogPowerSum::scalar({0.0, -1.0}, 1.0);
  EXPECT_THROW(op_M(1, p), ValidationError);
  EXPECT_THROW(op_M(-2, p), ValidationError);
}

TEST(OpR, InversePower) {
  auto r = op_R(LogPowerSum::scalar({0.0, -1.0}, 1.0));
  EXPECT_TRUE(r == LogPowerSum::scalar({0.0, -2.0}, -1.0));
}

TEST(OpR, ImaginaryLogPowerChainRule) {
  auto r = op_R(LogPowerSum::scalar({0.0, 0.0, Complex(0, 1)}, 1.0));
  EXPECT_TRUE(r == LogPowerSum::scalar({0.0, -1.0, Complex(-1, 1)}, Complex(0, 1)));
}

TEST(OpR, DepthMinusOneRejected) {
  EXPECT_THROW(op_R(LogPowerSum::scalar({Complex(0, 1)}, 1.0)), ValidationError);
}

TEST(OpR, LogDerivativeIdentity) {
  std::mt19937_64 rng(23);
  // Absolute step: the e^{i w t} factors oscillate on an O(1) time scale even at large t.
  const double h = 1e-2;
  for (int trial = 0; trial < 50; ++trial) {
    const int depth = trial % 4;
    auto q = testutil::rand_logpower(rng, depth, 2);
    auto d = op_M(-1, q) + op_R(q);
    const double t = std::max(20.0, 3.0 * iterated_exp_zero(depth + 1)) * (1.0 + 0.3 * (trial % 7));
    ComplexVec fd = testutil::fd5([&](double s) { return q.eval(s); }, t, h);
    EXPECT_LT(testutil::rel_err(d.eval(t), fd), 1e-6) << "trial " << trial;
  }
}

// ---- op_ZA ----

TEST(OpZA, ScalarInverse) {
  ComplexMat a(1, 1);
  a << 2.0;
  auto r = op_ZA(a, LogPowerSum::scalar({0.0, 0.0}, 1.0));
  EXPECT_TRUE(r == LogPowerSum::scalar({0.0, 0.0}, 0.5));
}

TEST(OpZA, ComplexShift) {
  ComplexMat a(1, 1);
  a << 1.0;
  auto r = op_ZA(a, LogPowerSum::scalar({Complex(0, 1), 0.0}, 1.0));
  const Complex c = r.terms().begin()->second(0);
  EXPECT_NEAR(c.real(), 0.5, 1e-15);
  EXPECT_NEAR(c.imag(), -0.5, 1e-15);
}

TEST(OpZA, RejectsGrowingExponential) {
  ComplexMat a(1, 1);
  a << 1.0;
  EXPECT_THROW(op_ZA(a, LogPowerSum::scalar({0.5, 0.0}, 1.0)), ValidationError);
}

TEST(OpZA, InvertsAPlusM) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 5;
    ComplexMat a = testutil::rand_stable(rng, n);
    auto p = testutil::rand_logpower(rng, 1 + trial % 3, n);
    auto z = op_ZA(a, p);
    auto back = z.apply_matrix(a) + op_M(-1, z);
    ASSERT_EQ(back.size(), p.size());
    auto it = back.terms().begin();
    for (const auto& [alpha, xi] : p.terms()) {
      EXPECT_TRUE(it->first == alpha);
      EXPECT_LT((it->second - xi).norm(), 1e-12 * std::max(1.0, xi.norm()));
      ++it;
    }
  }
}

TEST(ResolventCache, MemoizesPerShift) {
  ComplexMat a = ComplexMat::Identity(2, 2) * 2.0;
  ResolventCache cache(a);
  ComplexVec x = ComplexVec::Ones(2);
  auto y1 = cache.solve(Complex(0, 1), x);
  auto y2 = cache.solve(Complex(0, 1), x);
  EXPECT_EQ(y1, y2);
  EXPECT_EQ(cache.size(), 1u);
}

// ---- embed_depth ----

TEST(EmbedDepth, ZeroPads) {
  auto e = embed_depth(LogPowerSum::scalar({0.0, -1.0}, 1.0), 2);
  EXPECT_TRUE(e == LogPowerSum::scalar({0.0, -1.0, 0.0, 0.0}, 1.0));
}

TEST(EmbedDepth, EvaluationUnchanged) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    auto p = testutil::rand_logpower(rng, i % 2, 2);
    auto e = embed_depth(p, 2);
    const double t = 20.0 + i;
    EXPECT_LT(testutil::rel_err(e.eval(t), p.eval(t)), 1e-13);
  }
}

TEST(EmbedDepth, SameDepthIsIdentity) {
  std::mt19937_64 rng(37);
  auto p = testutil::rand_logpower(rng, 2, 2);
  EXPECT_TRUE(embed_depth(p, 2) == p);
}

TEST(EmbedDepth, ShallowerTargetRejected) {
  EXPECT_THROW(embed_depth(LogPowerSum::scalar({0.0, 0.0, -1.0}, 1.0), 0), ValidationError);
}

// ---- mul_apply_logpower ----

TEST(MulApplyLogPower, Square) {
  auto r = mul_apply_logpower(scalar_power_map(2), {LogPowerSum::scalar({0.0, -1.0}, 1.0),
                                                    LogPowerSum::scalar({0.0, -1.0}, 1.0)});
  EXPECT_TRUE(r == LogPowerSum::scalar({0.0, -2.0}, 1.0));
}

TEST(MulApplyLogPower, Binomial) {
  auto s = LogPowerSum::scalar({0.0, -1.0}, 1.0) + LogPowerSum::scalar({0.0, -2.0}, 1.0);
  auto r = mul_apply_logpower(scalar_power_map(2), {s, s});
  auto expect = LogPowerSum::scalar({0.0, -2.0}, 1.0) + LogPowerSum::scalar({0.0, -3.0}, 2.0) +
                LogPowerSum::scalar({0.0, -4.0}, 1.0);
  EXPECT_TRUE(r == expect);
}

TEST(MulApplyLogPower, PointwiseOracle) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = testutil::rand_map(rng, 2, 2, 5);
    auto a = testutil::rand_logpower(rng, 1, 2), b = testutil::rand_logpower(rng, 2, 2);
    auto r = mul_apply_logpower(g, {a, b});
    EXPECT_EQ(r.depth(), 2);
    for (double t : {20.0, 55.0, 400.0}) {
      EXPECT_LT(testutil::rel_err(r.eval(t), g.apply({a.eval(t), b.eval(t)})), 1e-12);
    }
  }
}

// ---- properties ----

TEST(Properties, ClassClosure) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> w(-2.0, 2.0), u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2, m = trial % 3;
    const double mu = -0.5 - 0.25 * (trial % 4);
    LogPowerSum p(k, 1);
    for (int i = 0; i < 3; ++i) {
      ExponentVector a(4);
      for (int j = -1; j <= k; ++j) {
        const double re = j < m ? 0.0 : (j == m ? mu : u(rng));
        a[static_cast<std::size_t>(j + 1)] = Complex(re, w(rng));
      }
      p.add_term(a, testutil::vec1(testutil::rand_complex(rng)));
    }
    ASSERT_TRUE(p.in_class(m, mu));
    for (int j = -1; j <= k; ++j) EXPECT_TRUE(canonicalize_logpower(op_M(j, p)).in_class(m, mu));
    ComplexMat a(1, 1);
    a << Complex(1.5, 0.3);
    EXPECT_TRUE(op_ZA(a, p).in_class(m, mu));
    if (m == 0) EXPECT_TRUE(op_R(p).in_class(0, mu - 1.0));
  }
}

TEST(Properties, DecayOrdering) {
  // p in P_m(k, mu): |p(t)| / L_m(t)^{mu + delta} eventually decreases.
  for (int m : {0, 1}) {
    for (double delta : {0.5, 1.0}) {
      const double mu = -1.0;
      ExponentVector lead{Complex(0, 0.7), 0.0, 0.0, Complex(0.4, 1.3)};
      ExponentVector minor{Complex(0, -0.3), 0.0, 0.0, 0.0};
      lead[static_cast<std::size_t>(m + 1)] = Complex(mu, 0.5);
      minor[static_cast<std::size_t>(m + 1)] = Complex(mu, 0.0);
      minor[static_cast<std::size_t>(m + 2)] = Complex(-2.0, 0.0);
      if (m == 1) lead[1] = Complex(0.0, 2.0);
      auto p = LogPowerSum::scalar(lead, 1.0) + LogPowerSum::scalar(minor, 0.5);
      ASSERT_TRUE(p.in_class(m, mu));
      std::vector<double> ratio;
      for (double e = 2.0; e <= 300.0; e += 10.0) {
        const double t = std::pow(10.0, e);
        const double lm = iterated_log(m, t);
        ratio.push_back(std::abs(p.eval(t)(0)) / std::pow(lm, mu + delta));
      }
      for (std::size_t i = ratio.size() - 10; i + 1 < ratio.size(); ++i) {
        EXPECT_LT(ratio[i + 1], ratio[i]) << "m=" << m << " delta=" << delta;
      }
    }
  }
}

TEST(Properties, ExpGrowthBound) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    ExpPolySum g(2);
    for (int i = 0; i < 3; ++i) {
      g.add_term(Complex(-1.0, 0.5 * i), {testutil::rand_vec(rng, 2), testutil::rand_vec(rng, 2)});
    }
    ASSERT_TRUE(g.in_class(-1.0));
    // |g(t)| e^{-(mu + 0.1) t}, evaluated as one exp-poly so large t neither overflows nor underflows.
    const auto scaled = g.shift_exponent(0.9);
    std::vector<double> ratio;
    for (double t = 1.0; t < 5000.0; t *= 1.3) ratio.push_back(scaled.eval(t).norm());
    EXPECT_LT(ratio.back(), 1e-6 * ratio.front());
    for (std::size_t i = ratio.size() - 10; i + 1 < ratio.size(); ++i) EXPECT_LT(ratio[i + 1], ratio[i]);
  }
}

TEST(Properties, CanonicalFormUniqueness) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = testutil::rand_exp(rng, 2, 3, 2);
    auto c = testutil::rand_exp(rng, 2, 2, 1);
    auto b = canonicalize_exp((a - c) + c);  // same function, assembled differently
    auto grid = uniqueness_grid(a, b);
    EXPECT_TRUE(evaluations_agree(a, b, grid));
    EXPECT_TRUE(same_terms(a, b, 1e-10));

    auto moved = a;
    auto node = moved.mutable_terms().extract(moved.mutable_terms().begin());
    node.key() += Complex(0.0, 1e-6);
    moved.mutable_terms().insert(std::move(node));
    EXPECT_FALSE(evaluations_agree(a, moved, uniqueness_grid(a, moved)));
    EXPECT_FALSE(same_terms(a, moved));
  }
}
