#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "apvar/variance.hpp"

using namespace apvar;

namespace {

const HeckeTable& hecke() {
  static const HeckeTable t = build_hecke_table(60'000);
  return t;
}

const ArithTables& arith() {
  static const ArithTables t = build_arith_tables(200'000);
  return t;
}

template <class U>
double naive_variance(U&& u, std::uint64_t X, std::uint64_t q) {
  double v = 0.0;
  for (std::uint64_t b = 0; b < q; ++b) {
    double s = 0.0;
    for (std::uint64_t n = 1; n <= X; ++n)
      if (n % q == b) s += u(n, b);
    v += s * s;
  }
  return v;
}

}  // namespace

// ------------------------------------------------------------ exact variances

TEST(CuspVariance, TrivialModulusIsSquaredPartialSum) {
  double s = 0.0;
  for (std::uint64_t n = 1; n <= 5000; ++n) s += hecke().a(n);
  EXPECT_NEAR(variance_cusp_exact(5000.0, 1, hecke()), s * s, 1e-9 * std::max(1.0, s * s));
}

TEST(CuspVariance, LargeModulusIsSumOfSquares) {
  double s = 0.0;
  for (std::uint64_t n = 1; n <= 3000; ++n) s += hecke().a(n) * hecke().a(n);
  EXPECT_NEAR(variance_cusp_exact(3000.5, 3001, hecke()), s, 1e-12 * s);
  EXPECT_NEAR(variance_cusp_exact(3000.0, 50'000, hecke()), s, 1e-12 * s);
}

TEST(CuspVariance, MatchesNaiveDoubleLoop) {
  const double naive = naive_variance([](std::uint64_t n, std::uint64_t) { return hecke().a(n); }, 10, 3);
  EXPECT_NEAR(variance_cusp_exact(10.0, 3, hecke()), naive, 1e-13 * naive);
  for (std::uint64_t q : {7ull, 30ull, 97ull}) {
    const double nv = naive_variance([](std::uint64_t n, std::uint64_t) { return hecke().a(n); }, 2000, q);
    EXPECT_NEAR(variance_cusp_exact(2000.0, q, hecke()), nv, 1e-11 * nv) << q;
  }
}

TEST(CuspVariance, BucketingIdentityAndRelabeling) {
  const auto& a = hecke().a_array();
  const auto s = detail::bucket_sums([&](std::uint64_t n) { return a[n]; }, 10'000, 37);
  double total = 0.0, direct = 0.0;
  for (double v : s) total += v;
  for (std::uint64_t n = 1; n <= 10'000; ++n) direct += a[n];
  EXPECT_NEAR(total, direct, 1e-10);
  // labelling residues by b in [q, 2q) instead of [0, q)
  double v = 0.0;
  for (std::uint64_t b = 37; b < 74; ++b) {
    double t = 0.0;
    for (std::uint64_t n = 1; n <= 10'000; ++n)
      if (n % 37 == b - 37) t += a[n];
    v += t * t;
  }
  EXPECT_NEAR(variance_cusp_exact(10'000.0, 37, hecke()), v, 1e-12 * v);
}

TEST(CuspVariance, RangeErrors) {
  EXPECT_THROW(variance_cusp_exact(70'000.0, 3, hecke()), RangeError);
  EXPECT_THROW(variance_cusp_exact(100.0, 0, hecke()), std::invalid_argument);
}

TEST(DivisorMainTerm, TrivialModulusCollapse) {
  const double g = euler_mascheroni();
  for (double x : {10.0, 1e3, 1e5}) EXPECT_NEAR(mt_divisor(1, x, 1).value, x * (std::log(x) + 2 * g - 1), 1e-12 * x);
}

TEST(DivisorMainTerm, CoprimeResidueUsesOnlyTrivialDivisor) {
  // (q, b) = 1: phi(q)/q^2 x (log x + 2 gamma - 1) - (2x/q) sum_{d | q} mu(d) log d / d
  const std::uint64_t q = 12;
  const double x = 5000.0, g = euler_mascheroni();
  double s = 0.0;
  for (auto d : divisors(q)) s += moebius(d) * std::log(static_cast<double>(d)) / static_cast<double>(d);
  const double expect = 4.0 / 144.0 * x * (std::log(x) + 2 * g - 1) - 2.0 * x * s / 12.0;
  for (std::uint64_t b : {1ull, 5ull, 7ull, 11ull}) EXPECT_NEAR(mt_divisor(b, x, q).value, expect, 1e-12 * x);
  EXPECT_THROW(mt_divisor(0, x, q), std::invalid_argument);
  EXPECT_THROW(mt_divisor(13, x, q), std::invalid_argument);
}

TEST(DivisorMainTerm, SumOverResiduesTracksDivisorSummatory) {
  double mt = 0.0, direct = 0.0;
  for (std::uint64_t b = 1; b <= 12; ++b) mt += mt_divisor(b, 1e5, 12).value;
  for (std::uint64_t n = 1; n <= 100'000; ++n) direct += static_cast<double>(arith().tau(n));
  const double gap = std::abs(mt - direct) / direct;
  RecordProperty("relative_gap", std::to_string(gap));
  EXPECT_LE(gap, 0.02);
}

TEST(DivisorVariance, TrivialModulus) {
  const double x = 20'000.0;
  double s = 0.0;
  for (std::uint64_t n = 1; n <= 20'000; ++n) s += static_cast<double>(arith().tau(n));
  const double d = s - mt_divisor(1, x, 1).value;
  EXPECT_NEAR(variance_divisor_exact(x, 1, arith()), d * d, 1e-9 * std::max(1.0, d * d) + 1e-6);
}

TEST(DivisorVariance, MatchesNaiveRecomputation) {
  // residue 0 is labelled b = q
  for (auto [x, q] : {std::pair{100.0, 7ull}, std::pair{1000.0, 12ull}}) {
    double v = 0.0;
    for (std::uint64_t b = 1; b <= q; ++b) {
      double s = 0.0;
      for (std::uint64_t n = 1; n <= static_cast<std::uint64_t>(x); ++n)
        if (n % q == b % q) s += static_cast<double>(divisors(n).size());
      const double d = s - mt_divisor(b, x, q).value;
      v += d * d;
    }
    const double got = variance_divisor_exact(x, q, arith());
    EXPECT_GE(got, 0.0);
    EXPECT_NEAR(got, v, 1e-10 * v) << x << " " << q;
  }
}

// ------------------------------------------------------------ smooth side

TEST(SmoothCusp, TrivialModulusMainTermIsWeightedSquareSum) {
  const SmoothWeight w(500.0, 2000.0);
  const auto kind = OmegaKind::J(12);
  double direct = 0.0;
  for (std::uint64_t n = 1; n <= 600; ++n) {
    const double om = omega_direct(kind, std::sqrt(static_cast<double>(n)), w, 1e-12 * w.X()).real();
    direct += hecke().a(n) * hecke().a(n) * om * om;
  }
  DualOptions opt;
  opt.rel_tol = 1e-10;
  EXPECT_NEAR(mt_smooth_cusp(1, w, hecke(), opt), direct, 1e-7 * direct);
}

TEST(SmoothCusp, MainTermStableUnderQuadratureTolerance) {
  const SmoothWeight w(h_default_cusp(20'000.0, 200.0), 20'000.0);
  DualOptions a = main_term_options(), b = main_term_options();
  a.quad_tol = 1e-10;
  b.quad_tol = 0.5e-10;
  const double va = mt_smooth_cusp(200, w, hecke(), a), vb = mt_smooth_cusp(200, w, hecke(), b);
  EXPECT_LT(std::abs(va - vb), 1e-5 * std::abs(vb));
}

TEST(SmoothCusp, MainTermInXIsReported) {
  // not monotone below q ~ sqrt X, where the smooth sums in each class nearly cancel
  double prev = 0.0;
  bool monotone = true;
  for (double X : {5000.0, 10'000.0, 20'000.0}) {
    const SmoothWeight w(X / 4.0, X);
    const double v = mt_smooth_cusp(30, w, hecke());
    EXPECT_GT(v, 0.0);
    EXPECT_TRUE(std::isfinite(v));
    RecordProperty("mt_q30_X" + std::to_string(static_cast<int>(X)), std::to_string(v));
    monotone = monotone && v > prev;
    prev = v;
  }
  RecordProperty("monotone", monotone ? "yes" : "no");
}

TEST(SmoothCusp, SplitReproducesDirectSmoothVariance) {
  const SmoothWeight w(500.0, 2000.0);
  for (std::uint64_t q : {1ull, 6ull}) {
    const double direct = smooth_variance_cusp(q, w, hecke());
    const auto split = cusp_split(q, w, hecke());
    EXPECT_NEAR(split.total, direct, 1e-6 * direct) << q;
    EXPECT_NEAR(split.mt + split.offdiag, split.total, 1e-12 * direct);
  }
}

TEST(SmoothDivisor, KernelKTruncatesBeforeY) {
  const SmoothWeight w(500.0, 2000.0);
  const auto split = divisor_split(6, w, arith());
  for (const auto& t : split.terms) EXPECT_LT(t.n_significant2, t.n_cut) << t.r;
  const double direct = smooth_variance_divisor(6, w, arith());
  EXPECT_NEAR(split.total, direct, 1e-6 * direct);
}

TEST(SmoothDivisor, TrivialModulusIsSingleTerm) {
  const SmoothWeight w(500.0, 2000.0);
  const auto m = mt_smooth_divisor(1, OmegaTag::Y, w, arith());
  DualOptions opt = main_term_options();
  const auto split = divisor_split(1, w, arith(), opt);
  EXPECT_NEAR(m.value, split.mt_y, 1e-6 * split.mt_y);
  EXPECT_EQ(split.terms.size(), 1u);
  EXPECT_THROW(mt_smooth_divisor(1, OmegaTag::J, w, arith()), std::invalid_argument);
}

TEST(SmoothDivisor, CubicLeadingCoefficientPositive) {
  const double X = 1e5;
  const auto big = build_arith_tables(16'000'000);
  for (std::uint64_t q : {720ull, 1260ull}) {
    const SmoothWeight w(h_default_divisor(X, static_cast<double>(q)), X);
    for (auto B : {OmegaTag::Y, OmegaTag::K}) {
      const auto m = mt_smooth_divisor(q, B, w, big);
      EXPECT_GT(m.fit.leading(), 0.0) << q << " " << static_cast<int>(B);
      EXPECT_GT(m.value, 0.0);
      RecordProperty("lead_" + std::to_string(q) + (B == OmegaTag::Y ? "_Y" : "_K"), std::to_string(m.fit.leading()));
    }
  }
}

TEST(SmoothDivisor, PolyfitRecoversCubic) {
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    const double t = -6.0 + 0.5 * i;
    x.push_back(t);
    y.push_back(1.5 - 0.25 * t + 0.125 * t * t + 0.01 * t * t * t);
  }
  const auto c = detail::polyfit(x, y, 3);
  EXPECT_NEAR(c[0], 1.5, 1e-10);
  EXPECT_NEAR(c[1], -0.25, 1e-10);
  EXPECT_NEAR(c[2], 0.125, 1e-10);
  EXPECT_NEAR(c[3], 0.01, 1e-10);
}

// ------------------------------------------------------------ regimes

TEST(Regime, HDefaultsAndFloor) {
  EXPECT_NEAR(h_default_cusp(1e5, 1e4), std::max(std::pow(1e4, 16.0 / 27) * std::pow(1e5, 10.0 / 27) / 3, 1e4 / 3), 1e-9);
  EXPECT_DOUBLE_EQ(h_default_cusp(1e5, 2.0), std::pow(1e5, 0.6));
  EXPECT_DOUBLE_EQ(h_default_divisor(1e5, 2.0), std::pow(1e5, 0.6));
}

TEST(Regime, BudgetOrderingAtMillionAndThousand) {
  const auto b = cusp_budget(1e6, 1000);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_GT(b[0].value, b[1].value);
  EXPECT_GT(b[1].value, b[2].value);
  for (const auto& t : divisor_budget(1e6, 1000)) EXPECT_GT(t.value, 0.0);
}

TEST(Regime, CrossoverNearExponent34Over59) {
  for (double X : {1e5, 1e8}) {
    const double qc = cusp_budget_crossover(X);
    // g(q) aside, q^-1 X^3/2 = q^5/54 X^47/54 solves to q = X^{34/59}
    EXPECT_NEAR(std::log(qc) / std::log(X), 34.0 / 59.0, 1e-12);
    const auto below = cusp_budget(X, static_cast<std::uint64_t>(0.8 * qc));
    EXPECT_EQ(std::max_element(below.begin(), below.end(), [](auto& a, auto& b) { return a.value < b.value; })->name,
              below[0].name);
  }
}

TEST(Regime, Labels) {
  EXPECT_EQ(regime_label(1e4, 5.0), "q<=X^1/4");
  EXPECT_EQ(regime_label(1e4, 50.0), "X^1/4<q<X^1/2");
  EXPECT_EQ(regime_label(1e4, 500.0), "X^1/2<=q<X");
  EXPECT_EQ(regime_label(1e4, 1e4), "q>=X");
}

TEST(Regime, CuspReportFields) {
  RegimeOptions opt;
  EXPECT_THROW(regime_report_cusp(2e4, 300, hecke(), opt), std::invalid_argument);
  opt.c_hat = 0.384;
  const auto r = regime_report_cusp(2e4, 300, hecke(), opt);
  EXPECT_GE(r.exact, 0.0);
  EXPECT_DOUBLE_EQ(r.prediction, 0.384 * 2e4);
  double sum = 0.0;
  for (const auto& t : r.budget) sum += t.value;
  EXPECT_DOUBLE_EQ(r.ratio, std::abs(r.exact - r.prediction) / sum);
  EXPECT_EQ(r.regime, "X^1/2<=q<X");
  EXPECT_EQ(r.dominant, "q^-1 X^3/2 g(q)");
  // q >= X: the variance is the Rankin partial sum
  const auto big = regime_report_cusp(2e4, 30'000, hecke(), opt);
  EXPECT_NEAR(big.exact, rankin_partial_sum(2e4, hecke()), 1e-10 * big.exact);
  EXPECT_TRUE(std::isfinite(big.ratio));
}

TEST(Regime, DivisorReportFields) {
  const auto r = regime_report_divisor(2e4, 150, arith(), {});
  EXPECT_GE(r.exact, 0.0);
  EXPECT_GT(r.prediction, 0.0);
  EXPECT_EQ(r.budget.size(), 4u);
  EXPECT_TRUE(std::isfinite(r.ratio));
}
