#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "apvar/voronoi.hpp"

using namespace apvar;

namespace {

const HeckeTable& hecke() {
  static const HeckeTable t = build_hecke_table(20'000);
  return t;
}

const ArithTables& arith() {
  static const ArithTables t = build_arith_tables(40'000);
  return t;
}

double ceil_design(std::uint64_t q, double X, double H) {
  return std::ceil(static_cast<double>(q * q) * X / (H * H));
}

}  // namespace

TEST(ModInverse, Examples) {
  EXPECT_EQ(mod_inverse(1, 9), 1);
  EXPECT_EQ(mod_inverse(2, 5), 3);
  EXPECT_EQ(mod_inverse(3, 7), 5);
  EXPECT_EQ(mod_inverse(-2, 5), 2);
  EXPECT_THROW(mod_inverse(4, 6), std::invalid_argument);
  EXPECT_THROW(mod_inverse(1, 0), std::invalid_argument);
}

TEST(ModInverse, InvertsEveryUnit) {
  for (std::int64_t q = 2; q <= 300; ++q) {
    for (std::int64_t h = 1; h < q; ++h) {
      if (std::gcd(h, q) != 1) continue;
      const auto hb = mod_inverse(h, q);
      ASSERT_GE(hb, 1);
      ASSERT_LT(hb, q);
      ASSERT_EQ((h * hb) % q, 1) << h << " " << q;
    }
  }
}

TEST(VoronoiCusp, TrivialModulus) {
  const SmoothWeight w(500.0, 2000.0);
  const auto r = voronoi_check_cusp(1, 1, w, hecke());
  EXPECT_LE(r.rel_diff, 1e-6);
  EXPECT_GE(static_cast<double>(r.n_cut_dual), ceil_design(1, 2000.0, 500.0));
  EXPECT_DOUBLE_EQ(r.rel_diff, std::abs(r.lhs - r.rhs) / std::max({std::abs(r.lhs), std::abs(r.rhs), 1e-12}));
}

TEST(VoronoiCusp, ModulusFive) {
  const SmoothWeight w(500.0, 2000.0);
  const auto r = voronoi_check_cusp(5, 2, w, hecke());
  EXPECT_LE(r.rel_diff, 1e-5);
  EXPECT_GE(static_cast<double>(r.n_cut_dual), ceil_design(5, 2000.0, 500.0));
}

TEST(VoronoiCusp, ConjugateResidueGivesConjugateSides) {
  const SmoothWeight w(500.0, 2000.0);
  const auto a = voronoi_check_cusp(7, 3, w, hecke());
  const auto b = voronoi_check_cusp(7, 4, w, hecke());
  EXPECT_NEAR(std::abs(a.lhs - std::conj(b.lhs)), 0.0, 1e-10 * std::abs(a.lhs));
  EXPECT_NEAR(std::abs(a.rhs - std::conj(b.rhs)), 0.0, 1e-8 * std::abs(a.rhs));
}

TEST(VoronoiCusp, TableTooShortIsReported) {
  const SmoothWeight w(500.0, 2000.0);
  const auto small = build_hecke_table(1000);
  EXPECT_THROW(voronoi_check_cusp(1, 1, w, small), RangeError);
  EXPECT_THROW(voronoi_check_cusp(6, 3, w, hecke()), std::invalid_argument);
}

TEST(VoronoiDivisor, TrivialModulus) {
  const SmoothWeight w(500.0, 2000.0);
  const auto r = voronoi_check_divisor(1, 1, w, arith());
  EXPECT_LE(r.rel_diff, 1e-5);
  // the main term carries almost everything at q = 1
  EXPECT_LT(std::abs(r.lhs - r.main_term), 1e-2 * std::abs(r.lhs));
}

TEST(VoronoiDivisor, ModulusFour) {
  for (double X : {2000.0, 4000.0}) {
    const SmoothWeight w(X / 4.0, X);
    for (std::int64_t h : {1, 3}) {
      const auto r = voronoi_check_divisor(4, h, w, arith());
      EXPECT_LE(r.rel_diff, 1e-5) << X << " " << h;
    }
  }
}

TEST(VoronoiDivisor, MainTermOnlyResidualIsReported) {
  const SmoothWeight w(1000.0, 4000.0);
  const auto r = voronoi_check_divisor(4, 3, w, arith());
  const double residual = std::abs(r.lhs - r.main_term);
  RecordProperty("main_term_only_residual", std::to_string(residual));
  EXPECT_GT(residual, 0.0);
}

TEST(VoronoiDivisor, LogWeightIntegralMatchesQuadrature) {
  const SmoothWeight w(250.0, 1000.0);
  const double c = 0.3;
  const double direct =
      quad::integrate_panels([&](double x) { return w(x) * (std::log(x) + c); }, 250.0, 1000.0, 25.0, 1e-12).value;
  EXPECT_NEAR(log_weight_integral(w, c), direct, 1e-10 * direct);
}

TEST(Voronoi, TighterSettingsDoNotDegrade) {
  const SmoothWeight w(500.0, 2000.0);
  VoronoiOptions loose;
  loose.quad_tol = 1e-9;
  loose.tail_tol = 1e-7;
  VoronoiOptions tight;
  tight.quad_tol = 1e-10;
  tight.tail_tol = 1e-9;
  tight.min_cut = 2 * loose.min_cut;
  for (std::uint64_t q : {1ull, 5ull}) {
    const auto a = voronoi_check_cusp(q, 2 % q == 0 ? 1 : 2, w, hecke(), loose);
    const auto b = voronoi_check_cusp(q, 2 % q == 0 ? 1 : 2, w, hecke(), tight);
    EXPECT_LE(b.rel_diff, std::max(a.rel_diff, 1e-5)) << q;
    EXPECT_GE(b.n_cut_dual, a.n_cut_dual);
  }
}

TEST(Voronoi, CharacterOrthogonality) {
  const SmoothWeight w(500.0, 2000.0);
  const auto& a = hecke().a_array();
  const auto& tau = arith().tau_array();
  for (std::uint64_t q : {1ull, 6ull, 12ull, 35ull}) {
    cplx sum_a(0.0, 0.0), sum_t(0.0, 0.0);
    for (std::int64_t h = 0; h < static_cast<std::int64_t>(q); ++h) {
      sum_a += voronoi_lhs([&](std::uint64_t n) { return a[n]; }, q, h, w);
      sum_t += voronoi_lhs([&](std::uint64_t n) { return static_cast<double>(tau[n]); }, q, h, w);
    }
    double ref_a = 0.0, ref_t = 0.0, scale_a = 0.0;
    for (std::uint64_t n = 501; n < 2000; ++n) {
      scale_a += std::abs(a[n]) * w(static_cast<double>(n));
      if (n % q != 0) continue;
      ref_a += a[n] * w(static_cast<double>(n));
      ref_t += static_cast<double>(tau[n]) * w(static_cast<double>(n));
    }
    const double qd = static_cast<double>(q);
    EXPECT_NEAR(sum_a.real(), qd * ref_a, 1e-9 * qd * scale_a) << q;
    EXPECT_NEAR(sum_a.imag(), 0.0, 1e-9 * qd * scale_a) << q;
    EXPECT_NEAR(sum_t.real(), qd * ref_t, 1e-9 * qd * ref_t) << q;
    EXPECT_NEAR(sum_t.imag(), 0.0, 1e-9 * qd * ref_t) << q;
  }
}

TEST(EulerGamma, Value) { EXPECT_NEAR(euler_mascheroni(), 0.57721566490153286061, 1e-15); }
