#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "apvar/arith.hpp"

using namespace apvar;

namespace {

double ramanujan_direct(std::uint64_t k, std::int64_t h) {
  double s = 0.0;
  for (std::uint64_t d = 1; d <= k; ++d) {
    if (std::gcd(d, k) != 1) continue;
    const auto kk = static_cast<std::int64_t>(k);
    const std::int64_t num = ((h % kk) * static_cast<std::int64_t>(d % k)) % kk;
    s += std::cos(2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(k));
  }
  return s;
}

}  // namespace

TEST(ArithTables, TinyTableConventions) {
  const auto t = build_arith_tables(1);
  EXPECT_EQ(t.tau(1), 1u);
  EXPECT_EQ(t.phi(1), 1u);
  EXPECT_EQ(t.mu(1), 1);
}

TEST(ArithTables, ValuesAt36And12) {
  const auto t = build_arith_tables(36);
  EXPECT_EQ(t.tau(36), 9u);
  EXPECT_EQ(t.phi(36), 12u);
  EXPECT_EQ(t.mu(36), 0);
  EXPECT_EQ(t.tau(12), 6u);
}

TEST(ArithTables, MatchTrialDivision) {
  const auto t = build_arith_tables(5000);
  for (std::uint64_t n = 1; n <= 5000; ++n) {
    ASSERT_EQ(t.tau(n), divisors(n).size()) << n;
    ASSERT_EQ(t.phi(n), totient(n)) << n;
    ASSERT_EQ(t.mu(n), moebius(n)) << n;
  }
}

TEST(ArithTables, TotientDivisorSum) {
  const auto t = build_arith_tables(20000);
  for (std::uint64_t n = 1; n <= 20000; ++n) {
    std::uint64_t s = 0;
    for (auto d : divisors(n, t)) s += t.phi(d);
    ASSERT_EQ(s, n) << n;
  }
}

TEST(ArithTables, OutOfRangeAndCap) {
  const auto t = build_arith_tables(10);
  EXPECT_THROW(t.tau(11), RangeError);
  EXPECT_THROW(build_arith_tables(100, 50), CapacityError);
}

TEST(Divisors, Examples) {
  EXPECT_EQ(divisors(1), (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(divisors(12), (std::vector<std::uint64_t>{1, 2, 3, 4, 6, 12}));
  EXPECT_EQ(divisors(97), (std::vector<std::uint64_t>{1, 97}));
  const auto t = build_arith_tables(100);
  EXPECT_EQ(divisors(12, t), divisors(12));
}

TEST(RamanujanSum, Examples) {
  for (std::int64_t h : {-7, 0, 1, 5, 1000}) EXPECT_EQ(ramanujan_sum(1, h), 1);
  EXPECT_EQ(ramanujan_sum(6, 0), 2);
  EXPECT_EQ(ramanujan_sum(4, 2), -2);
  EXPECT_EQ(ramanujan_sum(5, 3), -1);
}

TEST(RamanujanSum, ClosedFormMatchesExponentialSum) {
  const auto t = build_arith_tables(200);
  for (std::uint64_t k = 1; k <= 200; ++k) {
    for (std::int64_t h = -200; h <= 200; ++h) {
      const double direct = ramanujan_direct(k, h);
      const auto c = ramanujan_sum(k, h);
      ASSERT_LT(std::abs(direct - static_cast<double>(c)), 1e-9) << k << " " << h;
      ASSERT_EQ(std::llround(direct), c);
      ASSERT_EQ(ramanujan_sum(k, h, t), c);
    }
  }
}

TEST(RamanujanSum, MultiplicativeInModulus) {
  for (std::uint64_t k1 = 1; k1 <= 100; ++k1) {
    for (std::uint64_t k2 = 1; k2 <= 100; ++k2) {
      if (std::gcd(k1, k2) != 1) continue;
      for (std::int64_t h : {0, 1, 6, 12, 30, 97}) {
        ASSERT_EQ(ramanujan_sum(k1 * k2, h), ramanujan_sum(k1, h) * ramanujan_sum(k2, h));
      }
    }
  }
}

TEST(SigmaLog, Examples) {
  EXPECT_NEAR(sigma_log(6, -1.0, 0), 2.0, 1e-15);
  EXPECT_NEAR(sigma_log(4, -1.0, 1), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(sigma_log(1, 0.7, 0), 1.0);
  EXPECT_DOUBLE_EQ(sigma_log(1, 0.7, 1), 0.0);
  EXPECT_DOUBLE_EQ(sigma_log(1, 0.7, 2), 0.0);
  EXPECT_THROW(sigma_log(4, 1.0, 3), std::invalid_argument);
}

TEST(HFunction, TrivialModulusAndFactor) {
  EXPECT_EQ(h_complex({0.3, 1.0}, 1, {2.0, -4.0}), std::complex<double>(1.0, 0.0));
  EXPECT_NEAR(h_factor(6), 3.0, 1e-15);
  EXPECT_THROW(h_complex({0.0, 0.0}, 6, {2.0, 0.0}), std::domain_error);
}

TEST(HFunction, MatchesDirichletSeries) {
  // sum_n sigma_a(n r) n^{-s} / (zeta(s) zeta(s - a)) at real s, a; series summed far enough for 1e-6
  const double a = -0.5, s = 3.0;
  for (std::uint64_t r : {2ull, 6ull, 12ull}) {
    double lhs = 0.0, zs = 0.0, zsa = 0.0;
    for (std::uint64_t n = 1; n <= 200000; ++n) {
      const double nd = static_cast<double>(n);
      lhs += sigma_log(n * r, a, 0) * std::pow(nd, -s);
      zs += std::pow(nd, -s);
      zsa += std::pow(nd, -(s - a));
    }
    EXPECT_NEAR(lhs / (zs * zsa), h_complex(a, r, s).real(), 1e-6) << r;
  }
}

TEST(GFunction, Examples) {
  EXPECT_DOUBLE_EQ(g_of(1), 1.0);
  EXPECT_NEAR(g_of(4), 2.0, 1e-15);
  EXPECT_NEAR(g_of(12), 10.0 / 3.0, 1e-14);
}

TEST(HFactor, GrowthOverLogLogIsReported) {
  double worst = 0.0;
  const auto t = build_arith_tables(1'000'000);
  for (std::uint64_t n = 16; n <= 1'000'000; ++n) {
    const double v = static_cast<double>(n) / static_cast<double>(t.phi(n)) / std::log(std::log(static_cast<double>(n)));
    worst = std::max(worst, v);
  }
  RecordProperty("max_h_over_loglog", std::to_string(worst));
  EXPECT_TRUE(std::isfinite(worst));
  EXPECT_LT(worst, 10.0);
}
