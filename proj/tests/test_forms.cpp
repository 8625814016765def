#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "apvar/arith.hpp"
#include "apvar/forms.hpp"

using namespace apvar;

namespace {

// q prod_{m}(1 - q^m)^24 by repeated multiplication with (1 - q^m).
std::vector<int128> tau_naive(std::size_t n_max) {
  std::vector<int128> c(n_max, 0);  // c[j] = coefficient of q^j in prod (1 - q^m)^24
  c[0] = 1;
  for (std::size_t m = 1; m < n_max; ++m) {
    for (int rep = 0; rep < 24; ++rep) {
      for (std::size_t j = n_max - 1; j >= m; --j) c[j] -= c[j - m];
    }
  }
  std::vector<int128> tau(n_max + 1, 0);
  for (std::size_t n = 1; n <= n_max; ++n) tau[n] = c[n - 1];
  return tau;
}

int128 pow128(int128 b, int e) {
  int128 r = 1;
  while (e-- > 0) r *= b;
  return r;
}

const HeckeTable& table_1e4() {
  static const HeckeTable t = build_hecke_table(10'000);
  return t;
}

}  // namespace

TEST(Delta, FirstCoefficients) {
  const auto tau = delta_coefficients_exact(10);
  EXPECT_TRUE(tau[1] == 1);
  EXPECT_TRUE(tau[2] == -24);
  EXPECT_TRUE(tau[3] == 252);
  EXPECT_TRUE(tau[6] == -6048);
  EXPECT_EQ(to_string(tau[6]), "-6048");
}

TEST(Delta, MatchesNaiveProductExpansion) {
  const auto fast = delta_coefficients_exact(400);
  const auto slow = tau_naive(400);
  for (std::size_t n = 1; n <= 400; ++n) ASSERT_TRUE(fast[n] == slow[n]) << n << " " << to_string(fast[n]);
}

TEST(Delta, MultiplicativeOnCoprimePairs) {
  const auto& t = table_1e4();
  for (std::uint64_t m = 2; m <= 100; ++m) {
    for (std::uint64_t n = m + 1; m * n <= 10'000; ++n) {
      if (std::gcd(m, n) != 1) continue;
      ASSERT_TRUE(t.tau(m * n) == t.tau(m) * t.tau(n)) << m << " " << n;
    }
  }
}

TEST(Delta, HeckeRecursionAtPrimePowers) {
  const auto& t = table_1e4();
  const auto ar = build_arith_tables(10'000);
  for (std::uint64_t p = 2; p <= 10'000; ++p) {
    if (ar.spf(p) != p) continue;
    const int128 p11 = pow128(static_cast<int128>(p), 11);
    std::uint64_t pk_prev = 1, pk = p;
    while (pk <= 10'000 / p) {
      const std::uint64_t next = pk * p;
      ASSERT_TRUE(t.tau(next) == t.tau(p) * t.tau(pk) - p11 * t.tau(pk_prev)) << next;
      pk_prev = pk;
      pk = next;
    }
  }
}

TEST(Delta, NormalizedRecursionAndDeligne) {
  const auto& t = table_1e4();
  const auto ar = build_arith_tables(10'000);
  for (std::uint64_t p = 2; p <= 10'000; ++p) {
    if (ar.spf(p) != p) continue;
    ASSERT_LE(std::abs(t.a(p)), 2.0) << p;
    if (p > 100) continue;
    std::uint64_t pk_prev = 1, pk = p;
    while (pk <= 10'000 / p) {
      const std::uint64_t next = pk * p;
      EXPECT_NEAR(t.a(next), t.a(p) * t.a(pk) - t.a(pk_prev), 1e-10) << next;
      pk_prev = pk;
      pk = next;
    }
  }
}

TEST(Delta, CapEnforced) {
  EXPECT_THROW(delta_coefficients_exact(1000, 100), std::length_error);
  EXPECT_THROW(delta_coefficients_exact(0), std::invalid_argument);
}

TEST(Hecke, NormalizedExamples) {
  const auto& t = table_1e4();
  EXPECT_DOUBLE_EQ(t.a(1), 1.0);
  EXPECT_NEAR(t.a(2), -24.0 / std::pow(2.0, 5.5), 1e-15);
  EXPECT_NEAR(t.a(2), -0.530330, 1e-6);
  EXPECT_THROW(t.a(0), RangeError);
  EXPECT_THROW(t.a(10'001), RangeError);
}

TEST(Rankin, PartialSums) {
  const auto& t = table_1e4();
  EXPECT_DOUBLE_EQ(rankin_partial_sum(1.0, t), 1.0);
  EXPECT_NEAR(rankin_partial_sum(2.0, t), 1.0 + 576.0 / 2048.0, 1e-15);
  EXPECT_NEAR(rankin_partial_sum(2.0, t), 1.28125, 1e-12);
  EXPECT_THROW(rankin_partial_sum(20'000.0, t), RangeError);
}

TEST(Rankin, ConstantTestDoubleGivesUnitSlope) {
  const auto t = HeckeTable::from_normalized(std::vector<double>(1001, 1.0));
  const auto fit = estimate_rankin_residue({100, 200, 300, 500, 800, 1000}, t);
  EXPECT_DOUBLE_EQ(fit.c_hat, 1.0);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-9);
}

TEST(Rankin, ResidualsShrinkRelativeToX) {
  const auto& t = table_1e4();
  const auto fit = estimate_rankin_residue({1000, 2000, 3000, 5000, 7000, 10'000}, t);
  EXPECT_GT(fit.c_hat, 0.3);
  EXPECT_LT(fit.c_hat, 0.5);
  EXPECT_LT(fit.max_rel_residual, 0.05);
  RecordProperty("c_hat_1e3_1e4", std::to_string(fit.c_hat));
}

TEST(Rankin, RejectsBadGrids) {
  const auto& t = table_1e4();
  EXPECT_THROW(estimate_rankin_residue({1, 2, 3}, t), std::invalid_argument);
  EXPECT_THROW(estimate_rankin_residue({5, 5, 5, 5, 5}, t), std::invalid_argument);
  EXPECT_THROW(estimate_rankin_residue({1e3, 2e3, 3e3, 4e3, 2e4}, t), RangeError);
}
