#pragma once
// Fourier coefficients of the discriminant form Delta (weight 12, level 1)
// and the Rankin-Selberg partial sums of the normalized eigenvalues.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "apvar/arith.hpp"

namespace apvar {

using int128 = __int128;

class OverflowError : public std::overflow_error {
 public:
  OverflowError(const std::string& what, std::uint64_t index) : std::overflow_error(what), index_(index) {}
  /// Coefficient index at which the overflow occurred.
  std::uint64_t index() const { return index_; }

 private:
  std::uint64_t index_;
};

inline constexpr std::uint64_t kDeltaDefaultNMax = 200'000;
inline constexpr std::uint64_t kDeltaCap = 1'000'000;

namespace detail {

inline int128 checked_mul_add(int128 acc, int128 a, int128 b, std::uint64_t n) {
  int128 prod;
  if (__builtin_mul_overflow(a, b, &prod) || __builtin_add_overflow(acc, prod, &acc)) {
    throw OverflowError("delta coefficients: 128-bit overflow at n = " + std::to_string(n), n);
  }
  return acc;
}

}  // namespace detail

/// Decimal rendering of a 128-bit signed integer.
inline std::string to_string(int128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  std::string s;
  while (u) {
    s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  return {s.rbegin(), s.rend()};
}

/// Ramanujan tau(1..n_max) as the coefficients of q prod (1 - q^m)^24.
///
/// eta(q)^3 / q^{1/8} = sum_j (-1)^j (2j+1) q^{j(j+1)/2} is sparse, so the
/// 24th power is eight successive dense-by-sparse products truncated at
/// degree n_max - 1. Overflow is ruled out per product by an a-priori bound,
/// with a checked fallback that reports the offending index. Result index 0
/// is unused; index n holds tau(n).
inline std::vector<int128> delta_coefficients_exact(std::uint64_t n_max, std::uint64_t cap = kDeltaCap) {
  if (n_max < 1) throw std::invalid_argument("delta_coefficients_exact: n_max must be >= 1");
  if (n_max > cap) {
    throw std::length_error("delta_coefficients_exact: n_max " + std::to_string(n_max) + " exceeds cap " +
                            std::to_string(cap));
  }
  const std::uint64_t deg = n_max - 1;  // tau(n) is the q^{n-1} coefficient of prod (1-q^m)^24

  struct Term {
    std::uint64_t exp;
    std::int64_t coeff;
  };
  std::vector<Term> cube;
  for (std::uint64_t j = 0;; ++j) {
    const std::uint64_t e = j * (j + 1) / 2;
    if (e > deg) break;
    cube.push_back({e, (j % 2 ? -1 : 1) * static_cast<std::int64_t>(2 * j + 1)});
  }
  long double coeff_l1 = 0.0L;
  for (const auto& t : cube) coeff_l1 += std::abs(static_cast<long double>(t.coeff));

  std::vector<int128> acc(deg + 1, 0);
  for (const auto& t : cube) acc[t.exp] = t.coeff;
  std::vector<int128> next(deg + 1);
  for (int power = 2; power <= 8; ++power) {
    // every partial sum is bounded by max|acc| * sum|coeff|; below 2^126 no
    // step can overflow and the per-operation check is skipped
    long double acc_max = 0.0L;
    for (const auto v : acc) acc_max = std::max(acc_max, std::abs(static_cast<long double>(v)));
    const bool safe = acc_max * coeff_l1 < 0x1p126L;
    for (std::uint64_t i = 0; i <= deg; ++i) {
      int128 s = 0;
      if (safe) {
        for (const auto& t : cube) {
          if (t.exp > i) break;
          s += acc[i - t.exp] * t.coeff;
        }
      } else {
        for (const auto& t : cube) {
          if (t.exp > i) break;
          s = detail::checked_mul_add(s, acc[i - t.exp], t.coeff, i + 1);
        }
      }
      next[i] = s;
    }
    acc.swap(next);
  }

  std::vector<int128> tau(n_max + 1, 0);
  for (std::uint64_t n = 1; n <= n_max; ++n) tau[n] = acc[n - 1];
  return tau;
}

/// a(n) = tau(n) / n^{(k-1)/2}. Index 0 unused.
inline std::vector<double> hecke_normalized(const std::vector<int128>& tau_exact, int k = 12) {
  if (k < 4 || k % 2 != 0) throw std::invalid_argument("hecke_normalized: weight must be even and >= 4");
  std::vector<double> a(tau_exact.size(), 0.0);
  const double half = 0.5 * (k - 1);
  for (std::size_t n = 1; n < tau_exact.size(); ++n) {
    // long double keeps the 128-bit value to ~19 digits before the division
    const long double t = static_cast<long double>(tau_exact[n]);
    a[n] = static_cast<double>(t / std::pow(static_cast<long double>(n), static_cast<long double>(half)));
  }
  return a;
}

class HeckeTable {
 public:
  HeckeTable() = default;
  HeckeTable(std::vector<int128> tau_exact, int k = 12)
      : k_(k), tau_(std::move(tau_exact)), a_(hecke_normalized(tau_, k)) {}

  /// Test double: arbitrary normalized coefficients (index 0 unused), no exact data.
  static HeckeTable from_normalized(std::vector<double> a, int k = 12) {
    HeckeTable t;
    t.k_ = k;
    t.a_ = std::move(a);
    return t;
  }

  std::uint64_t n_max() const { return a_.empty() ? 0 : a_.size() - 1; }
  int weight() const { return k_; }
  bool has_exact() const { return !tau_.empty(); }

  double a(std::uint64_t n) const {
    if (n < 1 || n > n_max()) throw RangeError("hecke: index " + std::to_string(n) + " out of range");
    return a_[n];
  }
  int128 tau(std::uint64_t n) const {
    if (n < 1 || n >= tau_.size()) throw RangeError("hecke: index " + std::to_string(n) + " out of range");
    return tau_[n];
  }

  const std::vector<double>& a_array() const { return a_; }
  const std::vector<int128>& tau_array() const { return tau_; }

 private:
  int k_ = 12;
  std::vector<int128> tau_;
  std::vector<double> a_;
};

inline HeckeTable build_hecke_table(std::uint64_t n_max = kDeltaDefaultNMax, std::uint64_t cap = kDeltaCap) {
  return HeckeTable(delta_coefficients_exact(n_max, cap), 12);
}

/// sum_{n <= floor(x)} a(n)^2.
inline double rankin_partial_sum(double x, const HeckeTable& table) {
  if (!(x >= 1.0)) return 0.0;
  if (x > static_cast<double>(table.n_max())) {
    throw RangeError("rankin_partial_sum: x exceeds table n_max");
  }
  const auto n = static_cast<std::uint64_t>(std::floor(x));
  const auto& a = table.a_array();
  double s = 0.0;
  for (std::uint64_t i = 1; i <= n; ++i) s += a[i] * a[i];
  return s;
}

struct RankinFit {
  double c_hat = 0.0;
  double intercept = 0.0;
  std::vector<double> x;
  std::vector<double> partial;
  std::vector<double> residual;  // partial - (c_hat x + intercept)
  double max_rel_residual = 0.0; // max |residual| / x
};

/// Least-squares line through (x, sum_{n<=x} a(n)^2) on the given grid.
inline RankinFit estimate_rankin_residue(const std::vector<double>& x_grid, const HeckeTable& table) {
  if (x_grid.size() < 5) throw std::invalid_argument("estimate_rankin_residue: need at least 5 grid points");
  RankinFit fit;
  fit.x = x_grid;
  std::sort(fit.x.begin(), fit.x.end());
  if (fit.x.front() == fit.x.back()) throw std::invalid_argument("estimate_rankin_residue: degenerate grid");
  if (fit.x.back() > static_cast<double>(table.n_max())) throw RangeError("estimate_rankin_residue: grid exceeds table");

  // one pass over n for all grid points
  const auto& a = table.a_array();
  double s = 0.0;
  std::uint64_t n = 0;
  for (double x : fit.x) {
    const auto upto = static_cast<std::uint64_t>(std::floor(x));
    while (n < upto) {
      ++n;
      s += a[n] * a[n];
    }
    fit.partial.push_back(s);
  }

  const double m = static_cast<double>(fit.x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    sx += fit.x[i];
    sy += fit.partial[i];
  }
  const double mx = sx / m, my = sy / m;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    sxx += (fit.x[i] - mx) * (fit.x[i] - mx);
    sxy += (fit.x[i] - mx) * (fit.partial[i] - my);
  }
  fit.c_hat = sxy / sxx;
  fit.intercept = my - fit.c_hat * mx;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    const double r = fit.partial[i] - (fit.c_hat * fit.x[i] + fit.intercept);
    fit.residual.push_back(r);
    fit.max_rel_residual = std::max(fit.max_rel_residual, std::abs(r) / fit.x[i]);
  }
  return fit;
}

}  // namespace apvar
