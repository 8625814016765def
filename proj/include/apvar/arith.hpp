#pragma once
// Exact arithmetic functions on [1, n_max]: divisor count, totient, Moebius,
// smallest prime factor; Ramanujan sums and the divisor-log sums used by the
// Dirichlet-series side of the variance computations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace apvar {

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Largest table size accepted by build_arith_tables (about 280 MB resident).
inline constexpr std::uint64_t kArithTableCap = 20'000'000;

struct PrimePower {
  std::uint64_t p;
  int e;
};

/// Sieved multiplicative data. Arrays are 1-indexed; slot 0 is unused.
class ArithTables {
 public:
  ArithTables() = default;

  std::uint64_t n_max() const { return n_max_; }

  std::uint32_t tau(std::uint64_t n) const { return tau_[check(n)]; }
  std::uint64_t phi(std::uint64_t n) const { return phi_[check(n)]; }
  int mu(std::uint64_t n) const { return mu_[check(n)]; }
  std::uint32_t spf(std::uint64_t n) const { return spf_[check(n)]; }

  const std::vector<std::uint32_t>& tau_array() const { return tau_; }
  const std::vector<std::uint64_t>& phi_array() const { return phi_; }
  const std::vector<std::int8_t>& mu_array() const { return mu_; }
  const std::vector<std::uint32_t>& spf_array() const { return spf_; }

  /// Factorization via the spf chain, primes increasing.
  std::vector<PrimePower> factor(std::uint64_t n) const {
    check(n);
    std::vector<PrimePower> out;
    while (n > 1) {
      const std::uint64_t p = spf_[n];
      int e = 0;
      while (n % p == 0) {
        n /= p;
        ++e;
      }
      out.push_back({p, e});
    }
    return out;
  }

  friend ArithTables build_arith_tables(std::uint64_t n_max, std::uint64_t cap);
  friend ArithTables arith_tables_from_arrays(std::vector<std::uint32_t> tau, std::vector<std::int8_t> mu,
                                              std::vector<std::uint64_t> phi);

 private:
  std::uint64_t check(std::uint64_t n) const {
    if (n < 1 || n > n_max_) {
      throw RangeError("arith: index " + std::to_string(n) + " outside [1, " + std::to_string(n_max_) + "]");
    }
    return n;
  }

  std::uint64_t n_max_ = 0;
  std::vector<std::uint32_t> tau_;
  std::vector<std::uint64_t> phi_;
  std::vector<std::int8_t> mu_;
  std::vector<std::uint32_t> spf_;
};

/// Linear sieve. tau is tracked through the exponent of the smallest prime.
inline ArithTables build_arith_tables(std::uint64_t n_max, std::uint64_t cap = kArithTableCap) {
  if (n_max < 1) throw std::invalid_argument("build_arith_tables: n_max must be >= 1");
  if (n_max > cap) {
    throw CapacityError("build_arith_tables: n_max " + std::to_string(n_max) + " exceeds cap " +
                        std::to_string(cap));
  }
  ArithTables t;
  t.n_max_ = n_max;
  t.tau_.assign(n_max + 1, 0);
  t.phi_.assign(n_max + 1, 0);
  t.mu_.assign(n_max + 1, 0);
  t.spf_.assign(n_max + 1, 0);
  std::vector<std::uint32_t> spf_exp(n_max + 1, 0);
  std::vector<std::uint32_t> primes;

  t.tau_[1] = 1;
  t.phi_[1] = 1;
  t.mu_[1] = 1;
  t.spf_[1] = 1;
  for (std::uint64_t i = 2; i <= n_max; ++i) {
    if (t.spf_[i] == 0) {
      t.spf_[i] = static_cast<std::uint32_t>(i);
      primes.push_back(static_cast<std::uint32_t>(i));
      t.tau_[i] = 2;
      t.phi_[i] = i - 1;
      t.mu_[i] = -1;
      spf_exp[i] = 1;
    }
    for (std::uint32_t p : primes) {
      const std::uint64_t m = i * p;
      if (p > t.spf_[i] || m > n_max) break;
      t.spf_[m] = p;
      if (p == t.spf_[i]) {
        spf_exp[m] = spf_exp[i] + 1;
        t.tau_[m] = t.tau_[i] / (spf_exp[i] + 1) * (spf_exp[m] + 1);
        t.phi_[m] = t.phi_[i] * p;
        t.mu_[m] = 0;
      } else {
        spf_exp[m] = 1;
        t.tau_[m] = t.tau_[i] * 2;
        t.phi_[m] = t.phi_[i] * (p - 1);
        t.mu_[m] = static_cast<std::int8_t>(-t.mu_[i]);
      }
    }
  }
  return t;
}

/// Rebuilds tables from persisted tau/mu/phi arrays (index 0 unused). spf is
/// recomputed since the cache does not store it.
inline ArithTables arith_tables_from_arrays(std::vector<std::uint32_t> tau, std::vector<std::int8_t> mu,
                                            std::vector<std::uint64_t> phi) {
  if (tau.size() < 2 || tau.size() != mu.size() || tau.size() != phi.size()) {
    throw std::invalid_argument("arith_tables_from_arrays: inconsistent array sizes");
  }
  ArithTables t;
  t.n_max_ = tau.size() - 1;
  t.tau_ = std::move(tau);
  t.mu_ = std::move(mu);
  t.phi_ = std::move(phi);
  t.spf_.assign(t.n_max_ + 1, 0);
  t.spf_[1] = 1;
  for (std::uint64_t i = 2; i <= t.n_max_; ++i) {
    if (t.spf_[i] != 0) continue;
    for (std::uint64_t j = i; j <= t.n_max_; j += i) {
      if (t.spf_[j] == 0) t.spf_[j] = static_cast<std::uint32_t>(i);
    }
  }
  return t;
}

/// Trial-division factorization for values beyond any table.
inline std::vector<PrimePower> factor_trial(std::uint64_t n) {
  if (n < 1) throw std::invalid_argument("factor_trial: n must be >= 1");
  std::vector<PrimePower> out;
  for (std::uint64_t p = 2; p * p <= n; p += (p == 2 ? 1 : 2)) {
    if (n % p) continue;
    int e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    out.push_back({p, e});
  }
  if (n > 1) out.push_back({n, 1});
  return out;
}

inline std::vector<std::uint64_t> divisors_from_factors(const std::vector<PrimePower>& fac) {
  std::vector<std::uint64_t> ds{1};
  for (const auto& [p, e] : fac) {
    const std::size_t base = ds.size();
    std::uint64_t pk = 1;
    for (int k = 1; k <= e; ++k) {
      pk *= p;
      for (std::size_t i = 0; i < base; ++i) ds.push_back(ds[i] * pk);
    }
  }
  std::sort(ds.begin(), ds.end());
  return ds;
}

/// Sorted divisors of n, 1 <= n <= tables.n_max().
inline std::vector<std::uint64_t> divisors(std::uint64_t n, const ArithTables& tables) {
  return divisors_from_factors(tables.factor(n));
}

/// Sorted divisors of n without a table.
inline std::vector<std::uint64_t> divisors(std::uint64_t n) { return divisors_from_factors(factor_trial(n)); }

inline int moebius(std::uint64_t n) {
  int m = 1;
  for (const auto& [p, e] : factor_trial(n)) {
    if (e > 1) return 0;
    m = -m;
  }
  return m;
}

inline std::uint64_t totient(std::uint64_t n) {
  std::uint64_t r = n;
  for (const auto& pp : factor_trial(n)) r = r / pp.p * (pp.p - 1);
  return r;
}

/// c_k(h) = sum over d | gcd(k, |h|) of mu(k/d) d. c_k(0) = phi(k).
inline std::int64_t ramanujan_sum(std::uint64_t k, std::int64_t h) {
  if (k < 1) throw std::invalid_argument("ramanujan_sum: k must be >= 1");
  const std::uint64_t ah = static_cast<std::uint64_t>(h < 0 ? -h : h);
  const std::uint64_t g = ah == 0 ? k : std::gcd(k, ah);
  std::int64_t s = 0;
  for (std::uint64_t d : divisors(g)) s += moebius(k / d) * static_cast<std::int64_t>(d);
  return s;
}

/// Table-backed variant for hot loops; requires k <= tables.n_max().
inline std::int64_t ramanujan_sum(std::uint64_t k, std::int64_t h, const ArithTables& tables) {
  const std::uint64_t ah = static_cast<std::uint64_t>(h < 0 ? -h : h);
  const std::uint64_t g = ah == 0 ? k : std::gcd(k, ah);
  std::int64_t s = 0;
  for (std::uint64_t d : divisors(g, tables)) s += tables.mu(k / d) * static_cast<std::int64_t>(d);
  return s;
}

/// sum over d | n of d^a log(d)^k, k in {0, 1, 2}.
inline double sigma_log(std::uint64_t n, double a, int k) {
  if (k < 0 || k > 2) throw std::invalid_argument("sigma_log: k must be 0, 1 or 2");
  if (n < 1) throw std::invalid_argument("sigma_log: n must be >= 1");
  double s = 0.0;
  for (std::uint64_t d : divisors(n)) {
    const double ld = std::log(static_cast<double>(d));
    double term = std::pow(static_cast<double>(d), a);
    for (int i = 0; i < k; ++i) term *= ld;
    s += term;
  }
  return s;
}

/// Euler factor correction h(a, r, s) making sum_n sigma_a(nr) n^{-s} = zeta(s) zeta(s-a) h(a, r, s).
inline std::complex<double> h_complex(std::complex<double> a, std::uint64_t r, std::complex<double> s) {
  if (a == std::complex<double>(0.0, 0.0)) throw std::domain_error("h_complex: a = 0 is a pole");
  if (r < 1) throw std::invalid_argument("h_complex: r must be >= 1");
  std::complex<double> prod(1.0, 0.0);
  for (const auto& [p, e] : factor_trial(r)) {
    const double lp = std::log(static_cast<double>(p));
    const auto pa = std::exp(a * lp);
    const auto pav = std::exp(a * static_cast<double>(e + 1) * lp);
    const auto factor = 1.0 - std::exp(-(s - a) * lp) - pav + std::exp(-s * lp) * pav;
    prod *= factor / (1.0 - pa);
  }
  return prod;
}

/// prod over p | r of (1 + 1/(p-1)) = r / phi(r).
inline double h_factor(std::uint64_t r) {
  double prod = 1.0;
  for (const auto& pp : factor_trial(r)) prod *= 1.0 + 1.0 / static_cast<double>(pp.p - 1);
  return prod;
}

/// g(q) = sum over r | q of phi(r)/r.
inline double g_of(std::uint64_t q) {
  if (q < 1) throw std::invalid_argument("g_of: q must be >= 1");
  double s = 0.0;
  for (std::uint64_t r : divisors(q)) s += static_cast<double>(totient(r)) / static_cast<double>(r);
  return s;
}

}  // namespace apvar
