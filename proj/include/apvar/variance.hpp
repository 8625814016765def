#pragma once
// Exact variances in arithmetic progressions, the divisor main term
// MT(b, x, q), smooth variances and their dual (Voronoi side) split into a
// diagonal main term and an off-diagonal part, and the regime comparator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apvar/arith.hpp"
#include "apvar/forms.hpp"
#include "apvar/specfun/omega.hpp"
#include "apvar/specfun/smooth_weight.hpp"
#include "apvar/voronoi.hpp"

namespace apvar {

// ---------------------------------------------------------------- exact sums

namespace detail {

template <class U>
std::vector<double> bucket_sums(U&& u, std::uint64_t n_hi, std::uint64_t q) {
  std::vector<double> s(q, 0.0);
  for (std::uint64_t n = 1; n <= n_hi; ++n) s[n % q] += u(n);
  return s;
}

inline std::uint64_t floor_index(double x) { return x < 1.0 ? 0 : static_cast<std::uint64_t>(std::floor(x)); }

}  // namespace detail

/// A(X, q) = sum_b |sum_{n <= X, n = b mod q} a(n)|^2.
inline double variance_cusp_exact(double X, std::uint64_t q, const HeckeTable& table) {
  if (q < 1) throw std::invalid_argument("variance_cusp_exact: q must be >= 1");
  const auto n_hi = detail::floor_index(X);
  if (n_hi > table.n_max()) throw RangeError("variance_cusp_exact: X beyond table");
  const auto& a = table.a_array();
  const auto s = detail::bucket_sums([&](std::uint64_t n) { return a[n]; }, n_hi, q);
  double v = 0.0;
  for (double t : s) v += t * t;
  return v;
}

struct MainTermDivisor {
  std::uint64_t b = 1;
  double x = 0.0;
  std::uint64_t q = 1;
  double value = 0.0;
};

/// MT(b, x, q) = (1/q) sum_{r | (q,b)} phi(q/r)/(q/r) x (log x + 2 gamma - 1 - 2 log r)
///             - (2/q) sum_{r | (q,b)} sum_{d | q/r} mu(d) log(d) / d x.
inline MainTermDivisor mt_divisor(std::uint64_t b, double x, std::uint64_t q) {
  if (q < 1 || b < 1 || b > q) throw std::invalid_argument("mt_divisor: need 1 <= b <= q");
  const double gamma = euler_mascheroni();
  const double lx = std::log(x);
  const double qd = static_cast<double>(q);
  double first = 0.0, second = 0.0;
  for (const auto r : divisors(std::gcd(q, b))) {
    const std::uint64_t m = q / r;
    first += static_cast<double>(totient(m)) / static_cast<double>(m) *
             (lx + 2.0 * gamma - 1.0 - 2.0 * std::log(static_cast<double>(r)));
    for (const auto d : divisors(m)) {
      const int mu = moebius(d);
      if (mu != 0 && d > 1) second += mu * std::log(static_cast<double>(d)) / static_cast<double>(d);
    }
  }
  return {b, x, q, x * first / qd - 2.0 * x * second / qd};
}

/// A(x, q; tau) = sum_b |sum_{n <= x, n = b mod q} tau(n) - MT(b, x, q)|^2.
inline double variance_divisor_exact(double x, std::uint64_t q, const ArithTables& tables) {
  if (q < 1) throw std::invalid_argument("variance_divisor_exact: q must be >= 1");
  const auto n_hi = detail::floor_index(x);
  if (n_hi > tables.n_max()) throw RangeError("variance_divisor_exact: x beyond table");
  const auto& tau = tables.tau_array();
  const auto s = detail::bucket_sums([&](std::uint64_t n) { return static_cast<double>(tau[n]); }, n_hi, q);
  std::map<std::uint64_t, double> mt_by_gcd;  // MT depends on b only through (q, b)
  double v = 0.0;
  for (std::uint64_t b = 1; b <= q; ++b) {
    const std::uint64_t g = std::gcd(q, b);
    auto it = mt_by_gcd.find(g);
    if (it == mt_by_gcd.end()) it = mt_by_gcd.emplace(g, mt_divisor(b, x, q).value).first;
    const double d = s[b % q] - it->second;
    v += d * d;
  }
  return v;
}

// ------------------------------------------------------------- H parameters

/// (1/3) max(q^{16/27} X^{10/27}, q), floored at X^{3/5}.
inline double h_default_cusp(double X, double q) {
  const double h = std::max(std::pow(q, 16.0 / 27.0) * std::pow(X, 10.0 / 27.0), q) / 3.0;
  return std::max(h, std::pow(X, 0.6));
}

/// (1/3) max(q^{5/9} X^{7/18}, q), floored at X^{3/5}.
inline double h_default_divisor(double X, double q) {
  const double h = std::max(std::pow(q, 5.0 / 9.0) * std::pow(X, 7.0 / 18.0), q) / 3.0;
  return std::max(h, std::pow(X, 0.6));
}

// ---------------------------------------------------------- smooth variances

/// sum_b |sum_{n = b mod q} a(n) w(n)|^2.
inline double smooth_variance_cusp(std::uint64_t q, const SmoothWeight& w, const HeckeTable& table) {
  const auto n_hi = static_cast<std::uint64_t>(std::ceil(w.X()));
  if (n_hi > table.n_max() + 1) throw RangeError("smooth_variance_cusp: X beyond table");
  const auto& a = table.a_array();
  const auto s = detail::bucket_sums(
      [&](std::uint64_t n) { return n <= table.n_max() ? a[n] * w(static_cast<double>(n)) : 0.0; }, n_hi, q);
  double v = 0.0;
  for (double t : s) v += t * t;
  return v;
}

/// T_w(b, q) = (1/q) sum_{r | q} c_r(b) (1/r) int (log x + 2 gamma - 2 log r) w(x) dx,
/// the part of sum_{n = b mod q} tau(n) w(n) carried by the Voronoi main terms.
inline std::vector<double> smooth_divisor_main_terms(std::uint64_t q, const SmoothWeight& w) {
  const double gamma = euler_mascheroni();
  const auto divs = divisors(q);
  std::vector<double> per_r;
  for (const auto r : divs) {
    const double rd = static_cast<double>(r);
    per_r.push_back(log_weight_integral(w, 2.0 * gamma - 2.0 * std::log(rd)) / rd);
  }
  std::vector<double> t(q, 0.0);
  for (std::uint64_t b = 0; b < q; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < divs.size(); ++i) {
      s += static_cast<double>(ramanujan_sum(divs[i], static_cast<std::int64_t>(b))) * per_r[i];
    }
    t[b] = s / static_cast<double>(q);
  }
  return t;
}

/// sum_b |sum_{n = b mod q} tau(n) w(n) - T_w(b, q)|^2.
inline double smooth_variance_divisor(std::uint64_t q, const SmoothWeight& w, const ArithTables& tables) {
  const auto n_hi = static_cast<std::uint64_t>(std::ceil(w.X()));
  if (n_hi > tables.n_max() + 1) throw RangeError("smooth_variance_divisor: X beyond table");
  const auto& tau = tables.tau_array();
  const auto s = detail::bucket_sums(
      [&](std::uint64_t n) {
        return n <= tables.n_max() ? static_cast<double>(tau[n]) * w(static_cast<double>(n)) : 0.0;
      },
      n_hi, q);
  const auto t = smooth_divisor_main_terms(q, w);
  double v = 0.0;
  for (std::uint64_t b = 0; b < q; ++b) v += (s[b] - t[b]) * (s[b] - t[b]);
  return v;
}

// ------------------------------------------------------------ dual side

struct DualOptions {
  double rel_tol = 1e-8;       // per-r convergence of the dual quadratic forms
  double kappa_start = 4.0;    // first cutoff n = kappa r^2 X / H^2
  double quad_tol = 1e-12;     // omega quadrature, relative to X
  int max_doublings = 16;
  bool diagonal_only = false;  // main terms need only the diagonal to converge
};

/// Defaults for main-term-only sums: the diagonal converges like omega^2,
/// so a looser per-r tolerance already pins the value well below 1e-5.
inline DualOptions main_term_options() {
  DualOptions o;
  o.rel_tol = 1e-6;
  o.diagonal_only = true;
  return o;
}

/// Per-modulus record of a dual quadratic form.
struct DualTerm {
  std::uint64_t r = 1;
  std::uint64_t n_cut = 0;
  std::uint64_t n_cut_design = 0;
  double diag = 0.0;       // sum u_n^2 (first kind)
  double diag2 = 0.0;      // sum v_n^2 (second kind, divisor only)
  double full = 0.0;       // sum_{e | r} mu(r/e) e sum_c S_c^2
  double full2 = 0.0;      // same for v
  double cross = 0.0;      // sum_{e | r} mu(r/e) e sum_c U_c V_{-c}
  double last_change = 0.0;
  std::uint64_t n_significant2 = 0;  // last n with v_n above 1e-16 max|v|
  bool noise_limited = false;        // stopped once omega fell below its quadrature tolerance
};

/// Omega values through a lazily grown Chebyshev table shared by all r | q.
class OmegaSource {
 public:
  OmegaSource(const OmegaKind& kind, const SmoothWeight& w, double alpha_lo, double quad_tol)
      : table_(kind, w, alpha_lo, quad_tol * w.X()), abs_tol_(quad_tol * w.X()) {}
  void ensure(double alpha_hi) { table_.ensure(alpha_hi); }
  double operator()(double alpha) const { return table_(alpha); }
  const OmegaTable& table() const { return table_; }
  double abs_tol() const { return abs_tol_; }

 private:
  OmegaTable table_;
  double abs_tol_;
};

namespace detail {

struct BucketSet {
  std::vector<std::uint64_t> e;  // divisors of r
  std::vector<int> mu;           // mu(r / e)
  std::vector<std::vector<double>> s;
};

inline BucketSet make_buckets(std::uint64_t r) {
  BucketSet b;
  for (const auto e : divisors(r)) {
    const int m = moebius(r / e);
    if (m == 0) continue;
    b.e.push_back(e);
    b.mu.push_back(m);
    b.s.emplace_back(e, 0.0);
  }
  return b;
}

inline double bucket_form(const BucketSet& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < b.e.size(); ++i) {
    double sq = 0.0;
    for (double v : b.s[i]) sq += v * v;
    total += b.mu[i] * static_cast<double>(b.e[i]) * sq;
  }
  return total;
}

inline double bucket_cross(const BucketSet& u, const BucketSet& v) {
  double total = 0.0;
  for (std::size_t i = 0; i < u.e.size(); ++i) {
    const std::uint64_t e = u.e[i];
    double c = 0.0;
    for (std::uint64_t k = 0; k < e; ++k) c += u.s[i][k] * v.s[i][(e - k) % e];
    total += u.mu[i] * static_cast<double>(e) * c;
  }
  return total;
}

inline std::uint64_t initial_cut(std::uint64_t r, const SmoothWeight& w, const DualOptions& opt) {
  const double rd = static_cast<double>(r);
  const double scale_n = rd * rd * w.X() / (w.H() * w.H());
  return std::max<std::uint64_t>(8, static_cast<std::uint64_t>(std::ceil(opt.kappa_start * scale_n)));
}

// Rough size of the main term, (1/q) sum_r phi(r)/r^2 sum_{n <= initial cut} coef^2 omega^2,
// used to set an absolute floor for moduli whose own forms are tiny.
template <class Coef>
double pilot_scale(std::uint64_t q, Coef&& coef, std::uint64_t n_avail, const SmoothWeight& w, OmegaSource& om1,
                   OmegaSource* om2, const DualOptions& opt) {
  double s = 0.0;
  for (const auto r : divisors(q)) {
    const double rd = static_cast<double>(r);
    const std::uint64_t cut = std::min(initial_cut(r, w, opt), n_avail);
    om1.ensure(std::sqrt(static_cast<double>(cut)) / rd);
    if (om2) om2->ensure(std::sqrt(static_cast<double>(cut)) / rd);
    double d = 0.0;
    for (std::uint64_t n = 1; n <= cut; ++n) {
      const double alpha = std::sqrt(static_cast<double>(n)) / rd;
      const double c = coef(n), o1 = om1(alpha), o2 = om2 ? (*om2)(alpha) : 0.0;
      d += c * c * (o1 * o1 + o2 * o2);
    }
    s += static_cast<double>(totient(r)) / (rd * rd) * d;
  }
  return s / static_cast<double>(q);
}

// Grows n_cut by doubling until diag/full (and the second kind, if any)
// change by less than rel_tol of their scale plus abs_floor.
template <class Coef>
DualTerm dual_term(std::uint64_t r, Coef&& coef, std::uint64_t n_avail, const SmoothWeight& w, OmegaSource& om1,
                   OmegaSource* om2, const DualOptions& opt, double abs_floor = 0.0) {
  DualTerm t;
  t.r = r;
  const double rd = static_cast<double>(r);
  t.n_cut_design = static_cast<std::uint64_t>(std::ceil(rd * rd * w.X() / (w.H() * w.H())));
  std::uint64_t cut = initial_cut(r, w, opt);
  BucketSet bu = make_buckets(r), bv = make_buckets(r);
  std::uint64_t done = 0;
  double vmax = 0.0;
  double prev_diag = 0.0, prev_full = 0.0, prev_diag2 = 0.0, prev_full2 = 0.0, prev_cross = 0.0;
  for (int round = 0;; ++round) {
    if (cut > n_avail) {
      throw RangeError("dual sum for r=" + std::to_string(r) + " needs n up to " + std::to_string(cut) +
                       " but the table stops at " + std::to_string(n_avail));
    }
    const double alpha_hi = std::sqrt(static_cast<double>(cut)) / rd;
    om1.ensure(alpha_hi);
    if (om2) om2->ensure(alpha_hi);
    double block_om = 0.0;  // largest |omega| / tolerance in this block, either kind
    for (std::uint64_t n = done + 1; n <= cut; ++n) {
      const double alpha = std::sqrt(static_cast<double>(n)) / rd;
      const double c = coef(n);
      const double o1 = om1(alpha);
      block_om = std::max(block_om, std::abs(o1) / om1.abs_tol());
      const double u = c * o1;
      t.diag += u * u;
      for (std::size_t i = 0; i < bu.e.size(); ++i) bu.s[i][n % bu.e[i]] += u;
      if (om2) {
        const double o2 = (*om2)(alpha);
        block_om = std::max(block_om, std::abs(o2) / om2->abs_tol());
        const double v = c * o2;
        t.diag2 += v * v;
        for (std::size_t i = 0; i < bv.e.size(); ++i) bv.s[i][n % bv.e[i]] += v;
        vmax = std::max(vmax, std::abs(v));
        if (std::abs(v) > 1e-16 * vmax) t.n_significant2 = n;
      }
    }
    done = cut;
    if (!opt.diagonal_only) {
      t.full = bucket_form(bu);
      if (om2) {
        t.full2 = bucket_form(bv);
        t.cross = bucket_cross(bu, bv);
      }
    }
    const double change = std::abs(t.diag - prev_diag) + std::abs(t.full - prev_full) +
                          std::abs(t.diag2 - prev_diag2) + std::abs(t.full2 - prev_full2) +
                          std::abs(t.cross - prev_cross);
    const double scale = t.diag + t.diag2 + std::abs(t.full) + std::abs(t.full2) + std::abs(t.cross);
    t.last_change = change;
    t.n_cut = done;
    if (round > 0 && change <= opt.rel_tol * scale + abs_floor) break;
    // a block below the omega accuracy only adds quadrature noise to the linear sums
    if (round > 0 && block_om <= 1.0) {
      t.noise_limited = true;
      break;
    }
    if (round >= opt.max_doublings) {
      throw std::runtime_error("dual sum for r=" + std::to_string(r) + " did not converge by n=" +
                               std::to_string(done));
    }
    prev_diag = t.diag;
    prev_full = t.full;
    prev_diag2 = t.diag2;
    prev_full2 = t.full2;
    prev_cross = t.cross;
    cut *= 2;
  }
  return t;
}

}  // namespace detail

/// Cusp smooth variance on the dual side:
///   A_w = MT + E, MT = (1/q) sum_{r | q} phi(r)/r^2 sum_n a(n)^2 omega_J(sqrt(n)/r)^2,
///   E = (1/q) sum_{dr | q} mu(d)/(d^2 r) sum_{n = m mod r, n != m} a(n) a(m) omega_J(.) omega_J(.).
struct CuspSplit {
  std::uint64_t q = 1;
  double mt = 0.0;
  double offdiag = 0.0;
  double total = 0.0;
  std::vector<DualTerm> terms;
};

inline CuspSplit cusp_split(std::uint64_t q, const SmoothWeight& w, const HeckeTable& table,
                            const DualOptions& opt = {}) {
  CuspSplit out;
  out.q = q;
  OmegaSource om(OmegaKind::J(table.weight()), w, 0.5 / static_cast<double>(q), opt.quad_tol);
  const auto& a = table.a_array();
  const double qd = static_cast<double>(q);
  auto coef = [&](std::uint64_t n) { return a[n]; };
  const double pilot = detail::pilot_scale(q, coef, table.n_max(), w, om, nullptr, opt);
  for (const auto r : divisors(q)) {
    const double r2 = static_cast<double>(r) * static_cast<double>(r);
    auto t = detail::dual_term(r, coef, table.n_max(), w, om, nullptr, opt, opt.rel_tol * pilot * qd * r2);
    out.mt += static_cast<double>(totient(r)) / r2 * t.diag / qd;
    if (!opt.diagonal_only) out.offdiag += (t.full - static_cast<double>(totient(r)) * t.diag) / r2 / qd;
    out.terms.push_back(t);
  }
  out.total = out.mt + out.offdiag;
  return out;
}

inline double mt_smooth_cusp(std::uint64_t q, const SmoothWeight& w, const HeckeTable& table,
                             DualOptions opt = main_term_options()) {
  opt.diagonal_only = true;
  return cusp_split(q, w, table, opt).mt;
}

/// Divisor smooth variance on the dual side: MT(Y) + E(Y) + MT(K) + E(K) + E'(Y, K).
struct DivisorSplit {
  std::uint64_t q = 1;
  double mt_y = 0.0, mt_k = 0.0;
  double e_y = 0.0, e_k = 0.0, e_yk = 0.0;
  double total = 0.0;
  std::vector<DualTerm> terms;
};

inline DivisorSplit divisor_split(std::uint64_t q, const SmoothWeight& w, const ArithTables& tables,
                                  const DualOptions& opt = {}) {
  DivisorSplit out;
  out.q = q;
  const double alpha_lo = 0.5 / static_cast<double>(q);
  OmegaSource oy(OmegaKind::Y(), w, alpha_lo, opt.quad_tol);
  OmegaSource ok(OmegaKind::K(), w, alpha_lo, opt.quad_tol);
  const auto& tau = tables.tau_array();
  const double qd = static_cast<double>(q);
  auto coef = [&](std::uint64_t n) { return static_cast<double>(tau[n]); };
  const double pilot = detail::pilot_scale(q, coef, tables.n_max(), w, oy, &ok, opt);
  for (const auto r : divisors(q)) {
    const double r2 = static_cast<double>(r) * static_cast<double>(r);
    auto t = detail::dual_term(r, coef, tables.n_max(), w, oy, &ok, opt, opt.rel_tol * pilot * qd * r2);
    const double ph = static_cast<double>(totient(r));
    out.mt_y += ph / r2 * t.diag / qd;
    out.mt_k += ph / r2 * t.diag2 / qd;
    if (!opt.diagonal_only) {
      out.e_y += (t.full - ph * t.diag) / r2 / qd;
      out.e_k += (t.full2 - ph * t.diag2) / r2 / qd;
      out.e_yk += 2.0 * t.cross / r2 / qd;
    }
    out.terms.push_back(t);
  }
  out.total = out.mt_y + out.mt_k + out.e_y + out.e_k + out.e_yk;
  return out;
}

// ------------------------------------------------ divisor main term + cubic

struct CubicFit {
  std::vector<double> coeffs;  // c0 + c1 L + c2 L^2 + c3 L^3, L = log(r^2 / X)
  std::vector<double> r_grid;
  std::vector<double> samples;  // sum_n tau(n)^2 omega_B(sqrt(n)/r)^2 / (r^2 X)
  double max_rel_residual = 0.0;
  double leading() const { return coeffs.at(3); }
};

struct DivisorMainTerm {
  double value = 0.0;  // (1/q) sum_{r | q} phi(r)/r^2 sum_n tau(n)^2 omega_B(sqrt(n)/r)^2
  CubicFit fit;
};

namespace detail {

// least squares via normal equations on a centred variable, then re-expanded
inline std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y, int deg) {
  const std::size_t n = x.size();
  if (n < static_cast<std::size_t>(deg + 1)) throw std::invalid_argument("polyfit: too few points");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  const int m = deg + 1;
  std::vector<double> A(m * m, 0.0), b(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(m, 1.0);
    for (int j = 1; j < m; ++j) p[j] = p[j - 1] * (x[i] - mean);
    for (int j = 0; j < m; ++j) {
      b[j] += p[j] * y[i];
      for (int k = 0; k < m; ++k) A[j * m + k] += p[j] * p[k];
    }
  }
  // Gaussian elimination with partial pivoting
  for (int c = 0; c < m; ++c) {
    int piv = c;
    for (int r = c + 1; r < m; ++r)
      if (std::abs(A[r * m + c]) > std::abs(A[piv * m + c])) piv = r;
    if (A[piv * m + c] == 0.0) throw std::runtime_error("polyfit: singular system");
    if (piv != c) {
      for (int k = 0; k < m; ++k) std::swap(A[c * m + k], A[piv * m + k]);
      std::swap(b[c], b[piv]);
    }
    for (int r = c + 1; r < m; ++r) {
      const double f = A[r * m + c] / A[c * m + c];
      for (int k = c; k < m; ++k) A[r * m + k] -= f * A[c * m + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> cc(m);
  for (int r = m - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < m; ++k) s -= A[r * m + k] * cc[k];
    cc[r] = s / A[r * m + r];
  }
  // expand sum cc_j (x - mean)^j in powers of x
  std::vector<double> out(m, 0.0);
  for (int j = 0; j < m; ++j) {
    double binom = 1.0;
    for (int i = 0; i <= j; ++i) {
      out[i] += cc[j] * binom * std::pow(-mean, j - i);
      binom = binom * (j - i) / (i + 1);
    }
  }
  return out;
}

}  // namespace detail

/// Geometric grid of n_points moduli r in [r_lo, r_hi] (rounded, deduplicated).
inline std::vector<std::uint64_t> geometric_r_grid(double r_lo, double r_hi, int n_points) {
  std::vector<std::uint64_t> g;
  for (int i = 0; i < n_points; ++i) {
    const double t = n_points == 1 ? 0.0 : static_cast<double>(i) / (n_points - 1);
    const auto r = static_cast<std::uint64_t>(std::llround(r_lo * std::pow(r_hi / r_lo, t)));
    if (g.empty() || g.back() != r) g.push_back(std::max<std::uint64_t>(r, 1));
  }
  return g;
}

/// MT(X, q, B) with a cubic-in-log(r^2/X) fit of
/// sum_n tau(n)^2 omega_B(sqrt(n)/r)^2 / (r^2 X) over a geometric r grid on
/// [sqrt X, q]. Below sqrt X the first dual term already sits past the bulk
/// of omega near alpha ~ X^{-1/2}, and the samples are not yet polynomial in
/// the logarithm. For q < 2 sqrt X the grid is [q/2, q].
inline DivisorMainTerm mt_smooth_divisor(std::uint64_t q, OmegaTag B, const SmoothWeight& w,
                                         const ArithTables& tables, DualOptions opt = main_term_options(),
                                         int fit_points = 12) {
  if (B == OmegaTag::J) throw std::invalid_argument("mt_smooth_divisor: B must be Y or K");
  opt.diagonal_only = true;
  const double qd_ = static_cast<double>(q);
  const double r_hi = std::max(qd_, 2.0);
  const double r_lo = std::max(1.0, qd_ >= 2.0 * std::sqrt(w.X()) ? std::sqrt(w.X()) : 0.5 * r_hi);
  auto grid = geometric_r_grid(r_lo, r_hi, fit_points);
  OmegaSource om(B == OmegaTag::Y ? OmegaKind::Y() : OmegaKind::K(), w, 0.5 / r_hi, opt.quad_tol);
  const auto& tau = tables.tau_array();
  auto coef = [&](std::uint64_t n) { return static_cast<double>(tau[n]); };
  DivisorMainTerm out;
  std::map<std::uint64_t, double> diag_by_r;
  auto diag_for = [&](std::uint64_t r) {
    auto it = diag_by_r.find(r);
    if (it != diag_by_r.end()) return it->second;
    const double d = detail::dual_term(r, coef, tables.n_max(), w, om, nullptr, opt).diag;
    diag_by_r.emplace(r, d);
    return d;
  };
  const double qd = static_cast<double>(q);
  for (const auto r : divisors(q)) {
    const double r2 = static_cast<double>(r) * static_cast<double>(r);
    out.value += static_cast<double>(totient(r)) / r2 * diag_for(r) / qd;
  }
  std::vector<double> L, y;
  for (const auto r : grid) {
    const double r2 = static_cast<double>(r) * static_cast<double>(r);
    out.fit.r_grid.push_back(static_cast<double>(r));
    const double v = diag_for(r) / (r2 * w.X());
    out.fit.samples.push_back(v);
    L.push_back(std::log(r2 / w.X()));
    y.push_back(v);
  }
  if (L.size() >= 4) {
    out.fit.coeffs = detail::polyfit(L, y, 3);
    for (std::size_t i = 0; i < L.size(); ++i) {
      double p = 0.0;
      for (int j = 3; j >= 0; --j) p = p * L[i] + out.fit.coeffs[j];
      out.fit.max_rel_residual = std::max(out.fit.max_rel_residual, std::abs(p - y[i]) / std::abs(y[i]));
    }
  }
  return out;
}

// ----------------------------------------------------------- regime report

struct BudgetTerm {
  std::string name;
  double value = 0.0;
};

struct VarianceReport {
  double X = 0.0;
  std::uint64_t q = 1;
  double H = 0.0;
  Sequence sequence = Sequence::Cusp;
  double exact = 0.0;
  double prediction = 0.0;
  std::vector<BudgetTerm> budget;
  double ratio = 0.0;  // |exact - prediction| / sum(budget)
  std::string regime;
  std::string dominant;  // name of the largest budget term
};

inline std::string regime_label(double X, double q) {
  if (q >= X) return "q>=X";
  if (q <= std::pow(X, 0.25)) return "q<=X^1/4";
  if (q < std::sqrt(X)) return "X^1/4<q<X^1/2";
  return "X^1/2<=q<X";
}

inline std::vector<BudgetTerm> cusp_budget(double X, std::uint64_t q) {
  const double qd = static_cast<double>(q);
  return {{"q^-1 X^3/2 g(q)", std::pow(X, 1.5) / qd * g_of(q)},
          {"q^5/54 X^47/54", std::pow(qd, 5.0 / 54.0) * std::pow(X, 47.0 / 54.0)},
          {"q^1/2 X^1/2", std::sqrt(qd * X)}};
}

inline std::vector<BudgetTerm> divisor_budget(double X, std::uint64_t q) {
  const double qd = static_cast<double>(q), lx = std::log(X);
  const double tq = static_cast<double>(divisors(q).size());
  return {{"q^-1 X^3/2 g(q)", std::pow(X, 1.5) / qd * g_of(q)},
          {"q^1/2 X^1/2 tau(q) log^4 X", std::sqrt(qd * X) * tq * std::pow(lx, 4)},
          {"q^1/4 X^3/4 (log^3 X + tau(q) log^5/2 X)",
           std::pow(qd, 0.25) * std::pow(X, 0.75) * (std::pow(lx, 3) + tq * std::pow(lx, 2.5))},
          {"q^5/36 X^61/72", std::pow(qd, 5.0 / 36.0) * std::pow(X, 61.0 / 72.0)}};
}

/// The q at which q^{-1} X^{3/2} = q^{5/54} X^{47/54}, found by bisection in log q.
inline double cusp_budget_crossover(double X) {
  double lo = 0.0, hi = std::log(X);
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    const double q = std::exp(m);
    const double t1 = std::pow(X, 1.5) / q, t2 = std::pow(q, 5.0 / 54.0) * std::pow(X, 47.0 / 54.0);
    (t1 > t2 ? lo : hi) = m;
  }
  return std::exp(0.5 * (lo + hi));
}

struct RegimeOptions {
  std::optional<double> H;        // defaults to the sequence's formula
  std::optional<double> c_hat;    // cusp prediction slope (required for cusp)
  DualOptions dual;               // divisor prediction
};

inline VarianceReport finish_report(VarianceReport r) {
  double sum = 0.0, best = -1.0;
  for (const auto& b : r.budget) {
    sum += b.value;
    if (b.value > best) {
      best = b.value;
      r.dominant = b.name;
    }
  }
  r.ratio = std::abs(r.exact - r.prediction) / sum;
  r.regime = regime_label(r.X, static_cast<double>(r.q));
  return r;
}

inline VarianceReport regime_report_cusp(double X, std::uint64_t q, const HeckeTable& table,
                                         const RegimeOptions& opt) {
  if (!opt.c_hat) throw std::invalid_argument("regime_report_cusp: c_hat is required");
  VarianceReport r;
  r.X = X;
  r.q = q;
  r.sequence = Sequence::Cusp;
  r.H = opt.H.value_or(h_default_cusp(X, static_cast<double>(q)));
  r.exact = variance_cusp_exact(X, q, table);
  r.prediction = *opt.c_hat * X;
  r.budget = cusp_budget(X, q);
  return finish_report(r);
}

inline VarianceReport regime_report_divisor(double X, std::uint64_t q, const ArithTables& tables,
                                            const RegimeOptions& opt) {
  VarianceReport r;
  r.X = X;
  r.q = q;
  r.sequence = Sequence::Divisor;
  r.H = opt.H.value_or(h_default_divisor(X, static_cast<double>(q)));
  r.exact = variance_divisor_exact(X, q, tables);
  const SmoothWeight w(r.H, X);
  DualOptions d = opt.dual;
  d.diagonal_only = true;
  const auto split = divisor_split(q, w, tables, d);
  r.prediction = split.mt_y + split.mt_k;
  r.budget = divisor_budget(X, q);
  return finish_report(r);
}

}  // namespace apvar
