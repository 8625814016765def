#pragma once
// Shifted convolution layer: Lambda_h(x, y) as a truncated Ramanujan-sum
// series and in closed form, exact shifted sums, the DFI main term, the exact
// off-diagonal parts of the smooth variances, and the fake main terms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apvar/arith.hpp"
#include "apvar/forms.hpp"
#include "apvar/specfun/omega.hpp"
#include "apvar/specfun/quadrature.hpp"
#include "apvar/specfun/smooth_weight.hpp"
#include "apvar/variance.hpp"
#include "apvar/voronoi.hpp"

namespace apvar {

// ------------------------------------------------------------- zeta near 2

/// sum_{n >= 1} log(n)^j n^{-s} for j in {0, 1, 2}, by Euler-Maclaurin at N = 1000.
inline double zeta_log_moment(double s, int j) {
  if (!(s > 1.0)) throw std::domain_error("zeta_log_moment: need s > 1");
  if (j < 0 || j > 2) throw std::invalid_argument("zeta_log_moment: j in {0, 1, 2}");
  constexpr int N = 1000;
  auto f = [&](double t) { return std::pow(std::log(t), j) * std::pow(t, -s); };
  long double sum = 0.0L;
  for (int n = N - 1; n >= 1; --n) sum += f(n);
  const double L = std::log(static_cast<double>(N)), a = s - 1.0;
  // int_N^inf L^j t^{-s} dt = N^{-a} sum_i j!/(j-i)! L^{j-i} / a^{i+1}
  double tail = 0.0, fact = 1.0;
  for (int i = 0; i <= j; ++i) {
    tail += fact * std::pow(L, j - i) / std::pow(a, i + 1);
    fact *= (j - i);
  }
  tail *= std::pow(static_cast<double>(N), -a);
  // f'(N) = (j L^{j-1} - s L^j) N^{-s-1}
  const double d1 = ((j > 0 ? j * std::pow(L, j - 1) : 0.0) - s * std::pow(L, j)) * std::pow(N, -s - 1.0);
  return static_cast<double>(sum) + 0.5 * f(N) + tail - d1 / 12.0;
}

// ------------------------------------------------------------ Lambda_h

namespace detail {

inline std::vector<std::int8_t> mobius_upto(std::uint64_t K, const ArithTables* tables) {
  if (tables && tables->n_max() >= K) {
    const auto& mu = tables->mu_array();
    return std::vector<std::int8_t>(mu.begin(), mu.begin() + static_cast<std::ptrdiff_t>(K + 1));
  }
  return build_arith_tables(std::max<std::uint64_t>(K, 1)).mu_array();
}

}  // namespace detail

/// c_k(h) for k = 0..K (index 0 unused), via c_k(h) = sum_{d | (k, h)} d mu(k/d).
inline std::vector<std::int64_t> ramanujan_row(std::int64_t h, std::uint64_t K, const std::vector<std::int8_t>& mu) {
  if (mu.size() < K + 1) throw RangeError("ramanujan_row: Moebius table shorter than K");
  std::vector<std::int64_t> c(K + 1, 0);
  const auto ah = static_cast<std::uint64_t>(h < 0 ? -h : h);
  for (const auto d : divisors(ah)) {
    if (d > K) continue;
    const auto dd = static_cast<std::int64_t>(d);
    for (std::uint64_t j = 1, k = d; k <= K; ++j, k += d) c[k] += dd * mu[j];
  }
  return c;
}

/// Constant next to log x in the Lambda_h weights. MinusTwoGamma is the
/// series as usually quoted; PlusTwoGamma matches the divisor density
/// log x + 2 gamma and is what the shifted divisor sum actually follows.
enum class LambdaShift { MinusTwoGamma, PlusTwoGamma };

inline double lambda_shift_value(LambdaShift s) {
  return (s == LambdaShift::MinusTwoGamma ? -2.0 : 2.0) * euler_mascheroni();
}

struct LambdaValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

/// Lambda_h(x, y) = sum_k c_k(h)/k^2 (log x - 2 gamma - 2 log k)(log y - 2 gamma - 2 log k)
/// truncated at k <= K (or with +2 gamma, see LambdaShift). The k-sum is stored as the three moments
/// S_j = sum_{k <= K} c_k(h) log(k)^j / k^2, so each (x, y) costs O(1).
class LambdaSeries {
 public:
  LambdaSeries(std::int64_t h, std::uint64_t K, const ArithTables* tables = nullptr,
               LambdaShift shift = LambdaShift::MinusTwoGamma)
      : h_(h), K_(K), c_(lambda_shift_value(shift)) {
    if (h == 0) throw std::invalid_argument("LambdaSeries: h = 0 is not allowed");
    if (K < 1) throw std::invalid_argument("LambdaSeries: K must be >= 1");
    const auto mu = detail::mobius_upto(K, tables);
    const auto c = ramanujan_row(h, K, mu);
    for (std::uint64_t k = 1; k <= K; ++k) {
      if (c[k] == 0) continue;
      const double lk = std::log(static_cast<double>(k));
      const double t = static_cast<double>(c[k]) / (static_cast<double>(k) * static_cast<double>(k));
      s_[0] += t;
      s_[1] += t * lk;
      s_[2] += t * lk * lk;
    }
    tau_h_ = static_cast<double>(divisors(static_cast<std::uint64_t>(h < 0 ? -h : h)).size());
  }

  double value(double x, double y) const {
    check(x, y);
    const double ax = std::log(x) + c_, ay = std::log(y) + c_;
    return ax * ay * s_[0] - 2.0 * (ax + ay) * s_[1] + 4.0 * s_[2];
  }

  /// (log xy + log K)^2 tau(|h|) 2/K.
  double tail_bound(double x, double y) const {
    check(x, y);
    const double l = std::log(x * y) + std::log(static_cast<double>(K_));
    return l * l * tau_h_ * 2.0 / static_cast<double>(K_);
  }

  LambdaValue operator()(double x, double y) const { return {value(x, y), tail_bound(x, y)}; }

  std::int64_t h() const { return h_; }
  std::uint64_t K() const { return K_; }
  double moment(int j) const { return s_.at(j); }

 private:
  static void check(double x, double y) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::domain_error("Lambda_h: need x, y > 0");
  }
  std::int64_t h_;
  std::uint64_t K_;
  double c_;
  double tau_h_ = 1.0;
  std::array<double, 3> s_{};
};

inline LambdaValue lambda_h(double x, double y, std::int64_t h, std::uint64_t K, const ArithTables* tables = nullptr) {
  return LambdaSeries(h, K, tables)(x, y);
}

/// Lambda_h(x, y) with K = infinity, from sum_k c_k(h) k^{-s} = sigma_{1-s}(h) / zeta(s)
/// differentiated twice at s = 2.
class LambdaLimit {
 public:
  explicit LambdaLimit(std::int64_t h, LambdaShift shift = LambdaShift::MinusTwoGamma)
      : c_(lambda_shift_value(shift)) {
    if (h == 0) throw std::invalid_argument("LambdaLimit: h = 0 is not allowed");
    const double z = zeta_log_moment(2.0, 0), z1 = -zeta_log_moment(2.0, 1), z2 = zeta_log_moment(2.0, 2);
    double f = 0.0, f1 = 0.0, f2 = 0.0;  // sigma_{1-s}(h) and its s-derivatives at s = 2
    for (const auto d : divisors(static_cast<std::uint64_t>(h < 0 ? -h : h))) {
      const double dd = static_cast<double>(d), ld = std::log(dd);
      f += 1.0 / dd;
      f1 -= ld / dd;
      f2 += ld * ld / dd;
    }
    const double g = 1.0 / z, g1 = -z1 / (z * z), g2 = (2.0 * z1 * z1 - z * z2) / (z * z * z);
    s_[0] = f * g;
    s_[1] = -(f1 * g + f * g1);
    s_[2] = f2 * g + 2.0 * f1 * g1 + f * g2;
  }

  double operator()(double x, double y) const {
    if (!(x > 0.0) || !(y > 0.0)) throw std::domain_error("Lambda_h: need x, y > 0");
    const double ax = std::log(x) + c_, ay = std::log(y) + c_;
    return ax * ay * s_[0] - 2.0 * (ax + ay) * s_[1] + 4.0 * s_[2];
  }

  double moment(int j) const { return s_.at(j); }

 private:
  double c_;
  std::array<double, 3> s_{};
};

/// sum_k (h, k)/k^2 = zeta(2) sum_{e | h} phi(e)/e^2.
inline double gcd_square_sum(std::int64_t h) {
  const double z = std::numbers::pi * std::numbers::pi / 6.0;
  double s = 0.0;
  for (const auto e : divisors(static_cast<std::uint64_t>(h < 0 ? -h : h))) {
    s += static_cast<double>(totient(e)) / (static_cast<double>(e) * static_cast<double>(e));
  }
  return z * s;
}

struct SeriesCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double diff = 0.0;
};

/// sum_{k <= K} c_k(h) k^{-s} against sigma_{1-s}(h) / zeta(s).
inline SeriesCheck lambda_series_check(std::int64_t h, double s = 2.0, std::uint64_t K = 1'000'000,
                                       const ArithTables* tables = nullptr) {
  if (h == 0) throw std::invalid_argument("lambda_series_check: h = 0 is not allowed");
  const auto mu = detail::mobius_upto(K, tables);
  const auto c = ramanujan_row(h, K, mu);
  SeriesCheck r;
  long double acc = 0.0L;
  for (std::uint64_t k = 1; k <= K; ++k) {
    if (c[k] != 0) acc += static_cast<long double>(c[k]) * std::pow(static_cast<long double>(k), -s);
  }
  r.lhs = static_cast<double>(acc);
  double sig = 0.0;
  for (const auto d : divisors(static_cast<std::uint64_t>(h < 0 ? -h : h))) sig += std::pow(static_cast<double>(d), 1.0 - s);
  r.rhs = sig / zeta_log_moment(s, 0);
  r.diff = std::abs(r.lhs - r.rhs);
  return r;
}

// ------------------------------------------------------ shifted sums

enum class ShiftSign { Minus, Plus };  // n - m = h, or n + m = h

/// sum over m in [M, 2M] with n = m + h (Minus) or n = h - m (Plus), n in [N, 2N],
/// of u(n) u(m) g(m, n). Summation runs in increasing m.
template <class U, class G>
double shifted_sum(U&& u, std::uint64_t n_avail, std::int64_t h, ShiftSign sign, G&& g, double M, double N) {
  if (h == 0) throw std::invalid_argument("shifted_sum: h = 0 is not allowed");
  const auto m_lo = static_cast<std::int64_t>(std::ceil(M)), m_hi = static_cast<std::int64_t>(std::floor(2.0 * M));
  const auto n_lo = static_cast<std::int64_t>(std::ceil(N)), n_hi = static_cast<std::int64_t>(std::floor(2.0 * N));
  if (static_cast<std::uint64_t>(std::max<std::int64_t>(m_hi, n_hi)) > n_avail) {
    throw RangeError("shifted_sum: support box exceeds table");
  }
  double sum = 0.0, comp = 0.0;
  for (std::int64_t m = std::max<std::int64_t>(m_lo, 1); m <= m_hi; ++m) {
    const std::int64_t n = sign == ShiftSign::Minus ? m + h : h - m;
    if (n < std::max<std::int64_t>(n_lo, 1) || n > n_hi) continue;
    const double t = u(static_cast<std::uint64_t>(n)) * u(static_cast<std::uint64_t>(m)) *
                     g(static_cast<double>(m), static_cast<double>(n));
    // Neumaier compensated sum
    const double s = sum + t;
    comp += std::abs(sum) >= std::abs(t) ? (sum - s) + t : (t - s) + sum;
    sum = s;
  }
  return sum + comp;
}

inline double shifted_sum_exact(Sequence seq, std::int64_t h, ShiftSign sign,
                                const std::function<double(double, double)>& g, double M, double N,
                                const ArithTables* tables, const HeckeTable* hecke) {
  if (seq == Sequence::Divisor) {
    if (!tables) throw std::invalid_argument("shifted_sum_exact: divisor sequence needs arithmetic tables");
    const auto& tau = tables->tau_array();
    return shifted_sum([&](std::uint64_t n) { return static_cast<double>(tau[n]); }, tables->n_max(), h, sign, g, M,
                       N);
  }
  if (!hecke) throw std::invalid_argument("shifted_sum_exact: cusp sequence needs a Hecke table");
  const auto& a = hecke->a_array();
  return shifted_sum([&](std::uint64_t n) { return a[n]; }, hecke->n_max(), h, sign, g, M, N);
}

/// delta_{u = tau} int g(x, x + h) Lambda_h(x, x + h) dx (Minus) or
/// int_0^h g(x, h - x) Lambda_h(x, h - x) dx (Plus), over the box [M, 2M] x [N, 2N],
/// with Lambda_h at K = infinity.
inline double dfi_main_term(Sequence seq, std::int64_t h, ShiftSign sign, const std::function<double(double, double)>& g,
                            double M, double N, double rel_tol = 1e-8,
                            LambdaShift shift = LambdaShift::PlusTwoGamma) {
  if (h == 0) throw std::invalid_argument("dfi_main_term: h = 0 is not allowed");
  if (seq == Sequence::Cusp) return 0.0;
  const LambdaLimit lam(h, shift);
  const double hd = static_cast<double>(h);
  double lo = M, hi = 2.0 * M;
  if (sign == ShiftSign::Minus) {
    lo = std::max(lo, N - hd);
    hi = std::min(hi, 2.0 * N - hd);
  } else {
    lo = std::max(lo, hd - 2.0 * N);
    hi = std::min(hi, hd - N);
  }
  lo = std::max(lo, 0.0);
  if (!(hi > lo)) return 0.0;
  auto y_of = [&](double x) { return sign == ShiftSign::Minus ? x + hd : hd - x; };
  auto f = [&](double x) {
    const double y = y_of(x);
    if (!(x > 0.0) || !(y > 0.0)) return 0.0;
    return g(x, y) * lam(x, y);
  };
  // magnitude estimate for the absolute tolerance
  const auto coarse = quad::integrate_panels<double>(f, lo, hi, (hi - lo) / 16.0, 1e-6 * (hi - lo));
  double scale = 0.0;
  for (int i = 0; i <= 64; ++i) scale = std::max(scale, std::abs(f(lo + (hi - lo) * i / 64.0)));
  const double tol = rel_tol * std::max(std::abs(coarse.value), 1e-300 + 1e-3 * scale * (hi - lo));
  return quad::integrate_panels<double>(f, lo, hi, (hi - lo) / 64.0, tol).value;
}

// ---------------------------------------------------- off-diagonal parts

enum class OffdiagKind { CuspJ, DivYY, DivKK, DivYK };

inline std::string to_string(OffdiagKind k) {
  switch (k) {
    case OffdiagKind::CuspJ:
      return "cusp-J";
    case OffdiagKind::DivYY:
      return "div-YY";
    case OffdiagKind::DivKK:
      return "div-KK";
    case OffdiagKind::DivYK:
      return "div-YK";
  }
  return "?";
}

struct OffdiagResult {
  OffdiagKind kind = OffdiagKind::CuspJ;
  double X = 0.0, H = 0.0;
  std::uint64_t q = 1;
  double value = 0.0;
  double budget = 0.0;  // q^{5/6} X^{4/3} H^{-5/4}
  double ratio = 0.0;
  std::uint64_t n_cut = 0;  // largest dual cutoff over r | q
};

inline double offdiag_budget(double X, double q, double H) {
  return std::pow(q, 5.0 / 6.0) * std::pow(X, 4.0 / 3.0) * std::pow(H, -1.25);
}

namespace detail {

inline OffdiagResult offdiag_finish(OffdiagResult r, const std::vector<DualTerm>& terms) {
  r.budget = offdiag_budget(r.X, static_cast<double>(r.q), r.H);
  r.ratio = std::abs(r.value) / r.budget;
  for (const auto& t : terms) r.n_cut = std::max(r.n_cut, t.n_cut);
  return r;
}

}  // namespace detail

/// E(X, q): (1/q) sum_{r | q} r^{-2} sum_{n != m} c_r(n - m) u_n u_m, u_n = a(n) omega_J(sqrt(n)/r).
inline OffdiagResult offdiag_exact(std::uint64_t q, const SmoothWeight& w, const HeckeTable& table,
                                   const DualOptions& opt = {}) {
  const auto s = cusp_split(q, w, table, opt);
  OffdiagResult r{OffdiagKind::CuspJ, w.X(), w.H(), q, s.offdiag};
  return detail::offdiag_finish(r, s.terms);
}

/// E(X, q, Y), E(X, q, K) or E'(X, q, Y, K) for tau.
inline OffdiagResult offdiag_exact(std::uint64_t q, OffdiagKind kind, const SmoothWeight& w, const ArithTables& tables,
                                   const DualOptions& opt = {}) {
  if (kind == OffdiagKind::CuspJ) throw std::invalid_argument("offdiag_exact: cusp-J needs a Hecke table");
  const auto s = divisor_split(q, w, tables, opt);
  const double v = kind == OffdiagKind::DivYY ? s.e_y : kind == OffdiagKind::DivKK ? s.e_k : s.e_yk;
  OffdiagResult r{kind, w.X(), w.H(), q, v};
  return detail::offdiag_finish(r, s.terms);
}

// ------------------------------------------------------ fake main terms

enum class FakePair { YY, KK, YK };

inline std::string to_string(FakePair p) { return p == FakePair::YY ? "YY" : p == FakePair::KK ? "KK" : "YK"; }

struct FakeMainTermOptions {
  double rel_tol = 1e-3;      // convergence of the total as the alpha range grows
  double quad_tol = 1e-12;    // omega tables, relative to X
  double alpha_floor = 1e-10; // the x-range below h^2 floor^2 is dropped
  int max_doublings = 12;
  LambdaShift shift = LambdaShift::PlusTwoGamma;
};

struct FakeMainTermResult {
  FakePair pair = FakePair::YY;
  double X = 0.0, H = 0.0;
  std::uint64_t q = 1;
  double value = 0.0;
  double budget = 0.0;  // q tau(q) X^{1/2} H^{-1/2} log^4 X
  double ratio = 0.0;
  double alpha_max = 0.0;
  std::uint64_t l_max = 0;
};

inline double fake_main_term_budget(double X, std::uint64_t q, double H) {
  const double tq = static_cast<double>(divisors(q).size());
  return static_cast<double>(q) * tq * std::sqrt(X / H) * std::pow(std::log(X), 4);
}

namespace detail {

inline double table_or_zero(const OmegaTable& t, double alpha) {
  return alpha < t.alpha_lo() || alpha > t.alpha_hi() ? 0.0 : t(alpha);
}

// sum_{l=1}^{L} int g_{B,B'}(x, y; h) Lambda_{lr}(x, y) dx in alpha = sqrt(x)/h, dx = 2 h^2 alpha d alpha.
inline double fake_l_sum(FakePair pair, const OmegaTable& ta, const OmegaTable& tb, double h, std::uint64_t r,
                         std::uint64_t L, double alpha_max, double floor, double width, LambdaShift shift) {
  const double h2 = h * h, rd = static_cast<double>(r);
  double total = 0.0;
  if (pair != FakePair::YK) {
    // y = x + l r; omega_A at the nodes is shared by every l
    const auto rule = quad::kronrod_composite(quad::graded_edges(floor, width, alpha_max));
    std::vector<double> wa(rule.nodes.size());
    for (std::size_t i = 0; i < wa.size(); ++i) {
      const double a = rule.nodes[i];
      wa[i] = rule.weights[i] * table_or_zero(ta, a) * 2.0 * h2 * a;
    }
    for (std::uint64_t l = 1; l <= L; ++l) {
      const LambdaLimit lam(static_cast<std::int64_t>(l * r), shift);
      const double s = static_cast<double>(l) * rd;
      double acc = 0.0;
      for (std::size_t i = 0; i < wa.size(); ++i) {
        if (wa[i] == 0.0) continue;
        const double x = h2 * rule.nodes[i] * rule.nodes[i], y = x + s;
        const double b = std::sqrt(y) / h;
        if (b > alpha_max) break;
        acc += wa[i] * table_or_zero(tb, b) * lam(x, y);
      }
      total += acc;
    }
    return total;
  }
  // y = l r - x, split at x = l r / 2 so each half has its log singularity at 0
  for (std::uint64_t l = 1; l <= L; ++l) {
    const LambdaLimit lam(static_cast<std::int64_t>(l * r), shift);
    const double s = static_cast<double>(l) * rd;
    const double top = std::sqrt(0.5 * s) / h;
    const auto rule = quad::kronrod_composite(quad::graded_edges(std::min(floor, 0.5 * top), width, top));
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double a = rule.nodes[i];
      const double x = h2 * a * a, y = s - x;
      const double b = std::sqrt(y) / h;
      const double jac = rule.weights[i] * 2.0 * h2 * a * lam(x, y);
      acc += jac * (table_or_zero(ta, a) * table_or_zero(tb, b) + table_or_zero(ta, b) * table_or_zero(tb, a));
    }
    total += acc;
  }
  return total;
}

}  // namespace detail

/// (2/q) sum_{dr | q} mu(d)/(d^2 r) sum_{l >= 1} int g_{B,B'}(x, y; dr) Lambda_{lr}(x, y) dx with
/// y = x + lr over x > 0 (YY, KK) or y = lr - x over 0 < x < lr (YK), where
/// g_{B,B'}(x, y; h) = omega_B(sqrt(x)/h) omega_B'(sqrt(y)/h) and Lambda is taken at K = infinity.
/// The alpha range doubles from 4 sqrt(X)/H until the total moves by less than rel_tol; l r is
/// limited by (dr alpha_max)^2.
inline FakeMainTermResult fake_main_term(FakePair pair, std::uint64_t q, const SmoothWeight& w,
                                         const FakeMainTermOptions& opt = {}) {
  const OmegaKind ka = pair == FakePair::KK ? OmegaKind::K() : OmegaKind::Y();
  const OmegaKind kb = pair == FakePair::YY ? OmegaKind::Y() : OmegaKind::K();
  OmegaTable ta(ka, w, opt.alpha_floor, opt.quad_tol * w.X());
  OmegaTable tb(kb, w, opt.alpha_floor, opt.quad_tol * w.X());
  // one oscillation period of omega in alpha
  const double width = 0.5 / std::sqrt(w.X());
  FakeMainTermResult res;
  res.pair = pair;
  res.X = w.X();
  res.H = w.H();
  res.q = q;
  double alpha_max = 4.0 * std::sqrt(w.X()) / w.H();
  double prev = 0.0;
  for (int round = 0;; ++round) {
    ta.ensure(alpha_max);
    tb.ensure(alpha_max);
    double total = 0.0;
    std::uint64_t l_max = 0;
    for (const auto r : divisors(q)) {
      for (const auto d : divisors(q / r)) {
        const int mu = moebius(d);
        if (mu == 0) continue;
        const double h = static_cast<double>(d * r), rd = static_cast<double>(r);
        const auto L = static_cast<std::uint64_t>(std::floor(h * h * alpha_max * alpha_max / rd));
        l_max = std::max(l_max, L);
        const double inner = detail::fake_l_sum(pair, ta, tb, h, r, L, alpha_max, opt.alpha_floor, width, opt.shift);
        total += mu / (static_cast<double>(d) * static_cast<double>(d) * rd) * inner;
      }
    }
    total *= 2.0 / static_cast<double>(q);
    res.value = total;
    res.alpha_max = alpha_max;
    res.l_max = l_max;
    if (round > 0 && std::abs(total - prev) <= opt.rel_tol * std::abs(total)) break;
    if (round >= opt.max_doublings) throw std::runtime_error("fake_main_term: alpha range did not converge");
    prev = total;
    alpha_max *= std::sqrt(2.0);
  }
  res.budget = fake_main_term_budget(w.X(), q, w.H());
  res.ratio = std::abs(res.value) / res.budget;
  return res;
}

}  // namespace apvar
