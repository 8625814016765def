#pragma once
// Two-sided numerical check of the Voronoi summation formula for the
// normalized Delta coefficients and for the divisor function.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "apvar/arith.hpp"
#include "apvar/forms.hpp"
#include "apvar/specfun/omega.hpp"
#include "apvar/specfun/quadrature.hpp"
#include "apvar/specfun/smooth_weight.hpp"

namespace apvar {

/// Euler-Mascheroni constant from the Euler-Maclaurin expansion of
/// H_n - log n at n = 20.
inline double euler_mascheroni() {
  constexpr int n = 20;
  long double h = 0.0L;
  for (int j = n; j >= 1; --j) h += 1.0L / j;
  // B_{2k} / (2k) for k = 1..6
  constexpr long double b[] = {1.0L / 12, -1.0L / 120, 1.0L / 252, -1.0L / 240, 1.0L / 132, -691.0L / 32760};
  const long double inv2 = 1.0L / (static_cast<long double>(n) * n);
  long double pw = inv2, corr = 0.0L;
  for (long double c : b) {
    corr += c * pw;
    pw *= inv2;
  }
  return static_cast<double>(h - std::log(static_cast<long double>(n)) - 0.5L / n + corr);
}

enum class Sequence { Cusp, Divisor };

inline std::string to_string(Sequence s) { return s == Sequence::Cusp ? "cusp" : "divisor"; }

/// h^{-1} mod q in [1, q); q = 1 gives 1 by convention (everything is 0 mod 1).
inline std::int64_t mod_inverse(std::int64_t h, std::int64_t q) {
  if (q < 1) throw std::invalid_argument("mod_inverse: modulus must be >= 1");
  if (q == 1) return 1;
  std::int64_t a = ((h % q) + q) % q, m = q, x0 = 0, x1 = 1;
  std::int64_t r0 = m, r1 = a;
  while (r1 != 0) {
    const std::int64_t t = r0 / r1;
    std::tie(r0, r1) = std::make_pair(r1, r0 - t * r1);
    std::tie(x0, x1) = std::make_pair(x1, x0 - t * x1);
  }
  if (r0 != 1) {
    throw std::invalid_argument("mod_inverse: gcd(" + std::to_string(h) + ", " + std::to_string(q) + ") != 1");
  }
  return ((x0 % q) + q) % q;
}

/// e(j/q) for j = 0..q-1; phases are reduced exactly before evaluation.
inline std::vector<cplx> additive_characters(std::uint64_t q) {
  std::vector<cplx> e(q);
  for (std::uint64_t j = 0; j < q; ++j) {
    const double th = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(q);
    e[j] = {std::cos(th), std::sin(th)};
  }
  return e;
}

inline std::uint64_t residue(std::int64_t a, std::uint64_t n, std::uint64_t q) {
  const auto qq = static_cast<std::int64_t>(q);
  const std::int64_t a_red = ((a % qq) + qq) % qq;
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a_red) * n) % q);
}

/// int (log x + c) w(x) dx: plateau in closed form, ramps by quadrature.
inline double log_weight_integral(const SmoothWeight& w, double c) {
  const double H = w.H(), X = w.X();
  auto xlogx = [](double x) { return x * std::log(x) - x; };
  const double plateau = xlogx(X - H) - xlogx(2.0 * H) + c * (X - 3.0 * H);
  auto ramp = [&](double x) { return w(x) * (std::log(x) + c); };
  const double tol = 1e-14 * X * std::log(X);
  return plateau + quad::integrate(ramp, H, 2.0 * H, tol).value + quad::integrate(ramp, X - H, X, tol).value;
}

struct VoronoiReport {
  Sequence sequence = Sequence::Cusp;
  std::uint64_t q = 1;
  std::int64_t h = 1;
  double X = 0.0, H = 0.0;
  cplx lhs, rhs;
  cplx main_term;  // divisor only
  double abs_diff = 0.0;
  double rel_diff = 0.0;
  std::uint64_t n_cut_dual = 0;
  std::uint64_t n_cut_design = 0;
  double tail_bound = 0.0;  // magnitude of the last dual block
  double quad_tol = 0.0;
};

struct VoronoiOptions {
  double quad_tol = 1e-12;  // omega quadrature, relative to X
  double tail_tol = 1e-9;   // stop doubling when the last block is below tail_tol * max(|lhs|, 1)
  std::uint64_t min_cut = 16;
};

/// sum_{H<n<X} u(n) e(h n / q) w(n) for any integer h.
template <class U>
cplx voronoi_lhs(U&& u, std::uint64_t q, std::int64_t h, const SmoothWeight& w) {
  const auto e = additive_characters(q);
  const auto lo = static_cast<std::uint64_t>(std::floor(w.H())) + 1;
  const auto hi = static_cast<std::uint64_t>(std::ceil(w.X())) - 1;
  cplx s(0.0, 0.0);
  for (std::uint64_t n = lo; n <= hi; ++n) s += u(n) * w(static_cast<double>(n)) * e[residue(h, n, q)];
  return s;
}

inline std::uint64_t voronoi_design_cut(std::uint64_t q, const SmoothWeight& w) {
  const double lx = std::log(w.X());
  return static_cast<std::uint64_t>(
      std::ceil(static_cast<double>(q) * static_cast<double>(q) * w.X() / (w.H() * w.H()) * lx * lx));
}

namespace detail {

// Dual sum in doubling blocks starting at the design cutoff; term(n) returns
// the n-th complex summand, table_max bounds n.
template <class Term>
cplx dual_sum(Term&& term, std::uint64_t start, std::uint64_t table_max, double stop, VoronoiReport& rep) {
  cplx total(0.0, 0.0);
  std::uint64_t done = 0, cut = start;
  for (;;) {
    if (cut > table_max) {
      throw RangeError("voronoi: dual cutoff " + std::to_string(cut) + " exceeds table size " +
                       std::to_string(table_max));
    }
    double block_mag = 0.0;
    for (std::uint64_t n = done + 1; n <= cut; ++n) {
      const cplx t = term(n);
      total += t;
      block_mag += std::abs(t);
    }
    rep.tail_bound = block_mag;
    done = cut;
    if (block_mag <= stop) break;
    cut *= 2;
  }
  rep.n_cut_dual = done;
  return total;
}

inline void finish(VoronoiReport& r) {
  r.abs_diff = std::abs(r.lhs - r.rhs);
  r.rel_diff = r.abs_diff / std::max({std::abs(r.lhs), std::abs(r.rhs), 1e-12});
}

}  // namespace detail

/// sum a(n) e(hn/q) w(n) = (1/q) sum a(n) e(-hbar n/q) omega_J(sqrt(n)/q).
inline VoronoiReport voronoi_check_cusp(std::uint64_t q, std::int64_t h, const SmoothWeight& w,
                                        const HeckeTable& table, const VoronoiOptions& opt = {}) {
  if (table.n_max() + 1 < w.X()) throw RangeError("voronoi_check_cusp: table shorter than X");
  VoronoiReport r;
  r.sequence = Sequence::Cusp;
  r.q = q;
  r.h = h;
  r.X = w.X();
  r.H = w.H();
  r.quad_tol = opt.quad_tol;
  const std::int64_t hbar = mod_inverse(h, static_cast<std::int64_t>(q));
  const auto& a = table.a_array();
  r.lhs = voronoi_lhs([&](std::uint64_t n) { return a[n]; }, q, h, w);
  const auto e = additive_characters(q);
  const auto kind = OmegaKind::J(table.weight());
  const double qd = static_cast<double>(q);
  auto term = [&](std::uint64_t n) {
    const cplx om = omega_direct(kind, std::sqrt(static_cast<double>(n)) / qd, w, opt.quad_tol * w.X());
    return a[n] * e[residue(-hbar, n, q)] * om / qd;
  };
  r.n_cut_design = voronoi_design_cut(q, w);
  const double stop = opt.tail_tol * std::max(std::abs(r.lhs), 1.0);
  r.rhs = detail::dual_sum(term, std::max(r.n_cut_design, opt.min_cut), table.n_max(), stop, r);
  detail::finish(r);
  return r;
}

/// sum tau(n) e(hn/q) w(n) = (1/q) int (log x + 2 gamma - 2 log q) w
///   + (1/q) sum tau(n) [e(-hbar n/q) omega_Y(sqrt(n)/q) + e(hbar n/q) omega_K(sqrt(n)/q)].
inline VoronoiReport voronoi_check_divisor(std::uint64_t q, std::int64_t h, const SmoothWeight& w,
                                           const ArithTables& tables, const VoronoiOptions& opt = {}) {
  if (tables.n_max() + 1 < w.X()) throw RangeError("voronoi_check_divisor: table shorter than X");
  VoronoiReport r;
  r.sequence = Sequence::Divisor;
  r.q = q;
  r.h = h;
  r.X = w.X();
  r.H = w.H();
  r.quad_tol = opt.quad_tol;
  const std::int64_t hbar = mod_inverse(h, static_cast<std::int64_t>(q));
  const auto& tau = tables.tau_array();
  r.lhs = voronoi_lhs([&](std::uint64_t n) { return static_cast<double>(tau[n]); }, q, h, w);
  const double qd = static_cast<double>(q);
  const double gamma = euler_mascheroni();
  r.main_term = log_weight_integral(w, 2.0 * gamma - 2.0 * std::log(qd)) / qd;
  const auto e = additive_characters(q);
  const auto ky = OmegaKind::Y(), kk = OmegaKind::K();
  auto term = [&](std::uint64_t n) {
    const double alpha = std::sqrt(static_cast<double>(n)) / qd;
    const cplx oy = omega_direct(ky, alpha, w, opt.quad_tol * w.X());
    const cplx ok = omega_direct(kk, alpha, w, opt.quad_tol * w.X());
    return static_cast<double>(tau[n]) * (e[residue(-hbar, n, q)] * oy + e[residue(hbar, n, q)] * ok) / qd;
  };
  r.n_cut_design = voronoi_design_cut(q, w);
  const double stop = opt.tail_tol * std::max(std::abs(r.lhs), 1.0);
  r.rhs = r.main_term + detail::dual_sum(term, std::max(r.n_cut_design, opt.min_cut), tables.n_max(), stop, r);
  detail::finish(r);
  return r;
}

}  // namespace apvar
