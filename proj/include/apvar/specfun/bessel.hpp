#pragma once
// Bessel kernels J_n (integer order), Y_0 and K_0 for x > 0.
//
// Crossovers:
//   J_n : power series for x <= 8; Miller backward recurrence for
//         8 < x <= max(25, 2n); Hankel asymptotics for J_0, J_1 plus upward
//         recurrence beyond.
//   Y_0 : power series for x <= 8, Neumann series over Miller J_{2k} up to
//         25, Hankel asymptotics above.
//   K_0 : power series for x <= 2; trapezoid rule on K_0(x) = int_0^inf
//         exp(-x cosh t) dt above, step shrinking like 1/x (the series loses
//         digits to cancellation against I_0 well before x = 12).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace apvar {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

enum class BesselKind { J, Y0, K0 };

namespace detail {

inline constexpr double kBesselSeriesCut = 8.0;
inline constexpr double kBesselAsymptoticCut = 25.0;

inline double bessel_j_series(int n, double x) {
  const double h = 0.5 * x;
  const double h2 = h * h;
  // leading term (x/2)^n / n! in logs to avoid overflow for large n
  double term = std::exp(n * std::log(h) - std::lgamma(n + 1.0));
  double sum = term;
  for (int m = 1; m < 500; ++m) {
    term *= -h2 / (static_cast<double>(m) * static_cast<double>(m + n));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// Hankel asymptotic amplitude/phase pieces P, Q for order nu at x
inline std::pair<double, double> hankel_pq(int nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0, q = 0.0;
  double term = 1.0;
  double last = 1e300;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (static_cast<double>(k) * 8.0 * x);
    if (std::abs(term) > last) break;  // asymptotic series: stop at smallest term
    last = std::abs(term);
    // terms alternate between Q (odd k) and P (even k) with signs (-1)^{floor(k/2)}
    const int sign = ((k / 2) % 2 == 0) ? 1 : -1;
    if (k % 2 == 1) {
      q += sign * term;
    } else {
      p += sign * term;
    }
    if (last < 1e-17) break;
  }
  return {p, q};
}

inline double bessel_j01_asymptotic(int nu, double x) {
  const auto [p, q] = hankel_pq(nu, x);
  const double chi = x - (0.5 * nu + 0.25) * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

struct MillerResult {
  double jn = 0.0;       // J_n
  double j0 = 0.0;       // J_0
  double neumann = 0.0;  // sum_{k >= 1} (-1)^{k+1} J_{2k} / k
};

// Miller backward recurrence normalized by J_0 + 2 sum J_{2k} = 1
inline MillerResult bessel_miller(int n, double x) {
  const int top = std::max(n, static_cast<int>(x));
  const int start = 2 * ((top + 30 + static_cast<int>(std::sqrt(40.0 * top))) / 2);
  double jp1 = 0.0, j = 1e-300, result = 0.0, norm = 0.0, neumann = 0.0;
  for (int m = start; m >= 1; --m) {
    const double jm1 = 2.0 * m / x * j - jp1;
    jp1 = j;
    j = jm1;
    const int order = m - 1;
    if (order == n) result = j;
    if (order % 2 == 0 && order > 0) {
      norm += 2.0 * j;
      const int k = order / 2;
      neumann += (k % 2 == 1 ? 1.0 : -1.0) * j / k;
    }
    if (std::abs(j) > 1e250) {
      j *= 1e-250;
      jp1 *= 1e-250;
      result *= 1e-250;
      norm *= 1e-250;
      neumann *= 1e-250;
    }
  }
  norm += j;  // J_0 term
  return {result / norm, j / norm, neumann / norm};
}

}  // namespace detail

/// J_n(x), integer n >= 0, x > 0.
inline double bessel_j(int n, double x) {
  if (n < 0) throw std::invalid_argument("bessel_j: order must be >= 0");
  if (!(x > 0.0)) throw std::domain_error("bessel_j: x must be > 0");
  if (x <= detail::kBesselSeriesCut) return detail::bessel_j_series(n, x);
  if (x <= std::max(detail::kBesselAsymptoticCut, 2.0 * n)) return detail::bessel_miller(n, x).jn;
  const double j0 = detail::bessel_j01_asymptotic(0, x);
  if (n == 0) return j0;
  double jm1 = j0;
  double j = detail::bessel_j01_asymptotic(1, x);
  for (int m = 1; m < n; ++m) {
    const double jp1 = 2.0 * m / x * j - jm1;
    jm1 = j;
    j = jp1;
  }
  return j;
}

/// Y_0(x), x > 0.
inline double bessel_y0(double x) {
  if (!(x > 0.0)) throw std::domain_error("bessel_y0: x must be > 0");
  if (x <= detail::kBesselSeriesCut) {
    const double h2 = 0.25 * x * x;
    double term = 1.0, harmonic = 0.0, tail = 0.0;
    for (int k = 1; k < 200; ++k) {
      term *= -h2 / (static_cast<double>(k) * k);
      harmonic += 1.0 / k;
      tail -= term * harmonic;  // (-1)^{k+1} H_k (x^2/4)^k / (k!)^2
      if (std::abs(term * harmonic) < 1e-18 * std::abs(tail)) break;
    }
    const double j0 = detail::bessel_j_series(0, x);
    return 2.0 / std::numbers::pi * ((std::log(0.5 * x) + kEulerGamma) * j0 + tail);
  }
  if (x <= detail::kBesselAsymptoticCut) {
    const auto m = detail::bessel_miller(0, x);
    return 2.0 / std::numbers::pi * ((std::log(0.5 * x) + kEulerGamma) * m.j0 + 2.0 * m.neumann);
  }
  const auto [p, q] = detail::hankel_pq(0, x);
  const double chi = x - 0.25 * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::sin(chi) + q * std::cos(chi));
}

/// K_0(x), x > 0.
inline double bessel_k0(double x) {
  if (!(x > 0.0)) throw std::domain_error("bessel_k0: x must be > 0");
  if (x <= 2.0) {
    const double h2 = 0.25 * x * x;
    double term = 1.0, harmonic = 0.0, i0 = 1.0, tail = 0.0;
    for (int k = 1; k < 100; ++k) {
      term *= h2 / (static_cast<double>(k) * k);
      harmonic += 1.0 / k;
      i0 += term;
      tail += term * harmonic;
      if (term < 1e-18 * i0) break;
    }
    return -(std::log(0.5 * x) + kEulerGamma) * i0 + tail;
  }
  if (x > 745.0) return 0.0;
  // integrand analytic in |Im t| < pi/2, where it grows to O(1) against K_0 ~ e^{-x};
  // aliasing error ~ exp(-pi^2 / h) relative to e^{-x} fixes the step
  const double h = std::min(0.25, std::numbers::pi * std::numbers::pi / (x + 40.0));
  double sum = 0.5;
  for (int j = 1;; ++j) {
    const double sh = std::sinh(0.5 * h * j);
    const double v = std::exp(-2.0 * x * sh * sh);  // exp(-x (cosh t - 1))
    sum += v;
    if (v < 1e-18 * sum) break;
  }
  return h * sum * std::exp(-x);
}

inline double bessel(BesselKind kind, int order, double x) {
  switch (kind) {
    case BesselKind::J:
      return bessel_j(order, x);
    case BesselKind::Y0:
      return bessel_y0(x);
    case BesselKind::K0:
      return bessel_k0(x);
  }
  throw std::invalid_argument("bessel: unknown kind");
}

}  // namespace apvar
