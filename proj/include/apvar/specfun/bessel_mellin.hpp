#pragma once
// Mellin transforms of K_0 and Y_0 by quadrature, and their closed forms.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "apvar/specfun/bessel.hpp"
#include "apvar/specfun/gamma.hpp"
#include "apvar/specfun/quadrature.hpp"

namespace apvar {

/// 2^{s-2} Gamma(s/2)^2 for K_0 (s > 0); -(2^{s-1}/pi) cos(pi s/2) Gamma(s/2)^2
/// for Y_0 (0 < s < 3/2).
inline double bessel_mellin_closed(BesselKind kind, double s) {
  const double g = std::exp(2.0 * log_gamma(0.5 * s));
  switch (kind) {
    case BesselKind::K0:
      return std::pow(2.0, s - 2.0) * g;
    case BesselKind::Y0:
      return -std::pow(2.0, s - 1.0) / std::numbers::pi * std::cos(0.5 * std::numbers::pi * s) * g;
    case BesselKind::J:
      break;
  }
  throw std::invalid_argument("bessel_mellin_closed: K0 or Y0 only");
}

/// int_0^inf B(x) x^{s-1} dx by quadrature.
///
/// Near 0 the substitution x = e^v turns the log singularity into an
/// exponentially decaying tail in v. For Y_0 the oscillatory tail beyond
/// x = 20 is summed over panels of width pi and extrapolated with Wynn's
/// epsilon algorithm.
inline double bessel_mellin_numeric(BesselKind kind, double s, double abs_tol = 1e-13) {
  if (kind == BesselKind::J) throw std::invalid_argument("bessel_mellin_numeric: K0 or Y0 only");
  if (!(s > 0.0)) throw std::domain_error("bessel_mellin_numeric: need s > 0");
  if (kind == BesselKind::Y0 && !(s < 1.5)) throw std::domain_error("bessel_mellin_numeric: Y0 needs s < 3/2");
  // e^{s v} |v| < 1e-18 below v_lo
  const double v_lo = -(45.0 + 2.0 * std::log(1.0 / s)) / s;
  const double x_split = kind == BesselKind::K0 ? 60.0 : 20.0;
  auto near = [&](double v) {
    const double x = std::exp(v);
    return bessel(kind, 0, x) * std::exp(s * v);
  };
  double total = quad::integrate_panels<double>(near, v_lo, std::log(x_split), 1.0, abs_tol).value;
  if (kind == BesselKind::K0) return total;  // K_0(60) ~ 1e-27

  auto far = [&](double x) { return bessel_y0(x) * std::pow(x, s - 1.0); };
  std::vector<double> partial;
  double acc = 0.0;
  for (int j = 0; j < 40; ++j) {
    const double a = x_split + std::numbers::pi * j;
    acc += quad::integrate<double>(far, a, a + std::numbers::pi, 1e-3 * abs_tol).value;
    partial.push_back(acc);
  }
  return total + quad::wynn_epsilon(partial).value;
}

}  // namespace apvar
