#pragma once
// Complex log-gamma and digamma (Stirling series after an upward shift), and
// the three gamma quotients that act as Mellin kernels of the Bessel
// transforms.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace apvar {

using cplx = std::complex<double>;

class PoleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

// B_{2k} / (2k (2k-1)), k = 1..10
inline constexpr std::array<double, 10> kStirling = {
    1.0 / 12.0,          -1.0 / 360.0,          1.0 / 1260.0,         -1.0 / 1680.0,
    1.0 / 1188.0,        -691.0 / 360360.0,     1.0 / 156.0,          -3617.0 / 122400.0,
    43867.0 / 244188.0,  -174611.0 / 125400.0};
// B_{2k} / (2k), k = 1..10
inline constexpr std::array<double, 10> kDigamma = {
    1.0 / 12.0,      -1.0 / 120.0,      1.0 / 252.0,      -1.0 / 240.0,       1.0 / 132.0,
    -691.0 / 32760.0, 1.0 / 12.0,       -3617.0 / 8160.0, 43867.0 / 14364.0, -174611.0 / 6600.0};

inline constexpr double kShiftTarget = 12.0;

inline void check_pole(cplx z, const char* who) {
  if (z.real() <= 0.5 && std::abs(z.imag()) < 1e-14) {
    const double r = std::round(z.real());
    if (r <= 0.0 && std::abs(z.real() - r) < 1e-14) {
      throw PoleError(std::string(who) + ": pole at nonpositive integer " + std::to_string(r));
    }
  }
}

}  // namespace detail

/// Principal branch of log Gamma(z): continuous off the negative real axis and
/// real for z > 0.
inline cplx log_gamma(cplx z) {
  detail::check_pole(z, "log_gamma");
  cplx shift_log(0.0, 0.0);
  // sum of principal logs keeps the branch continuous in the upper and lower half planes
  while (z.real() < detail::kShiftTarget) {
    shift_log += std::log(z);
    z += 1.0;
  }
  const cplx inv = 1.0 / z;
  const cplx inv2 = inv * inv;
  cplx series(0.0, 0.0);
  cplx pw = inv;
  for (double c : detail::kStirling) {
    series += c * pw;
    pw *= inv2;
  }
  return (z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * std::numbers::pi) + series - shift_log;
}

inline double log_gamma(double x) { return log_gamma(cplx(x, 0.0)).real(); }

inline cplx gamma(cplx z) { return std::exp(log_gamma(z)); }

/// psi(z) = Gamma'(z) / Gamma(z).
inline cplx digamma(cplx z) {
  detail::check_pole(z, "digamma");
  cplx shift(0.0, 0.0);
  while (z.real() < detail::kShiftTarget) {
    shift += 1.0 / z;
    z += 1.0;
  }
  const cplx inv = 1.0 / z;
  const cplx inv2 = inv * inv;
  cplx series(0.0, 0.0);
  cplx pw = inv2;
  for (double c : detail::kDigamma) {
    series += c * pw;
    pw *= inv2;
  }
  return std::log(z) - 0.5 * inv - series - shift;
}

/// log cos(pi s) without overflow for large |Im s|.
inline cplx log_cos_pi(cplx s) {
  const double pi = std::numbers::pi;
  const cplx i(0.0, 1.0);
  if (std::abs(s.imag()) < 20.0) return std::log(std::cos(pi * s));
  // cos(pi s) = e^{-i pi s} (1 + e^{2 i pi s}) / 2 for Im s > 0; mirror for Im s < 0
  if (s.imag() > 0) return -i * pi * s + std::log((1.0 + std::exp(2.0 * i * pi * s)) / 2.0);
  return i * pi * s + std::log((1.0 + std::exp(-2.0 * i * pi * s)) / 2.0);
}

enum class QuotientKind { F, G, H };

inline constexpr double kPoleGuard = 1e-8;

namespace detail {
inline void guard_gamma_arg(cplx z, const char* who) {
  if (z.real() < 0.5) {
    const double r = std::round(z.real());
    if (r <= 0.0 && std::abs(cplx(z.real() - r, z.imag())) < kPoleGuard) {
      throw PoleError(std::string(who) + ": too close to a gamma pole");
    }
  }
}
inline bool near_nonpositive_integer(cplx z) {
  const double r = std::round(z.real());
  return r <= 0.0 && std::abs(cplx(z.real() - r, z.imag())) < kPoleGuard;
}
}  // namespace detail

/// F(s) = 2 pi i^k (2 pi)^{-2s} Gamma((k-1)/2 + s) / Gamma((k+1)/2 - s)
/// G(s) = 2 (2 pi)^{-2s} cos(pi s) Gamma(s)^2
/// H(s) = (2 pi)^{-2s} Gamma(s)^2
inline cplx gamma_quotient(QuotientKind kind, cplx s, int k = 12) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double log_two_pi = std::log(two_pi);
  switch (kind) {
    case QuotientKind::F: {
      if (k < 2 || k % 2 != 0) throw std::invalid_argument("gamma_quotient: weight must be even");
      const cplx top = 0.5 * (k - 1) + s;
      const cplx bottom = 0.5 * (k + 1) - s;
      detail::guard_gamma_arg(top, "gamma_quotient F");
      if (detail::near_nonpositive_integer(bottom)) return {0.0, 0.0};  // 1/Gamma vanishes
      const double ik = (k / 2) % 2 == 0 ? 1.0 : -1.0;                  // i^k for even k
      return ik * two_pi * std::exp(-2.0 * s * log_two_pi + log_gamma(top) - log_gamma(bottom));
    }
    case QuotientKind::G:
      detail::guard_gamma_arg(s, "gamma_quotient G");
      return 2.0 * std::exp(-2.0 * s * log_two_pi + log_cos_pi(s) + 2.0 * log_gamma(s));
    case QuotientKind::H:
      detail::guard_gamma_arg(s, "gamma_quotient H");
      return std::exp(-2.0 * s * log_two_pi + 2.0 * log_gamma(s));
  }
  throw std::invalid_argument("gamma_quotient: unknown kind");
}

}  // namespace apvar
