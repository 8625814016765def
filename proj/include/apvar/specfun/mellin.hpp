#pragma once
// Mellin transform psi of the smooth weight, vertical-line contour
// quadrature, the Parseval contour and the Mellin-Barnes identity.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "apvar/specfun/gamma.hpp"
#include "apvar/specfun/quadrature.hpp"
#include "apvar/specfun/smooth_weight.hpp"

namespace apvar {

class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, double suggested_t_max)
      : std::runtime_error(what), suggested_(suggested_t_max) {}
  double suggested_t_max() const { return suggested_; }

 private:
  double suggested_;
};

namespace detail {

inline cplx complex_expm1(cplx z) {
  if (std::abs(z) < 1e-3) return z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)));
  return std::exp(z) - 1.0;
}

inline std::size_t oscillation_panels(double phase_span) {
  return static_cast<std::size_t>(std::ceil(std::abs(phase_span) / std::numbers::pi)) + 1;
}

}  // namespace detail

/// psi(s) = int_0^inf w(x) x^{s-1} dx.
///
/// For |s| >= 1 the transform is integrated by parts once,
/// psi(s) = -(1/s) int w'(x) x^s dx, so only the two ramps are integrated and
/// no plateau term has to cancel against them when |Im s| is large.
inline cplx mellin_psi(cplx s, const SmoothWeight& w, double rel_tol = 1e-12) {
  const double H = w.H(), X = w.X();
  const double scale_rise = std::pow(2.0 * H, s.real());
  const double scale_fall = std::pow(X, s.real());
  const double t = s.imag();

  if (std::abs(s) >= 1.0) {
    // rising ramp: x = H (1 + tau), w'(x) dx = S'(tau) dtau
    auto rise = [&](double tau) -> cplx {
      return SmoothstepProfile::derivative(tau, 1) * std::exp(s * std::log(H * (1.0 + tau)));
    };
    // falling ramp: x = X - H tau, w'(x) dx = S'(tau) dtau with sign -1 folded below
    auto fall = [&](double tau) -> cplx {
      return SmoothstepProfile::derivative(tau, 1) * std::exp(s * std::log(X - H * tau));
    };
    const double tol_r = rel_tol * std::max(scale_rise, scale_fall) * 1e-2;
    const auto pr = detail::oscillation_panels(t * std::log(2.0));
    const auto pf = detail::oscillation_panels(t * std::log(X / (X - H)));
    const auto ir = quad::integrate_panels<cplx>(rise, 0.0, 1.0, 1.0 / static_cast<double>(pr), tol_r);
    const auto iff = quad::integrate_panels<cplx>(fall, 0.0, 1.0, 1.0 / static_cast<double>(pf), tol_r);
    return -(ir.value - iff.value) / s;
  }

  // |s| < 1: plateau in closed form plus both ramps
  const cplx z = s;  // exponent of x is s - 1; antiderivative x^s / s
  auto rise = [&](double tau) -> cplx {
    return SmoothstepProfile::value(tau) * std::exp((s - 1.0) * std::log(H * (1.0 + tau))) * H;
  };
  auto fall = [&](double tau) -> cplx {
    return SmoothstepProfile::value(tau) * std::exp((s - 1.0) * std::log(X - H * tau)) * H;
  };
  const double tol = rel_tol * (X - 2.0 * H) * std::pow(H, s.real() - 1.0) * 1e-2;
  const auto ir = quad::integrate<cplx>(rise, 0.0, 1.0, tol);
  const auto iff = quad::integrate<cplx>(fall, 0.0, 1.0, tol);
  const double la = std::log(2.0 * H), lb = std::log(X - H);
  cplx plateau;
  if (std::abs(z) < 1e-14) {
    plateau = lb - la;
  } else {
    plateau = std::exp(z * la) * detail::complex_expm1(z * (lb - la)) / z;
  }
  return ir.value + plateau + iff.value;
}

/// Fast psi(s) for |Im s| <= t_bound, |s| >= 1/4: after integrating by parts
/// and substituting x = e^v each ramp integrand is a compactly supported smooth
/// function times e^{itv}, so a uniform trapezoid rule in v converges faster
/// than any power. Nodes resolve frequencies up to t_bound plus a margin for
/// the ramp profile's own spectrum.
class PsiTransform {
 public:
  PsiTransform(const SmoothWeight& w, double t_bound) : w_(w), t_bound_(t_bound) {
    add_ramp(std::log(w.H()), std::log(2.0 * w.H()), rise_);
    add_ramp(std::log(w.X() - w.H()), std::log(w.X()), fall_);
  }

  double t_bound() const { return t_bound_; }

  cplx operator()(cplx s) const {
    if (std::abs(s.imag()) > t_bound_ || std::abs(s) < 0.25) return mellin_psi(s, w_);
    return -(sum(rise_, s) + sum(fall_, s)) / s;
  }

 private:
  struct Ramp {
    double v0 = 0.0, dv = 0.0;
    std::vector<double> g;  // w'(e^v) e^v dv at v0 + i dv
  };

  void add_ramp(double a, double b, Ramp& r) const {
    const double span = b - a;
    // profile spectrum ~ exp(-2 sqrt(omega)) in ramp units; 700 / span leaves ~1e-23
    const double omega = t_bound_ + 700.0 / span;
    const auto n = static_cast<std::size_t>(std::ceil(span * omega / std::numbers::pi)) + 2;
    r.v0 = a;
    r.dv = span / static_cast<double>(n);
    r.g.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      const double x = std::exp(a + r.dv * static_cast<double>(i));
      r.g[i] = w_.eval(x, 1) * x * r.dv;
    }
  }

  static cplx sum(const Ramp& r, cplx s) {
    const cplx step = std::exp(s * r.dv);
    cplx acc(0.0, 0.0), z(1.0, 0.0);
    for (std::size_t i = 0; i < r.g.size(); ++i) {
      if (i % 64 == 0) z = std::exp(s * (r.dv * static_cast<double>(i)));
      acc += r.g[i] * z;
      z *= step;
    }
    return acc * std::exp(s * r.v0);
  }

  SmoothWeight w_;
  double t_bound_;
  Ramp rise_, fall_;
};

/// Vertical line Re s = sigma truncated at |Im s| <= t_max, trapezoid step.
struct MellinLine {
  double sigma = 0.5;
  double t_max = 0.0;
  double step = 0.25;

  /// t_max = (X/H) tol^{-1/3}, step = min(0.25, 1/(2 log X)).
  static MellinLine for_weight(const SmoothWeight& w, double sigma, double tol = 1e-6) {
    MellinLine line;
    line.sigma = sigma;
    line.t_max = (w.X() / w.H()) * std::pow(tol, -1.0 / 3.0);
    line.step = std::min(0.25, 1.0 / (2.0 * std::log(w.X())));
    return line;
  }

  std::size_t nodes() const { return static_cast<std::size_t>(std::ceil(t_max / step)) + 1; }
  double t(std::size_t j) const { return step * static_cast<double>(j); }
};

/// psi(1 - s) sampled at s = sigma + i t_j, t_j = j step, j = 0..nodes-1.
///
/// Sampling starts from line.t_max and keeps going past it until the envelope
/// |psi(1-s)| (1+t)^{2 sigma - 1}, which dominates every gamma-quotient kernel
/// used here, stays below tail_tol times its peak over a trailing window of
/// length t_max / 10. line.t_max is then set to the last node.
struct PsiGrid {
  MellinLine line;
  std::vector<cplx> psi_one_minus_s;

  static PsiGrid build(const SmoothWeight& w, MellinLine line, double tail_tol = 1e-13, double max_growth = 64.0) {
    PsiGrid g;
    const std::size_t base = line.nodes();
    const auto window = std::max<std::size_t>(8, base / 10);
    const auto cap = static_cast<std::size_t>(static_cast<double>(base) * max_growth);
    double peak = 0.0;
    std::size_t quiet = 0;
    auto psi = std::make_unique<PsiTransform>(w, 2.0 * line.t_max);
    for (std::size_t j = 0;; ++j) {
      const double t = line.t(j);
      if (t > psi->t_bound()) psi = std::make_unique<PsiTransform>(w, 2.0 * psi->t_bound());
      const cplx v = (*psi)(cplx(1.0 - line.sigma, -t));
      g.psi_one_minus_s.push_back(v);
      const double env = std::abs(v) * std::pow(1.0 + t, 2.0 * line.sigma - 1.0);
      peak = std::max(peak, env);
      quiet = env <= tail_tol * peak ? quiet + 1 : 0;
      if (j + 1 >= base && quiet >= window) break;
      if (j + 1 >= cap) {
        throw TruncationError("PsiGrid: envelope still above tolerance at t=" + std::to_string(t), 2.0 * t);
      }
    }
    line.t_max = line.t(g.psi_one_minus_s.size() - 1);
    g.line = line;
    return g;
  }
};

/// (1 / 2 pi i) int_(sigma) f(s) ds for f(conj s) = conj f(s), with a
/// truncation check: |f| at t_max must be below tol times the peak.
template <class F>
double contour_integral_real(F&& f, const MellinLine& line, double tol) {
  double sum = 0.0, peak = 0.0, last = 0.0;
  const std::size_t n = line.nodes();
  for (std::size_t j = 0; j < n; ++j) {
    const cplx v = f(j);
    const double weight = j == 0 ? 0.5 : 1.0;
    sum += weight * v.real();
    peak = std::max(peak, std::abs(v));
    if (j + 1 == n) last = std::abs(v);
  }
  if (last > tol * peak) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", last / peak);
    throw TruncationError(std::string("contour truncated too early: |integrand(t_max)| / peak = ") + buf,
                          2.0 * line.t_max);
  }
  return 2.0 * line.step * sum / (2.0 * std::numbers::pi);
}

/// int_0^inf w(x)^2 dx by quadrature on the ramps plus the plateau length.
inline double weight_square_integral(const SmoothWeight& w) {
  auto sq = [](double tau) {
    const double v = SmoothstepProfile::value(tau);
    return v * v;
  };
  const double ramp = quad::integrate(sq, 0.0, 1.0, 1e-15).value;
  return (w.X() - 3.0 * w.H()) + 2.0 * w.H() * ramp;
}

/// (1 / 2 pi i) int_(sigma) psi(s) psi(1 - s) ds, which by Parseval equals int w^2.
inline double parseval_contour(const SmoothWeight& w, const MellinLine& line, double tol = 1e-6) {
  const PsiTransform psi(w, line.t_max);
  std::vector<cplx> a, b;
  a.reserve(line.nodes());
  b.reserve(line.nodes());
  for (std::size_t j = 0; j < line.nodes(); ++j) {
    const cplx s(line.sigma, line.t(j));
    a.push_back(psi(s));
    b.push_back(std::abs(line.sigma - 0.5) < 1e-15 ? std::conj(a.back()) : psi(1.0 - s));
  }
  return contour_integral_real([&](std::size_t j) { return a[j] * b[j]; }, line, tol);
}

struct MellinBarnesResult {
  cplx lhs;
  cplx rhs;
  double diff = 0.0;
};

namespace detail {

// (1/2 pi i) int_(c) kernel(z) dz by trapezoid on [-t_max, t_max]; the
// gamma factors decay like exp(-pi |t|).
template <class F>
cplx barnes_integral(F&& kernel, double c, double t_max, double step) {
  const auto n = static_cast<long>(std::ceil(t_max / step));
  cplx sum(0.0, 0.0);
  for (long j = -n; j <= n; ++j) sum += kernel(cplx(c, step * static_cast<double>(j)));
  return sum * step / (2.0 * std::numbers::pi);
}

inline void check_barnes_contour(cplx lambda, double c) {
  if (!(c < 0.0 && c > -lambda.real())) {
    throw std::invalid_argument("mellin_barnes_check: contour c=" + std::to_string(c) +
                                " must satisfy -Re(lambda) < c < 0");
  }
}

}  // namespace detail

/// (A + B)^{-lambda} against
/// (1 / Gamma(lambda)) (1 / 2 pi i) int_(c) Gamma(lambda + z) Gamma(-z) A^{-lambda-z} B^z dz.
inline MellinBarnesResult mellin_barnes_check(double A, double B, cplx lambda, double c) {
  if (!(A > 0.0) || !(B > 0.0)) throw std::invalid_argument("mellin_barnes_check: A and B must be positive");
  detail::check_barnes_contour(lambda, c);
  const double la = std::log(A), lb = std::log(B);
  auto kernel = [&](cplx z) { return std::exp(log_gamma(lambda + z) + log_gamma(-z) - (lambda + z) * la + z * lb); };
  const double step = std::min(0.02, 0.1 * std::min(c + lambda.real(), -c));
  MellinBarnesResult r;
  r.lhs = std::exp(-lambda * std::log(A + B));
  r.rhs = detail::barnes_integral(kernel, c, 60.0, step) / std::exp(log_gamma(lambda));
  r.diff = std::abs(r.lhs - r.rhs);
  return r;
}

/// log(A + B) (A + B)^{-lambda}, obtained by differentiating the plain
/// identity in lambda.
inline MellinBarnesResult mellin_barnes_log_check(double A, double B, cplx lambda, double c) {
  if (!(A > 0.0) || !(B > 0.0)) throw std::invalid_argument("mellin_barnes_log_check: A and B must be positive");
  detail::check_barnes_contour(lambda, c);
  const double la = std::log(A), lb = std::log(B);
  auto base = [&](cplx z) { return std::exp(log_gamma(lambda + z) + log_gamma(-z) - (lambda + z) * la + z * lb); };
  auto with_digamma = [&](cplx z) { return base(z) * digamma(lambda + z); };
  const double step = std::min(0.02, 0.1 * std::min(c + lambda.real(), -c));
  const cplx gl = std::exp(log_gamma(lambda));
  const cplx i0 = detail::barnes_integral(base, c, 60.0, step);
  const cplx i1 = detail::barnes_integral(with_digamma, c, 60.0, step);
  MellinBarnesResult r;
  r.lhs = std::log(A + B) * std::exp(-lambda * std::log(A + B));
  r.rhs = digamma(lambda) / gl * i0 - i1 / gl + la * i0 / gl;
  r.diff = std::abs(r.lhs - r.rhs);
  return r;
}

}  // namespace apvar
