#pragma once
// The Bessel transforms omega_B(alpha) = c_B int w(x) B(4 pi alpha sqrt(x)) dx
// with B in {J_{k-1}, Y_0, K_0}: direct oscillatory quadrature, the inverse
// Mellin representation, and a piecewise Chebyshev table for bulk use.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "apvar/specfun/bessel.hpp"
#include "apvar/specfun/gamma.hpp"
#include "apvar/specfun/mellin.hpp"
#include "apvar/specfun/quadrature.hpp"
#include "apvar/specfun/smooth_weight.hpp"

namespace apvar {

enum class OmegaTag { J, Y, K };

struct OmegaKind {
  OmegaTag tag = OmegaTag::J;
  int k = 12;
  cplx constant;  // c_B

  static OmegaKind J(int k = 12) {
    if (k < 2 || k % 2 != 0) throw std::invalid_argument("OmegaKind::J: weight must be even and >= 2");
    const double ik = (k / 2) % 2 == 0 ? 1.0 : -1.0;
    return {OmegaTag::J, k, cplx(2.0 * std::numbers::pi * ik, 0.0)};
  }
  static OmegaKind Y() { return {OmegaTag::Y, 0, cplx(-2.0 * std::numbers::pi, 0.0)}; }
  static OmegaKind K() { return {OmegaTag::K, 0, cplx(4.0, 0.0)}; }

  double kernel(double x) const {
    switch (tag) {
      case OmegaTag::J:
        return bessel_j(k - 1, x);
      case OmegaTag::Y:
        return bessel_y0(x);
      case OmegaTag::K:
        return bessel_k0(x);
    }
    return 0.0;
  }

  std::string name() const {
    switch (tag) {
      case OmegaTag::J:
        return "J";
      case OmegaTag::Y:
        return "Y";
      case OmegaTag::K:
        return "K";
    }
    return "?";
  }
};

inline double omega_default_tol(const SmoothWeight& w) { return 1e-11 * w.X(); }

/// c_B int_{sqrt H}^{sqrt X} w(u^2) B(4 pi alpha u) 2u du, panels of half a
/// period 1/(4 alpha) capped at (sqrt X - sqrt H)/16.
inline cplx omega_direct(const OmegaKind& kind, double alpha, const SmoothWeight& w, double abs_tol = -1.0) {
  if (!(alpha > 0.0)) throw std::domain_error("omega_direct: alpha must be > 0");
  if (abs_tol <= 0.0) abs_tol = omega_default_tol(w);
  const double a = std::sqrt(w.H()), b = std::sqrt(w.X());
  const double four_pi_alpha = 4.0 * std::numbers::pi * alpha;
  auto f = [&](double u) { return w(u * u) * kind.kernel(four_pi_alpha * u) * 2.0 * u; };
  double width = std::min(1.0 / (4.0 * alpha), (b - a) / 16.0);
  if (kind.tag == OmegaTag::K) width = (b - a) / 16.0;  // no oscillation
  const double scale = std::abs(kind.constant);
  const auto r = quad::integrate_panels<double>(f, a, b, width, abs_tol / scale);
  return kind.constant * r.value;
}

/// P(z) = int_0^z t B(t) dt for B = J_{k-1} or Y_0, as piecewise Chebyshev
/// antiderivatives on panels of width pi (graded towards 0 for Y_0, where
/// t Y_0(t) has a t log t singularity). Grows lazily through ensure().
class BesselMoment {
 public:
  static constexpr int kDegree = 24;

  explicit BesselMoment(const OmegaKind& kind) : kind_(kind) {
    if (kind.tag == OmegaTag::K) throw std::invalid_argument("BesselMoment: J or Y only");
    // below 1e-8 the Y_0 moment is under 1e-15
    edges_.push_back(kind.tag == OmegaTag::Y ? 1e-8 : 0.0);
    base_.push_back(0.0);
    for (int j = 0; j <= kDegree; ++j) nodes_[j] = std::cos(std::numbers::pi * (j + 0.5) / (kDegree + 1));
  }

  void ensure(double z_hi) {
    constexpr int n = kDegree + 1;
    std::array<double, n> fv{}, c{};
    while (edges_.back() < z_hi) {
      const double a = edges_.back();
      const double b = a + (a > 0.0 ? std::min(std::numbers::pi, a) : std::numbers::pi);
      for (int j = 0; j < n; ++j) {
        const double t = 0.5 * (a + b) + 0.5 * (b - a) * nodes_[j];
        fv[j] = t * kind_.kernel(t);
      }
      for (int m = 0; m < n; ++m) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += fv[j] * std::cos(std::numbers::pi * m * (j + 0.5) / n);
        c[m] = (m == 0 ? 1.0 : 2.0) * acc / n;
      }
      // antiderivative on [-1, 1], zero at -1, times the half width
      std::array<double, n + 1> C{};
      auto cm = [&](int m) { return m < n ? c[m] : 0.0; };
      C[1] = cm(0) - 0.5 * cm(2);
      for (int m = 2; m <= n; ++m) C[m] = (cm(m - 1) - cm(m + 1)) / (2.0 * m);
      double at_minus_one = 0.0;
      for (int m = 1; m <= n; ++m) at_minus_one += (m % 2 == 0 ? 1.0 : -1.0) * C[m];
      C[0] = -at_minus_one;
      double at_plus_one = 0.0;
      for (int m = 0; m <= n; ++m) at_plus_one += C[m];
      const double half = 0.5 * (b - a);
      for (int m = 0; m <= n; ++m) coef_.push_back(C[m] * half);
      base_.push_back(base_.back() + at_plus_one * half);
      edges_.push_back(b);
    }
  }

  double operator()(double z) const {
    if (z <= edges_.front()) return 0.0;
    if (z > edges_.back()) throw std::out_of_range("BesselMoment: z=" + std::to_string(z) + " beyond table");
    auto it = std::upper_bound(edges_.begin(), edges_.end(), z);
    std::size_t p = static_cast<std::size_t>(it - edges_.begin()) - 1;
    p = std::min(p, edges_.size() - 2);
    const double a = edges_[p], b = edges_[p + 1];
    const double x = (2.0 * z - a - b) / (b - a);
    const double* C = &coef_[p * (kDegree + 2)];
    double b1 = 0.0, b2 = 0.0;
    for (int m = kDegree + 1; m >= 1; --m) {
      const double t = 2.0 * x * b1 - b2 + C[m];
      b2 = b1;
      b1 = t;
    }
    return base_[p] + x * b1 - b2 + C[0];
  }

  double z_hi() const { return edges_.back(); }

 private:
  OmegaKind kind_;
  std::array<double, kDegree + 1> nodes_{};
  std::vector<double> edges_;
  std::vector<double> base_;
  std::vector<double> coef_;
};

/// omega_B(alpha) after one integration by parts against P:
///   -c_B (2 / c^2) int w'(x) P(c sqrt x) dx,  c = 4 pi alpha,
/// so only the two ramps are integrated. The moment table is grown as needed.
inline double omega_ramp(const OmegaKind& kind, double alpha, const SmoothWeight& w, BesselMoment& moment,
                         double abs_tol = -1.0) {
  if (!(alpha > 0.0)) throw std::domain_error("omega_ramp: alpha must be > 0");
  if (abs_tol <= 0.0) abs_tol = omega_default_tol(w);
  const double c = 4.0 * std::numbers::pi * alpha;
  moment.ensure(c * std::sqrt(w.X()));
  const double pre = -kind.constant.real() * 2.0 / (c * c);
  auto f = [&](double u) { return w.eval(u * u, 1) * moment(c * u) * 2.0 * u; };
  const double width = std::numbers::pi / c;
  const double tol = 0.5 * abs_tol / std::abs(pre);
  const double u0 = std::sqrt(w.H()), u1 = std::sqrt(2.0 * w.H());
  const double u2 = std::sqrt(w.X() - w.H()), u3 = std::sqrt(w.X());
  const double lo = quad::integrate_panels<double>(f, u0, u1, std::min(width, (u1 - u0) / 8.0), tol).value;
  const double hi = quad::integrate_panels<double>(f, u2, u3, std::min(width, (u3 - u2) / 8.0), tol).value;
  return pre * (lo + hi);
}

/// Mellin kernel of omega_B(sqrt(.)): F for J, G for Y, 2H for K, rescaled if
/// the kind carries a non-standard constant.
inline cplx omega_mellin_kernel(const OmegaKind& kind, cplx s) {
  switch (kind.tag) {
    case OmegaTag::J:
      return gamma_quotient(QuotientKind::F, s, kind.k) * (kind.constant / OmegaKind::J(kind.k).constant);
    case OmegaTag::Y:
      return gamma_quotient(QuotientKind::G, s) * (kind.constant / OmegaKind::Y().constant);
    case OmegaTag::K:
      return 2.0 * gamma_quotient(QuotientKind::H, s) * (kind.constant / OmegaKind::K().constant);
  }
  throw std::invalid_argument("omega_mellin_kernel: unknown kind");
}

inline void check_omega_line(const OmegaKind& kind, const MellinLine& line) {
  const double lo = kind.tag == OmegaTag::J ? -0.5 * (kind.k - 1) : 0.0;
  if (!(line.sigma > lo)) {
    throw std::invalid_argument("omega_mellin: sigma=" + std::to_string(line.sigma) + " must exceed " +
                                std::to_string(lo));
  }
}

/// omega_B(sqrt(alpha)) = (1 / 2 pi i) int_(sigma) kernel(s) psi(1 - s) alpha^{-s} ds,
/// reusing a precomputed psi grid.
inline cplx omega_mellin(const OmegaKind& kind, double alpha, const PsiGrid& grid, double trunc_tol = 1e-9) {
  if (!(alpha > 0.0)) throw std::domain_error("omega_mellin: alpha must be > 0");
  check_omega_line(kind, grid.line);
  const double la = std::log(alpha);
  const double value = contour_integral_real(
      [&](std::size_t j) {
        const cplx s(grid.line.sigma, grid.line.t(j));
        return omega_mellin_kernel(kind, s) * grid.psi_one_minus_s[j] * std::exp(-s * la);
      },
      grid.line, trunc_tol);
  return {value, 0.0};
}

inline cplx omega_mellin(const OmegaKind& kind, double alpha, const SmoothWeight& w, const MellinLine& line,
                         double trunc_tol = 1e-9) {
  check_omega_line(kind, line);
  return omega_mellin(kind, alpha, PsiGrid::build(w, line), trunc_tol);
}

/// Batch form of omega_mellin: kernel(s_j) psi(1 - s_j) is stored once, so
/// each alpha costs one pass over the grid regardless of how fast the
/// Bessel kernel oscillates.
class OmegaMellinEvaluator {
 public:
  OmegaMellinEvaluator(const OmegaKind& kind, const SmoothWeight& w, double sigma = 0.5, double tol = 1e-6) {
    MellinLine line = MellinLine::for_weight(w, sigma, tol);
    check_omega_line(kind, line);
    const PsiGrid grid = PsiGrid::build(w, line);
    sigma_ = grid.line.sigma;
    step_ = grid.line.step;
    coef_.reserve(grid.psi_one_minus_s.size());
    for (std::size_t j = 0; j < grid.psi_one_minus_s.size(); ++j) {
      const cplx s(sigma_, grid.line.t(j));
      coef_.push_back(omega_mellin_kernel(kind, s) * grid.psi_one_minus_s[j] * (j == 0 ? 0.5 : 1.0));
    }
  }

  /// omega_B(alpha), i.e. the Mellin integral at sqrt(.) = alpha.
  double operator()(double alpha) const {
    const double la = 2.0 * std::log(alpha);
    const cplx rot = std::polar(1.0, -step_ * la);
    double sum = 0.0;
    cplx z(1.0, 0.0);
    for (std::size_t j = 0; j < coef_.size(); ++j) {
      if (j % 64 == 0) z = std::polar(1.0, -step_ * static_cast<double>(j) * la);
      sum += (coef_[j] * z).real();
      z *= rot;
    }
    return std::exp(-sigma_ * la) * 2.0 * step_ * sum / (2.0 * std::numbers::pi);
  }

  std::size_t nodes() const { return coef_.size(); }

 private:
  double sigma_ = 0.5;
  double step_ = 0.0;
  std::vector<cplx> coef_;
};

/// Piecewise Chebyshev interpolant of alpha -> Re omega_B(alpha) on
/// [alpha_lo, hi), where hi grows through ensure(). Panels are one
/// oscillation period 1/(2 sqrt X) wide, graded geometrically towards
/// alpha_lo where omega_Y has a log singularity. Nodes come from omega_ramp
/// for J and Y and from omega_direct for K. Evaluation is const and may run
/// concurrently; ensure() may not.
class OmegaTable {
 public:
  static constexpr int kDegree = 24;

  OmegaTable(const OmegaKind& kind, const SmoothWeight& w, double alpha_lo, double abs_tol = -1.0)
      : kind_(kind), w_(w), lo_(alpha_lo), abs_tol_(abs_tol), period_(1.0 / (2.0 * std::sqrt(w.X()))) {
    if (!(alpha_lo > 0.0)) throw std::invalid_argument("OmegaTable: need alpha_lo > 0");
    if (kind.tag != OmegaTag::K) moment_ = std::make_unique<BesselMoment>(kind);
    edges_.push_back(lo_);
    for (int j = 0; j <= kDegree; ++j) nodes_[j] = std::cos(std::numbers::pi * (j + 0.5) / (kDegree + 1));
  }

  OmegaTable(const OmegaKind& kind, const SmoothWeight& w, double alpha_lo, double alpha_hi, double abs_tol)
      : OmegaTable(kind, w, alpha_lo, abs_tol) {
    ensure(alpha_hi);
  }

  /// Builds panels until alpha_hi is covered.
  void ensure(double alpha_hi) {
    constexpr int n = kDegree + 1;
    std::vector<double> fv(n);
    while (edges_.back() < alpha_hi) {
      const double a = edges_.back();
      const double b = a + std::min(period_, 0.5 * a);
      for (int j = 0; j < n; ++j) {
        const double alpha = 0.5 * (a + b) + 0.5 * (b - a) * nodes_[j];
        fv[j] = moment_ ? omega_ramp(kind_, alpha, w_, *moment_, abs_tol_) : omega_direct(kind_, alpha, w_, abs_tol_).real();
      }
      for (int m = 0; m < n; ++m) {
        double c = 0.0;
        for (int j = 0; j < n; ++j) c += fv[j] * std::cos(std::numbers::pi * m * (j + 0.5) / n);
        coef_.push_back((m == 0 ? 1.0 : 2.0) * c / n);
      }
      edges_.push_back(b);
    }
  }

  double operator()(double alpha) const {
    if (alpha < lo_ || alpha > edges_.back()) {
      throw std::out_of_range("OmegaTable: alpha=" + std::to_string(alpha) + " outside [" + std::to_string(lo_) +
                              ", " + std::to_string(edges_.back()) + "]");
    }
    auto it = std::upper_bound(edges_.begin(), edges_.end(), alpha);
    std::size_t p = it == edges_.begin() ? 0 : static_cast<std::size_t>(it - edges_.begin()) - 1;
    p = std::min(p, edges_.size() - 2);
    const double a = edges_[p], b = edges_[p + 1];
    const double x = (2.0 * alpha - a - b) / (b - a);
    const double* c = &coef_[p * (kDegree + 1)];
    double b1 = 0.0, b2 = 0.0;
    for (int m = kDegree; m >= 1; --m) {
      const double t = 2.0 * x * b1 - b2 + c[m];
      b2 = b1;
      b1 = t;
    }
    return x * b1 - b2 + c[0];
  }

  std::size_t panels() const { return edges_.size() - 1; }
  double alpha_lo() const { return lo_; }
  double alpha_hi() const { return edges_.back(); }
  const OmegaKind& kind() const { return kind_; }

 private:
  OmegaKind kind_;
  SmoothWeight w_;
  double lo_;
  double abs_tol_;
  double period_;
  std::array<double, kDegree + 1> nodes_{};
  std::vector<double> edges_;
  std::vector<double> coef_;
  std::unique_ptr<BesselMoment> moment_;
};

}  // namespace apvar
