#pragma once
// Smooth cutoff w supported on [H, X], equal to 1 on [2H, X - H].

#include <cmath>
#include <stdexcept>
#include <string>

namespace apvar {

/// Ramp S(t) = f(t) / (f(t) + f(1-t)) with f(t) = exp(-1/t). S(1-t) = 1 - S(t)
/// and every derivative vanishes at t = 0 and t = 1.
struct SmoothstepProfile {
  // S = 1 / (1 + e^g), g(t) = 1/t - 1/(1-t)
  static double value(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double g = 1.0 / t - 1.0 / (1.0 - t);
    if (g > 0) {
      const double e = std::exp(-g);
      return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(g));
  }

  // j-th derivative, j in {0, 1, 2}
  static double derivative(double t, int j) {
    if (j == 0) return value(t);
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double g = 1.0 / t - 1.0 / (1.0 - t);
    const double dg = -1.0 / (t * t) - 1.0 / ((1.0 - t) * (1.0 - t));
    const double e = std::exp(-std::abs(g));
    const double p = e / ((1.0 + e) * (1.0 + e));  // S (1 - S)
    const double d1 = -p * dg;
    if (j == 1) return d1;
    const double s = value(t);
    const double d2g = 2.0 / (t * t * t) - 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t));
    return -(d1 * (1.0 - 2.0 * s) * dg + p * d2g);
  }
};

class SmoothWeight {
 public:
  SmoothWeight(double H, double X) : H_(H), X_(X) {
    if (!(H > 0.0) || !(3.0 * H < X)) {
      throw std::invalid_argument("SmoothWeight: need H > 0 and 3H < X (H=" + std::to_string(H) +
                                  ", X=" + std::to_string(X) + ")");
    }
  }

  double H() const { return H_; }
  double X() const { return X_; }

  double operator()(double x) const { return eval(x, 0); }

  /// w^{(deriv)}(x), deriv in {0, 1, 2}. Exact 0 outside (H, X) and exact 1 on [2H, X-H].
  double eval(double x, int deriv = 0) const {
    if (deriv < 0 || deriv > 2) throw std::invalid_argument("SmoothWeight::eval: derivative order must be 0, 1 or 2");
    if (x <= H_ || x >= X_) return 0.0;
    if (x < 2.0 * H_) {
      const double scale = deriv == 0 ? 1.0 : std::pow(H_, -deriv);
      return scale * SmoothstepProfile::derivative((x - H_) / H_, deriv);
    }
    if (x <= X_ - H_) return deriv == 0 ? 1.0 : 0.0;
    const double sign = deriv == 1 ? -1.0 : 1.0;
    const double scale = deriv == 0 ? 1.0 : std::pow(H_, -deriv);
    return sign * scale * SmoothstepProfile::derivative((X_ - x) / H_, deriv);
  }

  /// int w = X - 2H exactly, by point symmetry of the ramps.
  double integral() const { return X_ - 2.0 * H_; }

 private:
  double H_;
  double X_;
};

}  // namespace apvar
