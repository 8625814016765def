#pragma once
// Adaptive Gauss-Kronrod (7/15) quadrature for real and complex integrands,
// a fixed-panel driver for oscillatory integrands, and Wynn's epsilon
// accelerator for alternating panel series.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace apvar::quad {

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
  double achieved_error() const { return achieved_; }

 private:
  double achieved_;
};

template <class T>
struct Result {
  T value{};
  double error = 0.0;
  std::size_t evaluations = 0;
};

namespace detail {

// Kronrod 15-point nodes (positive half) and weights; Gauss 7-point weights on
// the odd-indexed nodes.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }

template <class T, class F>
Result<T> gk15(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const T fc = f(c);
  T rk = fc * kWgk[7];
  T rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * detail::kXgk[j];
    const T f1 = f(c - dx);
    const T f2 = f(c + dx);
    rk += (f1 + f2) * kWgk[j];
    if (j % 2 == 1) rg += (f1 + f2) * kWg[j / 2];
  }
  Result<T> r;
  r.value = rk * h;
  const double diff = magnitude((rk - rg) * h);
  // QUADPACK-style error scaling; cheap and conservative for smooth integrands
  r.error = diff < 1e-300 ? 0.0 : std::min(diff, 200.0 * diff * std::sqrt(200.0 * diff / (magnitude(r.value) + 1e-300)));
  r.error = std::max(r.error, 50.0 * std::numeric_limits<double>::epsilon() * magnitude(r.value));
  r.evaluations = 15;
  return r;
}

template <class T, class F>
void adaptive_recurse(F& f, double a, double b, const Result<T>& whole, double tol, int depth, Result<T>& acc,
                      bool& ok) {
  // a panel whose error sits at the roundoff floor cannot improve by bisection
  const double floor = 100.0 * std::numeric_limits<double>::epsilon() * magnitude(whole.value);
  if (whole.error <= std::max(tol, floor) || depth == 0) {
    if (whole.error > std::max(tol, floor)) ok = false;
    acc.value += whole.value;
    acc.error += whole.error;
    return;
  }
  const double m = 0.5 * (a + b);
  const auto left = gk15<T>(f, a, m);
  const auto right = gk15<T>(f, m, b);
  acc.evaluations += 30;
  adaptive_recurse<T>(f, a, m, left, 0.5 * tol, depth - 1, acc, ok);
  adaptive_recurse<T>(f, m, b, right, 0.5 * tol, depth - 1, acc, ok);
}

}  // namespace detail

/// Adaptive G7K15 on [a, b] to absolute tolerance abs_tol. Throws
/// QuadratureError when the bisection depth budget runs out.
template <class T = double, class F>
Result<T> integrate(F&& f, double a, double b, double abs_tol, int max_depth = 40) {
  Result<T> acc{};
  if (a == b) return acc;
  auto whole = detail::gk15<T>(f, a, b);
  acc.evaluations = 15;
  bool ok = true;
  detail::adaptive_recurse<T>(f, a, b, whole, abs_tol, max_depth, acc, ok);
  if (!ok) {
    throw QuadratureError("adaptive quadrature did not converge on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "]; achieved error " + std::to_string(acc.error),
                          acc.error);
  }
  return acc;
}

/// Splits [a, b] into panels no wider than width and integrates each
/// adaptively, sharing abs_tol proportionally to panel length.
template <class T = double, class F>
Result<T> integrate_panels(F&& f, double a, double b, double width, double abs_tol, int max_depth = 30) {
  Result<T> acc{};
  if (b <= a) return acc;
  const auto panels = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / width)));
  const double step = (b - a) / static_cast<double>(panels);
  const double per_panel = abs_tol / static_cast<double>(panels);
  for (std::size_t i = 0; i < panels; ++i) {
    const double lo = a + step * static_cast<double>(i);
    const double hi = i + 1 == panels ? b : lo + step;
    const auto r = integrate<T>(f, lo, hi, per_panel, max_depth);
    acc.value += r.value;
    acc.error += r.error;
    acc.evaluations += r.evaluations;
  }
  return acc;
}

/// Wynn epsilon extrapolation of the limit of a sequence of partial sums.
/// Returns the last diagonal estimate; error is the change between the two
/// most recent estimates.
/// Nodes and weights of the 15-point Kronrod rule applied on each panel
/// [edges[i], edges[i+1]].
struct CompositeRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline CompositeRule kronrod_composite(const std::vector<double>& edges) {
  CompositeRule r;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double c = 0.5 * (edges[i] + edges[i + 1]), h = 0.5 * (edges[i + 1] - edges[i]);
    for (int j = 0; j < 7; ++j) {
      r.nodes.push_back(c - h * detail::kXgk[j]);
      r.weights.push_back(h * detail::kWgk[j]);
      r.nodes.push_back(c + h * detail::kXgk[j]);
      r.weights.push_back(h * detail::kWgk[j]);
    }
    r.nodes.push_back(c);
    r.weights.push_back(h * detail::kWgk[7]);
  }
  return r;
}

/// Panel edges on [floor, top]: halving towards floor below `width`, uniform
/// panels of at most `width` above it.
inline std::vector<double> graded_edges(double floor, double width, double top) {
  std::vector<double> low;
  for (double a = std::min(width, top); a > floor; a *= 0.5) low.push_back(a);
  std::vector<double> e;
  e.push_back(floor);
  for (auto it = low.rbegin(); it != low.rend(); ++it)
    if (*it > e.back()) e.push_back(*it);
  const double start = e.back();
  if (top > start) {
    const auto n = static_cast<std::size_t>(std::ceil((top - start) / width));
    for (std::size_t i = 1; i <= n; ++i) e.push_back(i == n ? top : start + (top - start) * i / n);
  }
  return e;
}

inline Result<double> wynn_epsilon(const std::vector<double>& partial_sums) {
  const std::size_t n = partial_sums.size();
  if (n == 0) throw std::invalid_argument("wynn_epsilon: empty sequence");
  std::vector<double> prev(n + 1, 0.0), cur(partial_sums.begin(), partial_sums.end());
  double best = partial_sums.back(), prev_best = n > 1 ? partial_sums[n - 2] : best;
  // cur holds eps_k column; prev holds eps_{k-1}
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> next(n - k);
    for (std::size_t i = 0; i + k < n; ++i) {
      const double d = cur[i + 1] - cur[i];
      if (d == 0.0) {
        next[i] = std::numeric_limits<double>::infinity();
      } else {
        next[i] = (k == 1 ? 0.0 : prev[i + 1]) + 1.0 / d;
      }
    }
    if (k % 2 == 0 && !next.empty() && std::isfinite(next.back())) {
      prev_best = best;
      best = next.back();
    }
    prev = std::move(cur);
    cur = std::move(next);
  }
  Result<double> r;
  r.value = best;
  r.error = std::abs(best - prev_best);
  return r;
}

/// Trapezoid sum of f on t in [-t_max, t_max] with the given step, assuming
/// f(-t) = conj(f(t)). Returns the real part of integral f dt.
template <class F>
double trapezoid_conjugate_symmetric(F&& f, double t_max, double step) {
  const auto n = static_cast<std::size_t>(std::ceil(t_max / step));
  double s = 0.5 * std::real(f(0.0));
  for (std::size_t j = 1; j <= n; ++j) s += std::real(f(step * static_cast<double>(j)));
  return 2.0 * step * s;
}

}  // namespace apvar::quad
