#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "mvsde/core.hpp"

/// Deterministic quadrature rules shared across modules.
namespace mvsde {

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial.  Exact for polynomials of degree 2n - 1.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

[[nodiscard]] inline GaussRule gauss_legendre(int n) {
  if (n < 1 || n > 64) throw InvalidInputError("Gauss-Legendre order out of range");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-based initial guess for the i-th root.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Gauss-Legendre rule mapped to [a, b].
[[nodiscard]] inline GaussRule gauss_legendre_on(int n, double a, double b) {
  GaussRule rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

/// Composite Simpson rule with n (even) subintervals.
[[nodiscard]] inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n < 2) throw InvalidInputError("Simpson rule needs at least two subintervals");
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
  return acc * h / 3.0;
}

namespace detail {

inline double adaptive_simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                                    double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
[[nodiscard]] inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                             double tol = 1e-12, int max_depth = 48) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace mvsde
