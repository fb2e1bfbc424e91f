#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/core.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/quadrature.hpp"
#include "mvsde/solver.hpp"

/// Measure-calculus layer: test functions with measure derivatives, the
/// mean-field generator, a discrete residual check of the change-of-variable
/// formula along simulated ensembles, and comparison-inequality bounds.
namespace mvsde {

// ============================================================================
// Test functions
// ============================================================================

/// A scalar test function h(t, x, mu) with the derivative callbacks the
/// generator needs.  Measure derivatives are supplied analytically:
/// `dmu(t, x, mu)(y)` is the measure derivative evaluated at y, `dy_dmu` its
/// Jacobian in y.  Missing callbacks raise CapabilityError at the point of
/// use.
///
/// Two structure declarations unlock exact shortcuts: `dmu_depends_on_x`
/// false lets measure integrals be shared across evaluation points, and
/// `dmu_affine_in_y` true integrates the jump interpolation in closed form.
struct LyapunovFunction {
  std::string name;
  std::function<double(double, const Vec&, const EmpiricalMeasure&)> value;
  std::function<double(double, const Vec&, const EmpiricalMeasure&)> dt;
  std::function<Vec(double, const Vec&, const EmpiricalMeasure&)> dx;
  std::function<Mat(double, const Vec&, const EmpiricalMeasure&)> dxx;
  std::function<Vec(double, const Vec&, const EmpiricalMeasure&, const Vec&)> dmu;
  std::function<Mat(double, const Vec&, const EmpiricalMeasure&, const Vec&)> dy_dmu;
  bool dmu_depends_on_x = false;
  bool dmu_affine_in_y = false;
};

/// Pointwise sum h1 + h2; derivative callbacks add, structure flags combine
/// conservatively.
[[nodiscard]] inline LyapunovFunction sum(const LyapunovFunction& a, const LyapunovFunction& b) {
  LyapunovFunction out;
  out.name = a.name + "+" + b.name;
  out.value = [fa = a.value, fb = b.value](double t, const Vec& x, const EmpiricalMeasure& mu) {
    return fa(t, x, mu) + fb(t, x, mu);
  };
  out.dt = [fa = a.dt, fb = b.dt](double t, const Vec& x, const EmpiricalMeasure& mu) {
    return fa(t, x, mu) + fb(t, x, mu);
  };
  out.dx = [fa = a.dx, fb = b.dx](double t, const Vec& x, const EmpiricalMeasure& mu) {
    return Vec(fa(t, x, mu) + fb(t, x, mu));
  };
  out.dxx = [fa = a.dxx, fb = b.dxx](double t, const Vec& x, const EmpiricalMeasure& mu) {
    return Mat(fa(t, x, mu) + fb(t, x, mu));
  };
  out.dmu = [fa = a.dmu, fb = b.dmu](double t, const Vec& x, const EmpiricalMeasure& mu, const Vec& y) {
    return Vec(fa(t, x, mu, y) + fb(t, x, mu, y));
  };
  out.dy_dmu = [fa = a.dy_dmu, fb = b.dy_dmu](double t, const Vec& x, const EmpiricalMeasure& mu,
                                              const Vec& y) {
    return Mat(fa(t, x, mu, y) + fb(t, x, mu, y));
  };
  out.dmu_depends_on_x = a.dmu_depends_on_x || b.dmu_depends_on_x;
  out.dmu_affine_in_y = a.dmu_affine_in_y && b.dmu_affine_in_y;
  return out;
}

// ============================================================================
// Generator
// ============================================================================

struct GeneratorOptions {
  int mark_nodes = 16;     ///< quadrature nodes per half-axis (1-d marks) or MC marks
  int eta_nodes = 8;       ///< Gauss-Legendre nodes for the jump interpolation
  std::uint64_t mark_seed = 0x67656E6D61726Bull;  ///< MC mark substream seed (marks of dim > 1)
};

namespace detail {

struct MarkRule {
  std::vector<Vec> nodes;
  std::vector<double> weights;  ///< expectation weights, summing to one
};

inline MarkRule make_mark_rule(const JumpLaw& law, const GeneratorOptions& opts) {
  MarkRule rule;
  if (law.rate() <= 0.0) return rule;
  if (law.mark_dim() == 1) {
    const GaussRule g = law.mark_expectation_rule(opts.mark_nodes);
    rule.nodes.reserve(g.nodes.size());
    rule.weights = g.weights;
    for (double u : g.nodes) {
      Vec v(1);
      v[0] = u;
      rule.nodes.push_back(v);
    }
    return rule;
  }
  const int n = std::max(opts.mark_nodes, 2);
  CounterStream stream(opts.mark_seed, 0, 0, StreamPurpose::kMarkBatch);
  rule.nodes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rule.nodes.push_back(law.sample_mark(stream));
  rule.weights.assign(static_cast<std::size_t>(n), 1.0 / n);
  return rule;
}

inline void require_callbacks(const LyapunovFunction& h, bool need_measure) {
  if (!h.value || !h.dx || !h.dxx) {
    throw CapabilityError("test function must supply value, dx and dxx callbacks");
  }
  if (need_measure && (!h.dmu || !h.dy_dmu)) {
    throw CapabilityError("test function must supply dmu and dy_dmu callbacks for measure terms");
  }
}

/// Terms evaluated at the point x itself: <dx, b> + (1/2) tr(sigma sigma^T dxx)
/// plus the pointwise jump compensation integral.
inline double generator_point_terms(const CoefficientSet& c, const LyapunovFunction& h, double t,
                                    const Vec& x, const EmpiricalMeasure& mu, const MarkRule& marks) {
  const Vec grad = h.dx(t, x, mu);
  double acc = grad.dot(c.drift(t, x, mu));
  const Mat sigma = c.diffusion(t, x, mu);
  acc += 0.5 * (sigma * sigma.transpose() * h.dxx(t, x, mu)).trace();
  if (!marks.nodes.empty() && c.has_jumps()) {
    const double hx = h.value(t, x, mu);
    double jump_acc = 0.0;
    for (std::size_t q = 0; q < marks.nodes.size(); ++q) {
      const Vec f = c.jump(t, x, mu, marks.nodes[q]);
      jump_acc += marks.weights[q] * (h.value(t, x + f, mu) - hx - f.dot(grad));
    }
    acc += c.jump_law.rate() * jump_acc;
  }
  return acc;
}

/// Terms integrating the measure derivative against mu(dy): the mean-field
/// drift and diffusion couplings and the jump interpolation term.  Uses the
/// full particle set.
inline double generator_measure_terms(const CoefficientSet& c, const LyapunovFunction& h, double t,
                                      const Vec& x, const EmpiricalMeasure& mu, const MarkRule& marks,
                                      const GeneratorOptions& opts) {
  const int n = mu.size();
  const double inv_n = 1.0 / n;
  std::vector<Vec> dmu_base(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) dmu_base[static_cast<std::size_t>(j)] = h.dmu(t, x, mu, mu.point(j));

  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const Vec y = mu.point(j);
    acc += inv_n * c.drift(t, y, mu).dot(dmu_base[static_cast<std::size_t>(j)]);
    const Mat sigma = c.diffusion(t, y, mu);
    acc += 0.5 * inv_n * (sigma * sigma.transpose() * h.dy_dmu(t, x, mu, y)).trace();
  }

  if (!marks.nodes.empty() && c.has_jumps()) {
    double jump_acc = 0.0;
    if (h.dmu_affine_in_y) {
      // dmu affine in y: the eta interpolation integrates to (1/2) <G f, f>.
      const Mat g = h.dy_dmu(t, x, mu, mu.point(0));
      for (std::size_t q = 0; q < marks.nodes.size(); ++q) {
        double y_acc = 0.0;
        for (int j = 0; j < n; ++j) {
          const Vec f = c.jump(t, mu.point(j), mu, marks.nodes[q]);
          y_acc += f.dot(g * f);
        }
        jump_acc += 0.5 * marks.weights[q] * y_acc * inv_n;
      }
    } else {
      const GaussRule eta = gauss_legendre_on(opts.eta_nodes, 0.0, 1.0);
      for (std::size_t q = 0; q < marks.nodes.size(); ++q) {
        double y_acc = 0.0;
        for (int j = 0; j < n; ++j) {
          const Vec y = mu.point(j);
          const Vec f = c.jump(t, y, mu, marks.nodes[q]);
          double eta_acc = 0.0;
          for (std::size_t e = 0; e < eta.nodes.size(); ++e) {
            const Vec shifted = h.dmu(t, x, mu, y + eta.nodes[e] * f);
            eta_acc += eta.weights[e] * (shifted - dmu_base[static_cast<std::size_t>(j)]).dot(f);
          }
          y_acc += eta_acc;
        }
        jump_acc += marks.weights[q] * y_acc * inv_n;
      }
    }
    acc += c.jump_law.rate() * jump_acc;
  }
  return acc;
}

}  // namespace detail

/// Full mean-field generator applied to `h` at (t, x, mu).  Measure integrals
/// run over the complete particle set; mark integrals use a deterministic
/// expectation rule (Gauss for one-dimensional marks, a fixed Monte Carlo
/// batch otherwise); the jump interpolation parameter uses Gauss-Legendre
/// nodes unless the affine shortcut applies exactly.
[[nodiscard]] inline double generator_apply(const CoefficientSet& c, const LyapunovFunction& h, double t,
                                            const Vec& x, const EmpiricalMeasure& mu,
                                            const GeneratorOptions& opts = {}) {
  detail::require_callbacks(h, true);
  const detail::MarkRule marks = detail::make_mark_rule(c.jump_law, opts);
  return detail::generator_point_terms(c, h, t, x, mu, marks) +
         detail::generator_measure_terms(c, h, t, x, mu, marks, opts);
}

/// Generator plus time derivative over every particle of `mu` at once.
/// `pointwise[i]` holds dt + point terms at particle i; `measure_terms` the
/// shared measure integrals (recomputed per particle only when the measure
/// derivative genuinely depends on the evaluation point).
struct GeneratorBatch {
  std::vector<double> pointwise;
  double measure_terms = 0.0;
  bool measure_terms_shared = true;

  [[nodiscard]] double total(int i) const {
    return pointwise[static_cast<std::size_t>(i)] + measure_terms;
  }
};

[[nodiscard]] inline GeneratorBatch generator_batch(const CoefficientSet& c, const LyapunovFunction& h,
                                                    double t, const EmpiricalMeasure& mu,
                                                    const GeneratorOptions& opts = {},
                                                    bool include_dt = true) {
  detail::require_callbacks(h, true);
  if (include_dt && !h.dt) throw CapabilityError("test function must supply a dt callback");
  const detail::MarkRule marks = detail::make_mark_rule(c.jump_law, opts);
  GeneratorBatch batch;
  batch.pointwise.resize(static_cast<std::size_t>(mu.size()));
  for (int i = 0; i < mu.size(); ++i) {
    const Vec x = mu.point(i);
    double v = detail::generator_point_terms(c, h, t, x, mu, marks);
    if (include_dt) v += h.dt(t, x, mu);
    batch.pointwise[static_cast<std::size_t>(i)] = v;
  }
  if (h.dmu_depends_on_x) {
    batch.measure_terms_shared = false;
    for (int i = 0; i < mu.size(); ++i) {
      batch.pointwise[static_cast<std::size_t>(i)] +=
          detail::generator_measure_terms(c, h, t, mu.point(i), mu, marks, opts);
    }
  } else {
    batch.measure_terms = detail::generator_measure_terms(c, h, t, mu.point(0), mu, marks, opts);
  }
  return batch;
}

// ============================================================================
// Change-of-variable residual
// ============================================================================

/// Discrete residual of the change-of-variable identity along a simulated
/// ensemble: the particle average of
///   h(t_n) - h(0) - sum (dt + generator) h * step + sum <dx h, dK>
///   + sum E<dmu h, dK>
/// with both constraint pairings frozen at the post-step state.  Martingale
/// increments average out across particles; the series reports the residual
/// with its Monte Carlo standard error and z-score at every grid time.
struct ItoResidualSeries {
  std::vector<double> t;
  std::vector<double> residual;
  std::vector<double> se;
  std::vector<double> z;

  [[nodiscard]] double terminal() const { return residual.empty() ? 0.0 : residual.back(); }
  [[nodiscard]] double terminal_se() const { return se.empty() ? 0.0 : se.back(); }
  [[nodiscard]] double terminal_z() const { return z.empty() ? 0.0 : z.back(); }

  /// Per-particle terminal residuals (for pooling across replicates).
  std::vector<double> terminal_per_particle;
};

[[nodiscard]] inline ItoResidualSeries ito_residual(const TrajectoryRecord& traj, const LyapunovFunction& h,
                                                    const CoefficientSet& c,
                                                    const GeneratorOptions& opts = {}) {
  detail::require_callbacks(h, true);
  if (!h.dt) throw CapabilityError("test function must supply a dt callback");
  if (traj.retain_stride != 1 || traj.retained.size() < 2) {
    throw InvalidInputError("residual check needs a trajectory retained at every step");
  }
  const int n = traj.n;
  const int steps = static_cast<int>(traj.retained.size()) - 1;
  const double eps = traj.epsilon;

  ItoResidualSeries series;
  std::vector<double> cum(static_cast<std::size_t>(n), 0.0);  // running per-particle residual pieces
  std::vector<double> r(static_cast<std::size_t>(n), 0.0);

  const EmpiricalMeasure mu0(traj.retained.front().states, traj.dim);
  std::vector<double> h0(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    h0[static_cast<std::size_t>(i)] = h.value(traj.retained.front().t, mu0.point(i), mu0);
  }
  series.t.push_back(traj.retained.front().t);
  series.residual.push_back(0.0);
  series.se.push_back(0.0);
  series.z.push_back(0.0);

  for (int k = 0; k < steps; ++k) {
    const RetainedStep& pre = traj.retained[static_cast<std::size_t>(k)];
    const RetainedStep& post = traj.retained[static_cast<std::size_t>(k) + 1];
    const double dt_step = post.t - pre.t;
    const EmpiricalMeasure mu_pre(pre.states, traj.dim);
    const EmpiricalMeasure mu_post(post.states, traj.dim);

    const GeneratorBatch gen = generator_batch(c, h, pre.t, mu_pre, opts, true);
    for (int i = 0; i < n; ++i) cum[static_cast<std::size_t>(i)] -= gen.total(i) * dt_step;

    if (!post.dk.empty()) {
      // Constraint pairings at the post-step state.
      const Vec x_ref = mu_post.point(0);
      for (int i = 0; i < n; ++i) {
        const Vec xi = mu_post.point(i);
        Vec dki(traj.dim);
        const std::size_t base = static_cast<std::size_t>(i) * traj.dim;
        for (int d = 0; d < traj.dim; ++d) dki[d] = eps * post.dk[base + d];
        double pair = h.dx(post.t, xi, mu_post).dot(dki);
        if (!h.dmu_depends_on_x) {
          pair += h.dmu(post.t, x_ref, mu_post, xi).dot(dki);
        } else {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += h.dmu(post.t, mu_post.point(j), mu_post, xi).dot(dki);
          pair += acc / n;
        }
        cum[static_cast<std::size_t>(i)] += pair;
      }
    }

    for (int i = 0; i < n; ++i) {
      r[static_cast<std::size_t>(i)] = h.value(post.t, mu_post.point(i), mu_post) -
                                       h0[static_cast<std::size_t>(i)] + cum[static_cast<std::size_t>(i)];
    }
    const MeanSe stats = mean_se(r);
    series.t.push_back(post.t);
    series.residual.push_back(stats.mean);
    series.se.push_back(stats.se);
    series.z.push_back(stats.se > 0.0 ? stats.mean / stats.se : 0.0);
  }
  series.terminal_per_particle = r;
  return series;
}

// ============================================================================
// Comparison-inequality bounds
// ============================================================================

/// One point of the comparison bound t -> G^{-1}(G(c0) + int_0^t v), where
/// G(r) = int_1^r ds / psi(s).  `in_domain` is false when the argument runs
/// past the range of G (the bound is then infinite).
struct BihariPoint {
  double t = 0.0;
  double value = 0.0;
  bool in_domain = true;
};

namespace detail {

/// G(e^w) via the substitution s = e^w, which flattens the integrable
/// divergence of 1/psi near the origin.
inline double bihari_g_log(const std::function<double(double)>& psi, double w) {
  return adaptive_simpson(
      [&psi](double v) {
        const double s = std::exp(v);
        const double p = psi(s);
        if (!(p > 0.0)) throw InvalidInputError("comparison function must be positive on the range");
        return s / p;
      },
      0.0, w, 1e-13);
}

}  // namespace detail

/// Evaluates the comparison bound on `t_grid` (nondecreasing, starting at or
/// after zero).  `v_rate` must be nonnegative; `psi` positive and
/// nondecreasing on the range covered.  A linear psi reproduces the
/// exponential envelope exactly.
[[nodiscard]] inline std::vector<BihariPoint> bihari_bound(double c0,
                                                           const std::function<double(double)>& v_rate,
                                                           const std::function<double(double)>& psi,
                                                           const std::vector<double>& t_grid) {
  require_finite(c0, "comparison initial value");
  if (c0 < 0.0) throw InvalidInputError("comparison initial value must be nonnegative");
  if (t_grid.empty()) throw InvalidInputError("comparison bound needs a nonempty time grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    require_finite(t_grid[i], "comparison time grid");
    if (t_grid[i] < 0.0) throw InvalidInputError("comparison time grid must be nonnegative");
    if (i > 0 && t_grid[i] < t_grid[i - 1]) {
      throw InvalidInputError("comparison time grid must be nondecreasing");
    }
  }
  const double c0_eff = std::max(c0, 1e-300);
  const double w0 = std::log(c0_eff);
  constexpr double kWMin = -690.0;  // exp(kWMin) underflows to ~1e-300
  constexpr double kWMax = 690.0;

  const double g_c0 = detail::bihari_g_log(psi, w0);

  std::vector<BihariPoint> out;
  out.reserve(t_grid.size());
  double v_cum = 0.0;
  double t_prev = 0.0;
  for (double t : t_grid) {
    if (t > t_prev) {
      v_cum += adaptive_simpson(
          [&v_rate](double s) {
            const double v = v_rate(s);
            if (v < 0.0) throw InvalidInputError("comparison rate must be nonnegative");
            return v;
          },
          t_prev, t, 1e-13);
      t_prev = t;
    }
    const double target = g_c0 + v_cum;

    BihariPoint point;
    point.t = t;
    // Bracket the solution of G(e^w) = target in w.
    double w_lo = w0;
    double w_hi = w0;
    double g_lo = g_c0;
    double g_hi = g_c0;
    bool unbounded = false;
    while (g_hi < target) {
      if (w_hi >= kWMax) {
        unbounded = true;
        break;
      }
      w_hi = std::min(kWMax, w_hi + std::max(1.0, 0.25 * std::abs(w_hi)));
      g_hi = detail::bihari_g_log(psi, w_hi);
    }
    while (!unbounded && g_lo > target) {
      if (w_lo <= kWMin) break;
      w_lo = std::max(kWMin, w_lo - std::max(1.0, 0.25 * std::abs(w_lo)));
      g_lo = detail::bihari_g_log(psi, w_lo);
    }
    const bool expanded = g_c0 < target;
    if (!unbounded) {
      for (int iter = 0; iter < 120; ++iter) {
        const double mid = 0.5 * (w_lo + w_hi);
        if (detail::bihari_g_log(psi, mid) < target) {
          w_lo = mid;
        } else {
          w_hi = mid;
        }
        if (w_hi - w_lo < 1e-14 * std::max(1.0, std::abs(w_hi))) break;
      }
      const double w_star = 0.5 * (w_lo + w_hi);
      // When G has a finite supremum the quadrature saturates flat at it, and
      // a target within quadrature tolerance of that plateau brackets without
      // a true crossing.  Past a genuine solution G keeps increasing, so
      // probe ahead and require clearance beyond the integration error.
      if (expanded) {
        const double g_probe = detail::bihari_g_log(psi, std::min(kWMax, w_star + 5.0));
        if (!(g_probe > target + 1e-12 * std::max(1.0, std::abs(target)))) unbounded = true;
      }
      if (!unbounded) point.value = std::exp(w_star);
    }
    if (unbounded) {
      point.in_domain = false;
      point.value = std::numeric_limits<double>::infinity();
    }
    out.push_back(point);
  }
  return out;
}

}  // namespace mvsde
