#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mvsde/calculus.hpp"
#include "mvsde/coefficients.hpp"
#include "mvsde/core.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/solver.hpp"

/// Stability diagnostics: exponential mean-square decay fitting, ultimate
/// boundedness verification, almost-sure tail estimation, and numerical
/// audits of the Lyapunov-type sufficient conditions.
namespace mvsde {

// ============================================================================
// Series extraction and decay fitting
// ============================================================================

/// Second-moment curve of an ensemble with Monte Carlo standard errors.
struct MomentSeries {
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> se;
};

[[nodiscard]] inline MomentSeries moment_series(const TrajectoryRecord& traj) {
  MomentSeries out;
  out.t = traj.t;
  out.value = traj.mean_sq;
  out.se = traj.mean_sq_se;
  return out;
}

/// Result of the log-linear decay regression: value ~ c * exp(-alpha t) * xi_ms.
struct DecayFit {
  double alpha = 0.0;  ///< decay rate per unit time (minus the fitted slope)
  double c = 0.0;      ///< prefactor, normalized by the initial mean square
  double r2 = 0.0;     ///< regression quality on the log values
  int points = 0;      ///< grid points inside the fit window
};

/// Least-squares line on (t, log value) restricted to [window_lo, window_hi].
/// All values in the window must be strictly positive.  A constant series
/// fits exactly with alpha = 0 and r2 = 1.
[[nodiscard]] inline DecayFit fit_exponential_decay(const MomentSeries& series, double window_lo,
                                                    double window_hi, double xi_ms) {
  if (series.t.size() != series.value.size()) {
    throw InvalidInputError("decay fit: time and value arrays must align");
  }
  if (!(xi_ms > 0.0)) throw InvalidInputError("decay fit: initial mean square must be positive");
  std::vector<double> ts;
  std::vector<double> logs;
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    const double t = series.t[i];
    if (t < window_lo || t > window_hi) continue;
    const double v = series.value[i];
    if (!(v > 0.0)) {
      throw InvalidInputError(
          "decay fit: non-positive moment inside the fit window; shrink the window");
    }
    ts.push_back(t);
    logs.push_back(std::log(v));
  }
  if (ts.size() < 2) throw InvalidInputError("decay fit: window must contain at least two points");

  const std::size_t n = ts.size();
  double mean_t = 0.0;
  double mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_t += ts[i];
    mean_y += logs[i];
  }
  mean_t /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double s_tt = 0.0;
  double s_ty = 0.0;
  double s_yy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = ts[i] - mean_t;
    const double dy = logs[i] - mean_y;
    s_tt += dt * dt;
    s_ty += dt * dy;
    s_yy += dy * dy;
  }
  if (!(s_tt > 0.0)) throw InvalidInputError("decay fit: window must span distinct times");
  const double slope = s_ty / s_tt;
  const double intercept = mean_y - slope * mean_t;

  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = logs[i] - (intercept + slope * ts[i]);
    ss_res += resid * resid;
  }
  DecayFit fit;
  fit.alpha = -slope;
  fit.c = std::exp(intercept) / xi_ms;
  // Variation at the level of log rounding is a constant series, not signal.
  const double s_yy_floor = 1e-20 * static_cast<double>(n) * (mean_y * mean_y + 1.0);
  fit.r2 = s_yy > s_yy_floor ? 1.0 - ss_res / s_yy : 1.0;
  fit.points = static_cast<int>(n);
  return fit;
}

// ============================================================================
// Envelope and tail verdicts
// ============================================================================

/// Outcome of a grid-wise envelope comparison.  `worst_margin` is the largest
/// value of (series - bound); nonpositive means the bound held everywhere.
struct BoundCheck {
  bool pass = false;
  double worst_margin = -std::numeric_limits<double>::infinity();
  double worst_t = 0.0;
};

namespace detail {

inline BoundCheck check_envelope(const MomentSeries& series, double prefactor, double rate,
                                 double level, double xi_ms) {
  constexpr double kAbsSlack = 1e-12;  // guards exact-equality comparisons against rounding
  BoundCheck check;
  check.pass = true;
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    const double bound =
        prefactor * std::exp(-rate * series.t[i]) * xi_ms + level + 3.0 * series.se[i] + kAbsSlack;
    const double margin = series.value[i] - bound;
    if (margin > check.worst_margin) {
      check.worst_margin = margin;
      check.worst_t = series.t[i];
    }
    if (margin > 0.0) check.pass = false;
  }
  return check;
}

}  // namespace detail

/// Checks value(t) <= c * exp(-alpha t) * xi_ms + 3 se(t) at every grid point.
[[nodiscard]] inline BoundCheck check_decay_envelope(const MomentSeries& series, double c, double alpha,
                                                     double xi_ms) {
  if (!(c >= 0.0) || !(xi_ms >= 0.0)) {
    throw InvalidInputError("decay envelope: prefactor and initial mean square must be nonnegative");
  }
  return detail::check_envelope(series, c, alpha, 0.0, xi_ms);
}

/// Checks value(t) <= m * exp(-lambda t) * xi_ms + w + 3 se(t) at every grid
/// point.  Passing at level w implies passing at any larger level.
[[nodiscard]] inline BoundCheck check_ultimate_boundedness(const MomentSeries& series, double m,
                                                           double lambda, double w, double xi_ms) {
  if (!(m >= 0.0) || !(lambda >= 0.0) || !(w >= 0.0)) {
    throw InvalidInputError("ultimate bound: constants must be nonnegative");
  }
  return detail::check_envelope(series, m, lambda, w, xi_ms);
}

/// Fraction of particles whose tail-window sup norm stays below delta, with
/// the Monte Carlo acceptance threshold 1 - 3/sqrt(N).
struct TailFractionCheck {
  double fraction = 0.0;
  double threshold = 0.0;
  int n_below = 0;
  int n_total = 0;
  bool pass = false;
};

[[nodiscard]] inline TailFractionCheck check_as_stability(const std::vector<double>& tail_sup,
                                                          double delta) {
  if (tail_sup.empty()) throw InvalidInputError("tail check needs per-particle tail suprema");
  if (!(delta > 0.0)) throw InvalidInputError("tail check needs a positive threshold");
  TailFractionCheck check;
  check.n_total = static_cast<int>(tail_sup.size());
  for (double s : tail_sup) {
    if (s < delta) ++check.n_below;
  }
  check.fraction = static_cast<double>(check.n_below) / check.n_total;
  check.threshold = std::max(0.0, 1.0 - 3.0 / std::sqrt(static_cast<double>(check.n_total)));
  check.pass = check.fraction >= check.threshold;
  return check;
}

// ============================================================================
// Lyapunov condition audits
// ============================================================================

/// Which sufficient-condition family the audit instantiates.  The first two
/// integrate the generator inequality against the measure; the third checks
/// it pointwise with sandwich moduli.
enum class LyapunovConditionForm {
  kIntegratedDecay,    ///< integrated generator decay, two-sided quadratic sandwich
  kIntegratedBounded,  ///< integrated decay up to a constant, sandwich with slack
  kPointwiseSandwich,  ///< pointwise decay with strictly increasing envelope moduli
};

struct LyapunovAuditSpec {
  LyapunovConditionForm form = LyapunovConditionForm::kIntegratedDecay;
  double alpha = 1.0;
  double a1 = 1.0;  ///< lower sandwich constant (integrated forms)
  double a2 = 1.0;  ///< upper sandwich constant (integrated forms)
  double n1 = 0.0;  ///< generator slack (bounded form)
  double n2 = 0.0;  ///< lower sandwich slack (bounded form)
  double n3 = 0.0;  ///< upper sandwich slack (bounded form)
  std::function<double(double)> gamma1;  ///< lower modulus (pointwise form)
  std::function<double(double)> gamma2;  ///< upper modulus (pointwise form)
  double margin_tol = 1e-9;        ///< slack accepted on generator/sandwich margins
  double k_pairing_tol = 1e-12;    ///< slack accepted on the constraint pairing
};

/// A measure snapshot the audit evaluates on: a time point plus an empirical
/// law (typically lifted from a simulation).
struct MeasureSample {
  double t = 0.0;
  EmpiricalMeasure mu;
};

struct LyapunovAuditReport {
  std::string generator_form;  ///< "integrated" or "pointwise"
  int samples = 0;
  double worst_generator_margin = -std::numeric_limits<double>::infinity();
  double worst_generator_t = 0.0;
  double worst_lower_margin = -std::numeric_limits<double>::infinity();
  double worst_upper_margin = -std::numeric_limits<double>::infinity();
  bool generator_pass = true;
  bool sandwich_pass = true;

  /// Constraint-pairing diagnostics; populated only when a trajectory with a
  /// nontrivial operator is supplied.
  int k_pairing_steps = 0;
  double min_k_pairing = std::numeric_limits<double>::infinity();
  bool k_pairing_pass = true;

  [[nodiscard]] bool pass() const { return generator_pass && sandwich_pass && k_pairing_pass; }
};

/// Evaluates the chosen sufficient condition on every supplied sample: the
/// generator inequality (integrated against the measure or pointwise), the
/// value sandwich, and, when `k_trajectory` carries retained steps from a
/// constrained run, the nonnegativity of the discrete constraint pairing
///   <dx V, dK> + E<dmu V, dK>
/// evaluated at the post-step state.  Margins are signed so that nonpositive
/// (or, for the pairing, nonnegative) means the condition held.
[[nodiscard]] inline LyapunovAuditReport audit_lyapunov_conditions(
    const LyapunovFunction& h, const CoefficientSet& c, const LyapunovAuditSpec& spec,
    const std::vector<MeasureSample>& samples, const TrajectoryRecord* k_trajectory = nullptr,
    const GeneratorOptions& opts = {}) {
  detail::require_callbacks(h, true);
  if (!h.dt) throw CapabilityError("test function must supply a dt callback");
  if (!(spec.alpha > 0.0)) throw InvalidInputError("audit needs a positive decay rate");
  if (samples.empty()) throw InvalidInputError("audit needs at least one measure sample");
  const bool pointwise = spec.form == LyapunovConditionForm::kPointwiseSandwich;
  if (pointwise && (!spec.gamma1 || !spec.gamma2)) {
    throw InvalidInputError("pointwise audit needs both envelope moduli");
  }

  LyapunovAuditReport report;
  report.generator_form = pointwise ? "pointwise" : "integrated";
  report.samples = static_cast<int>(samples.size());

  const double n1 = spec.form == LyapunovConditionForm::kIntegratedBounded ? spec.n1 : 0.0;
  const double n2 = spec.form == LyapunovConditionForm::kIntegratedBounded ? spec.n2 : 0.0;
  const double n3 = spec.form == LyapunovConditionForm::kIntegratedBounded ? spec.n3 : 0.0;

  for (const MeasureSample& sample : samples) {
    const EmpiricalMeasure& mu = sample.mu;
    const double t = sample.t;
    const GeneratorBatch gen = generator_batch(c, h, t, mu, opts, true);

    if (pointwise) {
      for (int i = 0; i < mu.size(); ++i) {
        const Vec x = mu.point(i);
        const double v = h.value(t, x, mu);
        const double g_margin = gen.total(i) + spec.alpha * v;
        if (g_margin > report.worst_generator_margin) {
          report.worst_generator_margin = g_margin;
          report.worst_generator_t = t;
        }
        const double r = x.norm();
        const double lower = spec.gamma1(r) - v;
        const double upper = v - spec.gamma2(r);
        report.worst_lower_margin = std::max(report.worst_lower_margin, lower);
        report.worst_upper_margin = std::max(report.worst_upper_margin, upper);
      }
    } else {
      double gen_mean = 0.0;
      double v_mean = 0.0;
      for (int i = 0; i < mu.size(); ++i) {
        gen_mean += gen.total(i);
        v_mean += h.value(t, mu.point(i), mu);
      }
      gen_mean /= mu.size();
      v_mean /= mu.size();
      const double m2 = mu.second_moment();
      const double g_margin = gen_mean + spec.alpha * v_mean - n1;
      if (g_margin > report.worst_generator_margin) {
        report.worst_generator_margin = g_margin;
        report.worst_generator_t = t;
      }
      report.worst_lower_margin =
          std::max(report.worst_lower_margin, spec.a1 * m2 - n2 - v_mean);
      report.worst_upper_margin =
          std::max(report.worst_upper_margin, v_mean - spec.a2 * m2 - n3);
    }
  }
  report.generator_pass = report.worst_generator_margin <= spec.margin_tol;
  report.sandwich_pass = report.worst_lower_margin <= spec.margin_tol &&
                         report.worst_upper_margin <= spec.margin_tol;

  if (k_trajectory != nullptr) {
    const TrajectoryRecord& traj = *k_trajectory;
    const double eps = traj.epsilon;
    for (const RetainedStep& step : traj.retained) {
      if (step.dk.empty()) continue;
      const EmpiricalMeasure mu(step.states, traj.dim);
      const Vec x_ref = mu.point(0);
      for (int i = 0; i < traj.n; ++i) {
        const Vec xi = mu.point(i);
        Vec dki(traj.dim);
        const std::size_t base = static_cast<std::size_t>(i) * traj.dim;
        for (int d = 0; d < traj.dim; ++d) dki[d] = eps * step.dk[base + d];
        if (dki.squaredNorm() == 0.0) continue;
        double pair = h.dx(step.t, xi, mu).dot(dki);
        if (!h.dmu_depends_on_x) {
          pair += h.dmu(step.t, x_ref, mu, xi).dot(dki);
        } else {
          double acc = 0.0;
          for (int j = 0; j < traj.n; ++j) acc += h.dmu(step.t, mu.point(j), mu, xi).dot(dki);
          pair += acc / traj.n;
        }
        report.min_k_pairing = std::min(report.min_k_pairing, pair);
      }
      ++report.k_pairing_steps;
    }
    if (report.k_pairing_steps > 0 &&
        report.min_k_pairing < std::numeric_limits<double>::infinity()) {
      report.k_pairing_pass = report.min_k_pairing >= -spec.k_pairing_tol;
    }
  }
  return report;
}

// ============================================================================
// Aggregate report
// ============================================================================

/// One named verdict row for report emission.
struct StabilityVerdict {
  std::string criterion;
  std::string parameters;
  double statistic = 0.0;
  double margin = 0.0;
  bool pass = false;
};

/// Aggregated stability battery result assembled by the experiment layer.
struct StabilityReport {
  double fitted_alpha = 0.0;
  double fitted_c = 0.0;
  double fit_r2 = 0.0;
  double bound_w = 0.0;
  double as_fraction = 0.0;
  std::vector<StabilityVerdict> verdicts;

  [[nodiscard]] bool all_pass() const {
    for (const StabilityVerdict& v : verdicts) {
      if (!v.pass) return false;
    }
    return true;
  }
};

}  // namespace mvsde
