#pragma once

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mvsde/calculus.hpp"
#include "mvsde/coefficients.hpp"
#include "mvsde/core.hpp"
#include "mvsde/noise.hpp"

/// Named coefficient systems and test functions referenced from
/// configuration files and the experiment battery.
namespace mvsde::catalog {

using Params = std::map<std::string, double>;

namespace detail {

inline double take(const Params& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

inline void require_known_keys(const Params& params, const std::set<std::string>& known,
                               const std::string& where) {
  for (const auto& [key, value] : params) {
    (void)value;
    if (known.count(key) == 0) {
      std::ostringstream msg;
      msg << where << ": unknown parameter '" << key << "'; valid:";
      for (const std::string& k : known) msg << " " << k;
      throw InvalidInputError(msg.str());
    }
  }
}

inline Mat scaled_identity(int dim, double s) {
  Mat m(dim, dim);
  m.setZero();
  for (int i = 0; i < dim; ++i) m(i, i) = s;
  return m;
}

}  // namespace detail

// ============================================================================
// Coefficient systems
// ============================================================================

[[nodiscard]] inline std::vector<std::string> coefficient_names() {
  return {"mean_field_ou", "sin2_mean_field", "pure_diffusion", "zero"};
}

/// Builds a named coefficient system.
///
///   mean_field_ou   b = -a x + c mean(mu), sigma = s I, f = jump_scale u
///   sin2_mean_field b = sin^2(t) (-a x + c mean(mu)); the time average over a
///                   period halves the drift
///   pure_diffusion  b = 0, sigma = s I, no state dependence
///   zero            all coefficients vanish
///
/// `jump_law` supplies the jump intensity and mark law; a zero rate disables
/// jumps.  Jump coefficients require mark dimension equal to the state
/// dimension.
[[nodiscard]] inline CoefficientSet make_coefficients(const std::string& name, const Params& params,
                                                      int dim, const JumpLaw& jump_law) {
  if (dim < 1 || dim > kMaxDim) throw InvalidInputError("catalog: dimension out of range");
  const double a = detail::take(params, "a", 1.0);
  const double c = detail::take(params, "c", 0.0);
  const double s = detail::take(params, "sigma", 0.0);
  const double jump_scale = detail::take(params, "jump_scale", 0.0);

  CoefficientSet out;
  out.dim = dim;
  out.brownian_dim = dim;
  out.jump_law = jump_law;
  out.mark_linear = true;
  const double lip = std::abs(a) + std::abs(c) + std::abs(s) + std::abs(jump_scale) + 1.0;
  out.kappa = Modulus::linear(lip);
  out.phi = Modulus::linear(lip);
  out.beta = 1.0;
  out.l1_bound = lip;
  out.l2_bound = lip;

  const Mat sigma_mat = detail::scaled_identity(dim, s);
  const bool has_jump_term = jump_scale != 0.0 && jump_law.rate() > 0.0;
  if (has_jump_term && jump_law.mark_dim() != dim) {
    throw InvalidInputError("catalog: mark dimension must match the state dimension");
  }

  if (name == "mean_field_ou" || name == "sin2_mean_field") {
    detail::require_known_keys(params, {"a", "c", "sigma", "jump_scale"}, name);
    const bool modulated = name == "sin2_mean_field";
    out.drift = [a, c, modulated](double t, const Vec& x, const EmpiricalMeasure& mu) {
      Vec v = -a * x + c * mu.mean();
      if (modulated) {
        const double w = std::sin(t);
        v *= w * w;
      }
      return v;
    };
  } else if (name == "pure_diffusion" || name == "zero") {
    detail::require_known_keys(params, {"sigma"}, name);
    out.drift = [dim](double, const Vec&, const EmpiricalMeasure&) {
      Vec v(dim);
      v.setZero();
      return v;
    };
  } else {
    std::ostringstream msg;
    msg << "catalog: unknown coefficient system '" << name << "'; valid:";
    for (const std::string& n : coefficient_names()) msg << " " << n;
    throw InvalidInputError(msg.str());
  }

  if (name == "zero") {
    out.diffusion = [dim](double, const Vec&, const EmpiricalMeasure&) {
      Mat m(dim, dim);
      m.setZero();
      return m;
    };
  } else {
    out.diffusion = [sigma_mat](double, const Vec&, const EmpiricalMeasure&) { return sigma_mat; };
  }

  if (has_jump_term) {
    out.jump = [jump_scale](double, const Vec&, const EmpiricalMeasure&, const Vec& u) {
      return Vec(jump_scale * u);
    };
  } else {
    out.jump_law = JumpLaw::none();
  }
  return out;
}

/// Time-averaged counterpart of a named system.  The sin^2 modulation has
/// mean one half over a period, so its averaged drift is half the
/// unmodulated drift; time-independent systems average to themselves.
[[nodiscard]] inline AveragedTriple make_averaged(const std::string& name, const Params& params,
                                                  int dim, const JumpLaw& jump_law) {
  const std::string base_name = name == "sin2_mean_field" ? "mean_field_ou" : name;
  const double drift_factor = name == "sin2_mean_field" ? 0.5 : 1.0;
  const CoefficientSet base = make_coefficients(base_name, params, dim, jump_law);
  AveragedTriple avg;
  avg.drift = [inner = base.drift, drift_factor](const Vec& x, const EmpiricalMeasure& mu) {
    return Vec(drift_factor * inner(0.0, x, mu));
  };
  avg.diffusion = [inner = base.diffusion](const Vec& x, const EmpiricalMeasure& mu) {
    return inner(0.0, x, mu);
  };
  if (base.has_jumps()) {
    avg.jump = [inner = base.jump](const Vec& x, const EmpiricalMeasure& mu, const Vec& u) {
      return inner(0.0, x, mu, u);
    };
  }
  return avg;
}

// ============================================================================
// Test functions
// ============================================================================

[[nodiscard]] inline std::vector<std::string> lyapunov_names() {
  return {"quadratic", "measure_quadratic", "exp_weighted"};
}

/// Builds a named test function.
///
///   quadratic          V = |x|^2 (no measure dependence)
///   measure_quadratic  h = |x|^2 + int |y|^2 mu(dy)
///   exp_weighted       h = exp(weight t) |x|^2
[[nodiscard]] inline LyapunovFunction make_lyapunov(const std::string& name, const Params& params) {
  LyapunovFunction h;
  h.name = name;
  const auto zero_vec = [](double, const Vec& x, const EmpiricalMeasure&, const Vec&) {
    Vec v(x.size());
    v.setZero();
    return v;
  };
  const auto zero_mat = [](double, const Vec& x, const EmpiricalMeasure&, const Vec&) {
    Mat m(x.size(), x.size());
    m.setZero();
    return m;
  };
  if (name == "quadratic") {
    detail::require_known_keys(params, {}, name);
    h.value = [](double, const Vec& x, const EmpiricalMeasure&) { return x.squaredNorm(); };
    h.dt = [](double, const Vec&, const EmpiricalMeasure&) { return 0.0; };
    h.dx = [](double, const Vec& x, const EmpiricalMeasure&) { return Vec(2.0 * x); };
    h.dxx = [](double, const Vec& x, const EmpiricalMeasure&) {
      return detail::scaled_identity(static_cast<int>(x.size()), 2.0);
    };
    h.dmu = zero_vec;
    h.dy_dmu = zero_mat;
    h.dmu_affine_in_y = true;
  } else if (name == "measure_quadratic") {
    detail::require_known_keys(params, {}, name);
    h.value = [](double, const Vec& x, const EmpiricalMeasure& mu) {
      return x.squaredNorm() + mu.second_moment();
    };
    h.dt = [](double, const Vec&, const EmpiricalMeasure&) { return 0.0; };
    h.dx = [](double, const Vec& x, const EmpiricalMeasure&) { return Vec(2.0 * x); };
    h.dxx = [](double, const Vec& x, const EmpiricalMeasure&) {
      return detail::scaled_identity(static_cast<int>(x.size()), 2.0);
    };
    h.dmu = [](double, const Vec&, const EmpiricalMeasure&, const Vec& y) { return Vec(2.0 * y); };
    h.dy_dmu = [](double, const Vec&, const EmpiricalMeasure&, const Vec& y) {
      return detail::scaled_identity(static_cast<int>(y.size()), 2.0);
    };
    h.dmu_affine_in_y = true;
  } else if (name == "exp_weighted") {
    detail::require_known_keys(params, {"weight"}, name);
    const double w = detail::take(params, "weight", 1.0);
    h.value = [w](double t, const Vec& x, const EmpiricalMeasure&) {
      return std::exp(w * t) * x.squaredNorm();
    };
    h.dt = [w](double t, const Vec& x, const EmpiricalMeasure&) {
      return w * std::exp(w * t) * x.squaredNorm();
    };
    h.dx = [w](double t, const Vec& x, const EmpiricalMeasure&) {
      return Vec(2.0 * std::exp(w * t) * x);
    };
    h.dxx = [w](double t, const Vec& x, const EmpiricalMeasure&) {
      return detail::scaled_identity(static_cast<int>(x.size()), 2.0 * std::exp(w * t));
    };
    h.dmu = zero_vec;
    h.dy_dmu = zero_mat;
    h.dmu_affine_in_y = true;
  } else {
    std::ostringstream msg;
    msg << "catalog: unknown test function '" << name << "'; valid:";
    for (const std::string& n : lyapunov_names()) msg << " " << n;
    throw InvalidInputError(msg.str());
  }
  return h;
}

}  // namespace mvsde::catalog
