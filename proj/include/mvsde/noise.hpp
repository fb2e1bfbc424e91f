#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "mvsde/core.hpp"
#include "mvsde/quadrature.hpp"
#include "mvsde/rng.hpp"

/// Driving noise: Brownian increments and a finite-activity Poisson random
/// measure whose marks live in the closed ball of radius `alpha`.
namespace mvsde {

/// Mark distribution families.  Both are symmetric about the origin.
enum class MarkLaw {
  kUniformBall,        ///< uniform on {|u| <= alpha}
  kTruncatedGaussian,  ///< N(0, (alpha/3)^2 I) conditioned on {|u| <= alpha}
};

/// Intensity measure rate * (mark law) of the jump noise.
///
/// `second_mark_moment()` is rate * E|U|^2 (the full intensity integral of
/// |u|^2 per unit time), precomputed at construction.
class JumpLaw {
 public:
  JumpLaw(double rate, double alpha, MarkLaw law = MarkLaw::kUniformBall, int mark_dim = 1)
      : rate_(rate), alpha_(alpha), law_(law), dim_(mark_dim) {
    require_finite(rate, "jump rate");
    require_finite(alpha, "jump mark bound");
    if (rate < 0.0) throw InvalidInputError("jump rate must be nonnegative");
    if (alpha <= 0.0) throw InvalidInputError("jump mark bound must be positive");
    if (mark_dim < 1 || mark_dim > kMaxDim) throw InvalidInputError("mark dimension out of range");
    second_moment_per_event_ = compute_second_moment();
  }

  static JumpLaw none() { return JumpLaw(0.0, 1.0); }

  [[nodiscard]] double rate() const { return rate_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] MarkLaw law() const { return law_; }
  [[nodiscard]] int mark_dim() const { return dim_; }

  /// rate * E|U|^2.
  [[nodiscard]] double second_mark_moment() const { return rate_ * second_moment_per_event_; }

  /// E U; identically zero for the symmetric families in the catalog.
  [[nodiscard]] Vec mean_mark() const { return Vec::Zero(dim_); }

  /// One mark draw.  Rejection retries advance the stream deterministically.
  [[nodiscard]] Vec sample_mark(CounterStream& stream) const {
    Vec u(dim_);
    if (law_ == MarkLaw::kUniformBall) {
      double norm2 = 0.0;
      for (int k = 0; k < dim_; ++k) {
        u[k] = stream.gaussian();
        norm2 += u[k] * u[k];
      }
      const double len = std::sqrt(std::max(norm2, 1e-300));
      const double radius = alpha_ * std::pow(stream.uniform_pos(), 1.0 / dim_);
      return (radius / len) * u;
    }
    const double s = alpha_ / 3.0;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      double norm2 = 0.0;
      for (int k = 0; k < dim_; ++k) {
        u[k] = s * stream.gaussian();
        norm2 += u[k] * u[k];
      }
      if (norm2 <= alpha_ * alpha_) return u;
    }
    throw ConvergenceError("mark rejection sampling failed to terminate");
  }

  /// Deterministic expectation rule over the mark law for one-dimensional
  /// marks: nodes u_i and weights w_i with sum_i w_i g(u_i) ~ E g(U).
  /// Split at the origin so kinked integrands (|u|-type) converge fast.
  [[nodiscard]] GaussRule mark_expectation_rule(int nodes_per_half = 16) const {
    if (dim_ != 1) throw CapabilityError("mark expectation rule requires one-dimensional marks");
    GaussRule out;
    const GaussRule left = gauss_legendre_on(nodes_per_half, -alpha_, 0.0);
    const GaussRule right = gauss_legendre_on(nodes_per_half, 0.0, alpha_);
    auto density = [&](double u) {
      if (law_ == MarkLaw::kUniformBall) return 1.0 / (2.0 * alpha_);
      const double s = alpha_ / 3.0;
      return std::exp(-0.5 * u * u / (s * s));
    };
    double total = 0.0;
    for (const GaussRule* part : {&left, &right}) {
      for (std::size_t i = 0; i < part->nodes.size(); ++i) {
        out.nodes.push_back(part->nodes[i]);
        out.weights.push_back(part->weights[i] * density(part->nodes[i]));
        total += out.weights.back();
      }
    }
    for (double& w : out.weights) w /= total;  // exact normalization of the truncated density
    return out;
  }

 private:
  [[nodiscard]] double compute_second_moment() const {
    if (law_ == MarkLaw::kUniformBall) {
      return alpha_ * alpha_ * dim_ / (dim_ + 2.0);
    }
    // Radial density r^{d-1} exp(-r^2 / (2 s^2)) on [0, alpha].
    const double s = alpha_ / 3.0;
    auto weight = [&](double r) { return std::pow(r, dim_ - 1) * std::exp(-0.5 * r * r / (s * s)); };
    const double norm = adaptive_simpson([&](double r) { return weight(r); }, 0.0, alpha_, 1e-14);
    const double moment = adaptive_simpson([&](double r) { return r * r * weight(r); }, 0.0, alpha_, 1e-14);
    return moment / norm;
  }

  double rate_;
  double alpha_;
  MarkLaw law_;
  int dim_;
  double second_moment_per_event_ = 0.0;
};

/// One atom of the Poisson random measure.
struct JumpEvent {
  double time = 0.0;
  Vec mark;
};

/// All jump events of one stream on (0, horizon], in strictly increasing
/// time order.  Event times come from exponential gaps, marks from per-event
/// substreams, so the list depends only on (seed, stream_id, law, horizon).
[[nodiscard]] inline std::vector<JumpEvent> sample_jump_events(const JumpLaw& law, double horizon,
                                                               std::uint64_t master_seed,
                                                               std::uint32_t stream_id) {
  require_finite(horizon, "jump horizon");
  if (horizon < 0.0) throw InvalidInputError("jump horizon must be nonnegative");
  std::vector<JumpEvent> events;
  if (law.rate() <= 0.0 || horizon == 0.0) return events;
  CounterStream times(master_seed, stream_id, 0, StreamPurpose::kJumpTimes);
  double t = 0.0;
  for (std::uint32_t e = 0;; ++e) {
    t += times.exponential(law.rate());
    if (t > horizon) break;
    CounterStream marks(master_seed, stream_id, e, StreamPurpose::kJumpMarks);
    events.push_back(JumpEvent{t, law.sample_mark(marks)});
  }
  return events;
}

/// The complete driving noise of one particle over a horizon: lazy Brownian
/// increments (a pure function of the counters) plus the precomputed jump
/// event list.  Fixed (master_seed, stream_id) reproduce the panel
/// bit-for-bit regardless of scheduling.
class NoisePanel {
 public:
  NoisePanel(std::uint64_t master_seed, std::uint32_t stream_id, const JumpLaw& law, double horizon)
      : seed_(master_seed),
        stream_id_(stream_id),
        horizon_(horizon),
        events_(sample_jump_events(law, horizon, master_seed, stream_id)) {}

  /// Brownian increment over step k of width h, in dimension m.
  [[nodiscard]] Vec brownian(std::uint32_t step, int m, double h) const {
    if (h < 0.0) throw InvalidInputError("step width must be nonnegative");
    Vec out(m);
    if (h == 0.0) return Vec::Zero(m);
    CounterStream stream(seed_, stream_id_, step, StreamPurpose::kBrownian);
    const double scale = std::sqrt(h);
    for (int k = 0; k < m; ++k) out[k] = scale * stream.gaussian();
    return out;
  }

  [[nodiscard]] const std::vector<JumpEvent>& events() const { return events_; }
  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] std::uint32_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_id_;
  double horizon_;
  std::vector<JumpEvent> events_;
};

/// Monte Carlo check of the L^2 accounting identity for the jump noise: the
/// expected pathwise sum of phi^2 over events equals the intensity integral
/// of phi^2 over time and mark space.
struct IsometryReport {
  double mc_mean = 0.0;   ///< Monte Carlo estimate of E sum phi(t_i, u_i)^2
  double mc_se = 0.0;     ///< standard error of the estimate
  double intensity = 0.0; ///< quadrature value of the intensity-side integral
  double z = 0.0;         ///< (mc_mean - intensity) / mc_se
};

[[nodiscard]] inline IsometryReport verify_isometry(const JumpLaw& law,
                                                    const std::function<double(double, const Vec&)>& phi,
                                                    double horizon, int trials, std::uint64_t master_seed) {
  if (trials < 2) throw InvalidInputError("isometry check needs at least two trials");
  std::vector<double> sums(static_cast<std::size_t>(trials), 0.0);
  for (int s = 0; s < trials; ++s) {
    const auto events = sample_jump_events(law, horizon, master_seed, static_cast<std::uint32_t>(s));
    double acc = 0.0;
    for (const auto& ev : events) {
      const double v = phi(ev.time, ev.mark);
      acc += v * v;
    }
    sums[static_cast<std::size_t>(s)] = acc;
  }
  const MeanSe stats = mean_se(sums);

  double intensity = 0.0;
  if (law.rate() > 0.0) {
    std::function<double(double)> integrand;
    if (law.mark_dim() == 1) {
      GaussRule rule = law.mark_expectation_rule(32);
      integrand = [&phi, rule = std::move(rule), &law](double s) {
        double acc = 0.0;
        Vec u(1);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          u[0] = rule.nodes[i];
          const double v = phi(s, u);
          acc += rule.weights[i] * v * v;
        }
        return law.rate() * acc;
      };
    } else {
      // Fixed deterministic mark batch for higher-dimensional marks.
      constexpr int kMarks = 200000;
      auto batch = std::make_shared<std::vector<Vec>>();
      batch->reserve(kMarks);
      CounterStream stream(master_seed, 0xFFFFFFFFu, 0, StreamPurpose::kMarkBatch);
      for (int i = 0; i < kMarks; ++i) batch->push_back(law.sample_mark(stream));
      integrand = [&phi, batch, &law](double s) {
        double acc = 0.0;
        for (const Vec& u : *batch) {
          const double v = phi(s, u);
          acc += v * v;
        }
        return law.rate() * acc / static_cast<double>(batch->size());
      };
    }
    intensity = simpson(integrand, 0.0, horizon, 256);
  }

  IsometryReport report;
  report.mc_mean = stats.mean;
  report.mc_se = stats.se;
  report.intensity = intensity;
  report.z = stats.se > 0.0 ? (stats.mean - intensity) / stats.se : 0.0;
  return report;
}

}  // namespace mvsde
