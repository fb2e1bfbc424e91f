#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/coefficients.hpp"
#include "mvsde/core.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/monotone.hpp"
#include "mvsde/noise.hpp"

/// Interacting-particle solver for the constrained mean-field dynamics
///
///   X ~ xi - eps * K + eps * int b dt + sqrt(eps) * int sigma dB
///       + sqrt(eps) * int f d(compensated jump measure),
///
/// where K is the reflection/constraint term attached to a maximal monotone
/// operator.  One step freezes the empirical measure, applies drift and noise
/// explicitly, applies jumps at their exact sampled times against the
/// pre-jump particle state, subtracts the compensator, and closes with the
/// operator resolvent (backward step).  The constraint increment of the step
/// is recovered from the resolvent gap, so the pair (X, K) satisfies the
/// operator inclusion at the post-step state by construction.
///
/// eps = 1 recovers the unscaled dynamics.
namespace mvsde {

enum class Scheme {
  kResolventSplit,   ///< implicit resolvent step on the operator (default)
  kYosidaExplicit,   ///< explicit Yosida penalization at a fixed lambda
};

struct SolverConfig {
  int n_particles = 1;
  double step = 1e-3;
  double horizon = 1.0;
  double epsilon = 1.0;
  Scheme scheme = Scheme::kResolventSplit;
  double yosida_lambda = 1e-2;
  std::uint64_t seed = 1;
  double blowup_ceiling = 1e8;
  int threads = 1;

  [[nodiscard]] int steps() const {
    const double ratio = horizon / step;
    return static_cast<int>(std::llround(ratio));
  }

  void validate() const {
    require_finite(step, "solver step");
    require_finite(horizon, "solver horizon");
    require_finite(epsilon, "solver epsilon");
    if (n_particles < 1) throw InvalidInputError("solver needs at least one particle");
    if (step <= 0.0) throw InvalidInputError("solver step must be positive");
    if (horizon <= 0.0) throw InvalidInputError("solver horizon must be positive");
    if (epsilon <= 0.0) throw InvalidInputError("solver epsilon must be positive");
    if (scheme == Scheme::kYosidaExplicit && yosida_lambda <= 0.0) {
      throw InvalidInputError("explicit scheme needs a positive Yosida parameter");
    }
    const double ratio = horizon / step;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw InvalidInputError("solver horizon must be an integer multiple of the step");
    }
    if (blowup_ceiling <= 0.0) throw InvalidInputError("blow-up ceiling must be positive");
  }
};

/// Mutable particle state: positions, the unscaled constraint accumulator K,
/// the accumulated non-constraint increments, and the total variation proxy
/// sum_k |Delta K| per particle.  At all times
///   states = initial - epsilon * k_accum + incr_accum
/// holds up to roundoff.
struct ParticleEnsemble {
  int n = 0;
  int dim = 0;
  double time = 0.0;
  std::vector<double> states;
  std::vector<double> k_accum;
  std::vector<double> incr_accum;
  std::vector<double> k_variation;

  static ParticleEnsemble zeroed(int n, int dim) {
    ParticleEnsemble e;
    e.n = n;
    e.dim = dim;
    e.states.assign(static_cast<std::size_t>(n) * dim, 0.0);
    e.k_accum.assign(e.states.size(), 0.0);
    e.incr_accum.assign(e.states.size(), 0.0);
    e.k_variation.assign(static_cast<std::size_t>(n), 0.0);
    return e;
  }

  [[nodiscard]] Vec state(int i) const {
    Vec out(dim);
    for (int k = 0; k < dim; ++k) out[k] = states[static_cast<std::size_t>(i) * dim + k];
    return out;
  }

  void set_state(int i, const Vec& x) {
    for (int k = 0; k < dim; ++k) states[static_cast<std::size_t>(i) * dim + k] = x[k];
  }

  [[nodiscard]] EmpiricalMeasure measure() const { return EmpiricalMeasure(states, dim); }
};

/// Snapshot of one retained step: post-step states and the unscaled
/// constraint increment of the step that produced them (empty at step 0 and
/// whenever the operator is the zero operator).
struct RetainedStep {
  int step = 0;
  double t = 0.0;
  std::vector<double> states;
  std::vector<double> dk;
};

/// Per-run output: second-moment series with standard errors, the running
/// maximum, the scaled mean constraint variation, optional retained
/// snapshots, and optional per-particle tail suprema of |X|.
struct TrajectoryRecord {
  std::vector<double> t;
  std::vector<double> mean_sq;
  std::vector<double> mean_sq_se;
  std::vector<double> sup_mean_sq;
  std::vector<double> k_variation_mean;

  double epsilon = 1.0;
  double step = 0.0;
  std::uint64_t seed = 0;
  int n = 0;
  int dim = 0;

  int retain_stride = 0;
  std::vector<RetainedStep> retained;

  double tail_start = std::numeric_limits<double>::infinity();
  std::vector<double> tail_sup;

  std::vector<double> initial_states;

  double moment_ceiling = std::numeric_limits<double>::infinity();
  bool moment_ceiling_ok = true;
};

/// Optional per-run instrumentation.
struct RunOptions {
  int retain_stride = 0;  ///< 0 = no snapshots, 1 = every step, k = every k-th
  double tail_start = std::numeric_limits<double>::infinity();
  double moment_ceiling = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Drives one ensemble through the scheme; noise panels are shared so
/// coupled systems can ride identical randomness.
class Stepper {
 public:
  Stepper(const SolverConfig& cfg, const CoefficientSet& c, const MonotoneOperator& op,
          std::shared_ptr<const std::vector<NoisePanel>> panels)
      : cfg_(cfg), c_(c), op_(op), panels_(std::move(panels)) {
    cursors_.assign(static_cast<std::size_t>(cfg_.n_particles), 0);
    last_dk_.assign(static_cast<std::size_t>(cfg_.n_particles) * c_.dim, 0.0);
    sqrt_eps_ = std::sqrt(cfg_.epsilon);
    res_lambda_ = cfg_.epsilon * cfg_.step;
  }

  /// Advances the ensemble over step k (from t_k to t_{k+1}).  Throws
  /// BlowUpError when a particle leaves the configured safety region.
  void step(ParticleEnsemble& ens, int k) {
    const double t0 = k * cfg_.step;
    const double t1 = (k + 1 == cfg_.steps()) ? cfg_.horizon : (k + 1) * cfg_.step;
    const EmpiricalMeasure mu = ens.measure();
    const double h = cfg_.step;
    const double eps = cfg_.epsilon;
    const bool jumps = c_.has_jumps();
    const bool zero_op = op_.is_zero();
    std::atomic<long long> first_failure{-1};

    parallel_for(static_cast<std::size_t>(ens.n), cfg_.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const Vec x = ens.state(static_cast<int>(i));
        Vec y = x;
        y += (eps * h) * c_.drift(t0, x, mu);
        y += sqrt_eps_ * (c_.diffusion(t0, x, mu) * (*panels_)[i].brownian(static_cast<std::uint32_t>(k),
                                                                           c_.brownian_dim, h));
        if (jumps) {
          const auto& events = (*panels_)[i].events();
          std::size_t& cur = cursors_[i];
          Vec z = x;
          while (cur < events.size() && events[cur].time <= t1) {
            const Vec fj = sqrt_eps_ * c_.jump(events[cur].time, z, mu, events[cur].mark);
            y += fj;
            z += fj;
            ++cur;
          }
          y -= (sqrt_eps_ * h) * jump_compensator(c_, t0, x, mu);
        }

        Vec xn;
        if (zero_op && cfg_.scheme == Scheme::kResolventSplit) {
          xn = y;
        } else if (cfg_.scheme == Scheme::kResolventSplit) {
          xn = resolvent(op_, res_lambda_, y);
        } else {
          xn = y - (eps * h) * yosida(op_, cfg_.yosida_lambda, x);
        }

        double maxabs = 0.0;
        for (int d = 0; d < ens.dim; ++d) maxabs = std::max(maxabs, std::abs(xn[d]));
        if (!(maxabs <= cfg_.blowup_ceiling)) {
          long long expected = -1;
          first_failure.compare_exchange_strong(expected, static_cast<long long>(i));
          continue;
        }

        const Vec dk = (y - xn) / eps;
        double dk_norm = 0.0;
        const std::size_t base = i * static_cast<std::size_t>(ens.dim);
        for (int d = 0; d < ens.dim; ++d) {
          ens.states[base + d] = xn[d];
          ens.k_accum[base + d] += dk[d];
          ens.incr_accum[base + d] += y[d] - x[d];
          last_dk_[base + d] = dk[d];
          dk_norm += dk[d] * dk[d];
        }
        ens.k_variation[i] += std::sqrt(dk_norm);
      }
    });
    if (first_failure.load() >= 0) {
      throw BlowUpError("particle " + std::to_string(first_failure.load()) +
                        " exceeded the blow-up ceiling at step " + std::to_string(k + 1));
    }
    ens.time = t1;
  }

  /// Unscaled constraint increments of the most recent step, particle-major.
  [[nodiscard]] const std::vector<double>& last_dk() const { return last_dk_; }

 private:
  const SolverConfig& cfg_;
  const CoefficientSet& c_;
  const MonotoneOperator& op_;
  std::shared_ptr<const std::vector<NoisePanel>> panels_;
  std::vector<std::size_t> cursors_;
  std::vector<double> last_dk_;
  double sqrt_eps_ = 1.0;
  double res_lambda_ = 0.0;
};

inline std::shared_ptr<const std::vector<NoisePanel>> make_panels(const SolverConfig& cfg,
                                                                  const CoefficientSet& c) {
  auto panels = std::make_shared<std::vector<NoisePanel>>();
  panels->reserve(static_cast<std::size_t>(cfg.n_particles));
  for (int i = 0; i < cfg.n_particles; ++i) {
    panels->emplace_back(cfg.seed, static_cast<std::uint32_t>(i), c.jump_law, cfg.horizon);
  }
  return panels;
}

inline void validate_run(const SolverConfig& cfg, const CoefficientSet& c, const MonotoneOperator& op,
                         const std::vector<double>& initial) {
  cfg.validate();
  if (!c.drift || !c.diffusion) throw CapabilityError("coefficient set must supply drift and diffusion");
  if (op.dim() != c.dim) throw InvalidInputError("operator and coefficient dimensions disagree");
  if (initial.size() != static_cast<std::size_t>(cfg.n_particles) * c.dim) {
    throw InvalidInputError("initial state array size does not match n_particles * dim");
  }
  for (double v : initial) {
    if (!std::isfinite(v)) throw InvalidInputError("initial state contains a non-finite value");
  }
}

struct SeriesTracker {
  TrajectoryRecord record;
  std::vector<double> sq_buffer;

  void init(const SolverConfig& cfg, const CoefficientSet& c, const std::vector<double>& initial,
            const RunOptions& opts) {
    record.epsilon = cfg.epsilon;
    record.step = cfg.step;
    record.seed = cfg.seed;
    record.n = cfg.n_particles;
    record.dim = c.dim;
    record.retain_stride = opts.retain_stride;
    record.tail_start = opts.tail_start;
    record.moment_ceiling = opts.moment_ceiling;
    record.initial_states = initial;
    if (std::isfinite(opts.tail_start)) {
      record.tail_sup.assign(static_cast<std::size_t>(cfg.n_particles), 0.0);
    }
    sq_buffer.assign(static_cast<std::size_t>(cfg.n_particles), 0.0);
  }

  void observe(const ParticleEnsemble& ens, double t, int step_index, const std::vector<double>* dk,
               double epsilon) {
    for (int i = 0; i < ens.n; ++i) {
      double sq = 0.0;
      const std::size_t base = static_cast<std::size_t>(i) * ens.dim;
      for (int d = 0; d < ens.dim; ++d) sq += ens.states[base + d] * ens.states[base + d];
      sq_buffer[static_cast<std::size_t>(i)] = sq;
    }
    const MeanSe stats = mean_se(sq_buffer);
    record.t.push_back(t);
    record.mean_sq.push_back(stats.mean);
    record.mean_sq_se.push_back(stats.se);
    const double prev_sup = record.sup_mean_sq.empty() ? -std::numeric_limits<double>::infinity()
                                                       : record.sup_mean_sq.back();
    record.sup_mean_sq.push_back(std::max(prev_sup, stats.mean));
    long double kv = 0.0L;
    for (double v : ens.k_variation) kv += v;
    record.k_variation_mean.push_back(epsilon * static_cast<double>(kv / ens.n));
    if (stats.mean > record.moment_ceiling) record.moment_ceiling_ok = false;

    if (!record.tail_sup.empty() && t >= record.tail_start - 1e-12) {
      for (int i = 0; i < ens.n; ++i) {
        record.tail_sup[static_cast<std::size_t>(i)] =
            std::max(record.tail_sup[static_cast<std::size_t>(i)],
                     std::sqrt(sq_buffer[static_cast<std::size_t>(i)]));
      }
    }

    // Snapshots land on stride boundaries; dk is the increment of the step
    // that produced the snapshot (absent at step 0).
    if (record.retain_stride > 0 && step_index % record.retain_stride == 0) {
      RetainedStep snap;
      snap.step = step_index;
      snap.t = t;
      snap.states = ens.states;
      if (dk != nullptr) snap.dk = *dk;
      record.retained.push_back(std::move(snap));
    }
  }
};

}  // namespace detail

/// Simulates one system.  `initial` is the flat particle-major initial
/// ensemble.  The record carries the full second-moment series; snapshots
/// and tail statistics follow `opts`.
[[nodiscard]] inline TrajectoryRecord simulate(const SolverConfig& cfg, const CoefficientSet& c,
                                               const MonotoneOperator& op, const std::vector<double>& initial,
                                               const RunOptions& opts = {}) {
  detail::validate_run(cfg, c, op, initial);
  auto panels = detail::make_panels(cfg, c);
  detail::Stepper stepper(cfg, c, op, panels);

  ParticleEnsemble ens = ParticleEnsemble::zeroed(cfg.n_particles, c.dim);
  ens.states = initial;

  detail::SeriesTracker tracker;
  tracker.init(cfg, c, initial, opts);
  tracker.observe(ens, 0.0, 0, nullptr, cfg.epsilon);

  const bool keep_dk = opts.retain_stride > 0 && !op.is_zero();
  const int steps = cfg.steps();
  for (int k = 0; k < steps; ++k) {
    stepper.step(ens, k);
    tracker.observe(ens, ens.time, k + 1, keep_dk ? &stepper.last_dk() : nullptr, cfg.epsilon);
  }
  return std::move(tracker.record);
}

/// Coupled averaging run: the full system and its averaged counterpart are
/// stepped in lockstep on identical noise panels; the record tracks the
/// particle mean (with standard error) of the running supremum of
/// |X_full - X_avg|^2 at every grid time.
struct CoupledRecord {
  std::vector<double> t;
  std::vector<double> d_mean;
  std::vector<double> d_se;
  double epsilon = 1.0;
  std::uint64_t seed = 0;

  [[nodiscard]] double terminal() const { return d_mean.empty() ? 0.0 : d_mean.back(); }
  [[nodiscard]] double terminal_se() const { return d_se.empty() ? 0.0 : d_se.back(); }
};

[[nodiscard]] inline CoupledRecord simulate_coupled(const SolverConfig& cfg, const CoefficientSet& c_full,
                                                    const AveragedTriple& avg, const MonotoneOperator& op,
                                                    const std::vector<double>& initial) {
  detail::validate_run(cfg, c_full, op, initial);
  const CoefficientSet c_avg = lift_averaged(avg, c_full);
  auto panels = detail::make_panels(cfg, c_full);
  detail::Stepper step_full(cfg, c_full, op, panels);
  detail::Stepper step_avg(cfg, c_avg, op, panels);

  ParticleEnsemble ex = ParticleEnsemble::zeroed(cfg.n_particles, c_full.dim);
  ParticleEnsemble ey = ex;
  ex.states = initial;
  ey.states = initial;

  CoupledRecord record;
  record.epsilon = cfg.epsilon;
  record.seed = cfg.seed;
  std::vector<double> sup_d2(static_cast<std::size_t>(cfg.n_particles), 0.0);
  record.t.push_back(0.0);
  record.d_mean.push_back(0.0);
  record.d_se.push_back(0.0);

  const int steps = cfg.steps();
  for (int k = 0; k < steps; ++k) {
    step_full.step(ex, k);
    step_avg.step(ey, k);
    for (int i = 0; i < cfg.n_particles; ++i) {
      double d2 = 0.0;
      const std::size_t base = static_cast<std::size_t>(i) * c_full.dim;
      for (int d = 0; d < c_full.dim; ++d) {
        const double diff = ex.states[base + d] - ey.states[base + d];
        d2 += diff * diff;
      }
      sup_d2[static_cast<std::size_t>(i)] = std::max(sup_d2[static_cast<std::size_t>(i)], d2);
    }
    const MeanSe stats = mean_se(sup_d2);
    record.t.push_back(ex.time);
    record.d_mean.push_back(stats.mean);
    record.d_se.push_back(stats.se);
  }
  return record;
}

/// Two ensembles through identical noise: per step and particle, the inner
/// product <X_{k+1} - X'_{k+1}, dK - dK'> must be nonnegative (unscaled
/// increments keep the check scale-free).  Reports the minimum encountered.
struct FlowMonotonicityReport {
  double min_inner_product = std::numeric_limits<double>::infinity();
  int argmin_step = -1;
};

[[nodiscard]] inline FlowMonotonicityReport discrete_flow_monotonicity(const SolverConfig& cfg,
                                                                       const CoefficientSet& c,
                                                                       const MonotoneOperator& op,
                                                                       const std::vector<double>& initial_a,
                                                                       const std::vector<double>& initial_b) {
  detail::validate_run(cfg, c, op, initial_a);
  detail::validate_run(cfg, c, op, initial_b);
  auto panels = detail::make_panels(cfg, c);
  detail::Stepper sa(cfg, c, op, panels);
  detail::Stepper sb(cfg, c, op, panels);
  ParticleEnsemble ea = ParticleEnsemble::zeroed(cfg.n_particles, c.dim);
  ParticleEnsemble eb = ea;
  ea.states = initial_a;
  eb.states = initial_b;

  FlowMonotonicityReport report;
  const int steps = cfg.steps();
  for (int k = 0; k < steps; ++k) {
    sa.step(ea, k);
    sb.step(eb, k);
    for (int i = 0; i < cfg.n_particles; ++i) {
      double ip = 0.0;
      const std::size_t base = static_cast<std::size_t>(i) * c.dim;
      for (int d = 0; d < c.dim; ++d) {
        ip += (ea.states[base + d] - eb.states[base + d]) * (sa.last_dk()[base + d] - sb.last_dk()[base + d]);
      }
      if (ip < report.min_inner_product) {
        report.min_inner_product = ip;
        report.argmin_step = k + 1;
      }
    }
  }
  return report;
}

}  // namespace mvsde
