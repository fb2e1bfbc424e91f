#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mvsde/catalog.hpp"
#include "mvsde/core.hpp"
#include "mvsde/monotone.hpp"
#include "mvsde/solver.hpp"
#include "mvsde/stability.hpp"

using namespace mvsde;

namespace {

SolverConfig run_config(int n, double h, double horizon, std::uint64_t seed) {
  SolverConfig cfg;
  cfg.n_particles = n;
  cfg.step = h;
  cfg.horizon = horizon;
  cfg.seed = seed;
  return cfg;
}

MomentSeries synthetic_decay(double c, double alpha, double level) {
  MomentSeries s;
  for (int k = 0; k <= 40; ++k) {
    const double t = 0.05 * k;
    s.t.push_back(t);
    s.value.push_back(c * std::exp(-alpha * t) + level);
    s.se.push_back(0.0);
  }
  return s;
}

EmpiricalMeasure cloud(std::vector<double> xs) { return EmpiricalMeasure(std::move(xs), 1); }

}  // namespace

TEST_CASE("moment series mirrors the trajectory record") {
  const auto c = catalog::make_coefficients("mean_field_ou", {{"a", 1.0}}, 1, JumpLaw::none());
  const auto traj = simulate(run_config(4, 0.1, 0.5, 7), c, MonotoneOperator::zero(1),
                             {1.0, -1.0, 0.5, 2.0});
  const MomentSeries series = moment_series(traj);
  REQUIRE(series.t == traj.t);
  REQUIRE(series.value == traj.mean_sq);
  REQUIRE(series.se == traj.mean_sq_se);
}

TEST_CASE("decay regression recovers an exact exponential") {
  const DecayFit fit = fit_exponential_decay(synthetic_decay(4.0, 3.0, 0.0), 0.0, 2.0, 4.0);
  CHECK(fit.alpha == Catch::Approx(3.0).epsilon(1e-10));
  CHECK(fit.c == Catch::Approx(1.0).epsilon(1e-10));
  CHECK(fit.r2 >= 1.0 - 1e-12);
  CHECK(fit.points == 41);
}

TEST_CASE("decay regression degrades gracefully on constants") {
  const DecayFit fit = fit_exponential_decay(synthetic_decay(2.0, 0.0, 0.0), 0.0, 2.0, 2.0);
  CHECK(std::abs(fit.alpha) <= 1e-12);
  CHECK(fit.r2 == 1.0);
}

TEST_CASE("decay regression validates its window") {
  MomentSeries s = synthetic_decay(1.0, 1.0, 0.0);
  CHECK_THROWS_AS(fit_exponential_decay(s, 0.0, 2.0, 0.0), InvalidInputError);
  CHECK_THROWS_AS(fit_exponential_decay(s, 5.0, 6.0, 1.0), InvalidInputError);
  s.value[10] = 0.0;
  CHECK_THROWS_WITH(fit_exponential_decay(s, 0.0, 2.0, 1.0),
                    Catch::Matchers::ContainsSubstring("shrink the window"));
  MomentSeries bad;
  bad.t = {0.0, 1.0};
  bad.value = {1.0};
  CHECK_THROWS_AS(fit_exponential_decay(bad, 0.0, 2.0, 1.0), InvalidInputError);
}

TEST_CASE("contractive mean-field pull decays at the combined rate") {
  // Identical particles keep the ensemble on its mean, so the drift
  // -x + 0.25 mean contracts at rate 0.75 and the square at 1.5.
  const auto c =
      catalog::make_coefficients("mean_field_ou", {{"a", 1.0}, {"c", 0.25}}, 1, JumpLaw::none());
  const auto traj = simulate(run_config(16, 1e-3, 2.0, 11), c, MonotoneOperator::zero(1),
                             std::vector<double>(16, 1.0));
  const MomentSeries series = moment_series(traj);
  const DecayFit fit = fit_exponential_decay(series, 0.0, 2.0, 1.0);
  CHECK(fit.alpha == Catch::Approx(1.5).epsilon(0.05));
  CHECK(fit.r2 >= 1.0 - 1e-9);

  const BoundCheck pass = check_decay_envelope(series, 1.0, 1.5, 1.0);
  CHECK(pass.pass);
  CHECK(pass.worst_margin <= 0.0);
  const BoundCheck fail = check_decay_envelope(series, 1.0, 1.6, 1.0);
  CHECK_FALSE(fail.pass);
  CHECK(fail.worst_margin > 0.0);
  CHECK(fail.worst_t > 0.0);
}

TEST_CASE("decay envelope flags rates that are too optimistic") {
  const MomentSeries s = synthetic_decay(1.0, 3.0, 0.0);
  CHECK(check_decay_envelope(s, 1.0, 3.0, 1.0).pass);
  const BoundCheck fail = check_decay_envelope(s, 1.0, 3.5, 1.0);
  CHECK_FALSE(fail.pass);
  CHECK(fail.worst_margin > 0.0);
  CHECK_THROWS_AS(check_decay_envelope(s, -1.0, 3.0, 1.0), InvalidInputError);
}

TEST_CASE("ultimate boundedness separates the floor level from the transient") {
  const MomentSeries s = synthetic_decay(1.0, 2.0, 0.1);
  CHECK(check_ultimate_boundedness(s, 1.0, 2.0, 0.1, 1.0).pass);
  const BoundCheck fail = check_ultimate_boundedness(s, 1.0, 2.0, 0.05, 1.0);
  CHECK_FALSE(fail.pass);
  CHECK(fail.worst_margin == Catch::Approx(0.05).margin(1e-6));
  CHECK_THROWS_AS(check_ultimate_boundedness(s, 1.0, -2.0, 0.1, 1.0), InvalidInputError);
}

TEST_CASE("tail fraction check counts and thresholds") {
  std::vector<double> sup(100, 0.01);
  sup[0] = 5.0;
  const TailFractionCheck pass = check_as_stability(sup, 1.0);
  CHECK(pass.n_total == 100);
  CHECK(pass.n_below == 99);
  CHECK(pass.fraction == Catch::Approx(0.99));
  CHECK(pass.threshold == Catch::Approx(0.7));
  CHECK(pass.pass);

  const TailFractionCheck fail = check_as_stability(std::vector<double>(100, 2.0), 1.0);
  CHECK(fail.fraction == 0.0);
  CHECK_FALSE(fail.pass);

  // Tiny ensembles cannot reject anything: the threshold floors at zero.
  const TailFractionCheck tiny = check_as_stability(std::vector<double>(4, 2.0), 1.0);
  CHECK(tiny.threshold == 0.0);
  CHECK(tiny.pass);

  CHECK_THROWS_AS(check_as_stability({}, 1.0), InvalidInputError);
  CHECK_THROWS_AS(check_as_stability(sup, 0.0), InvalidInputError);
}

TEST_CASE("pathwise tails settle for contractions and wander for free noise") {
  RunOptions opts;
  opts.tail_start = 15.0;

  const auto frozen = catalog::make_coefficients("zero", {}, 1, JumpLaw::none());
  const auto rest = simulate(run_config(32, 0.01, 20.0, 5), frozen, MonotoneOperator::zero(1),
                             std::vector<double>(32, 0.0), opts);
  CHECK(check_as_stability(rest.tail_sup, 1e-6).fraction == 1.0);

  const auto pull = catalog::make_coefficients("mean_field_ou", {{"a", 1.0}}, 1, JumpLaw::none());
  const auto settled = simulate(run_config(32, 0.01, 20.0, 5), pull, MonotoneOperator::zero(1),
                                std::vector<double>(32, 1.0), opts);
  const TailFractionCheck ok = check_as_stability(settled.tail_sup, 1e-3);
  CHECK(ok.fraction == 1.0);
  CHECK(ok.pass);

  const auto diffuse = catalog::make_coefficients("pure_diffusion", {{"sigma", 1.0}}, 1,
                                                  JumpLaw::none());
  const auto spread = simulate(run_config(200, 0.01, 20.0, 5), diffuse, MonotoneOperator::zero(1),
                               std::vector<double>(200, 0.0), opts);
  const TailFractionCheck wander = check_as_stability(spread.tail_sup, 0.1);
  CHECK_FALSE(wander.pass);
  CHECK(wander.fraction <= 0.2);
}

TEST_CASE("integrated audit accepts the exact contraction constants") {
  const auto c = catalog::make_coefficients("mean_field_ou", {{"a", 1.0}}, 1, JumpLaw::none());
  const auto h = catalog::make_lyapunov("quadratic", {});
  LyapunovAuditSpec spec;
  spec.form = LyapunovConditionForm::kIntegratedDecay;
  spec.alpha = 2.0;
  spec.a1 = 1.0;
  spec.a2 = 1.0;
  const std::vector<MeasureSample> samples = {{0.0, cloud({1.0, -2.0, 0.5})},
                                              {0.7, cloud({0.3, 0.9, -1.4})}};
  const auto report = audit_lyapunov_conditions(h, c, spec, samples);
  CHECK(report.generator_form == "integrated");
  CHECK(report.samples == 2);
  CHECK(report.worst_generator_margin == Catch::Approx(0.0).margin(1e-12));
  CHECK(report.worst_lower_margin == Catch::Approx(0.0).margin(1e-12));
  CHECK(report.worst_upper_margin == Catch::Approx(0.0).margin(1e-12));
  CHECK(report.pass());

  LyapunovAuditSpec greedy = spec;
  greedy.alpha = 2.5;
  const auto rejected = audit_lyapunov_conditions(h, c, greedy, samples);
  CHECK_FALSE(rejected.generator_pass);
  CHECK(rejected.worst_generator_margin > 0.0);
}

TEST_CASE("pointwise audit applies the envelope moduli at each particle") {
  const auto c = catalog::make_coefficients("mean_field_ou", {{"a", 1.0}}, 1, JumpLaw::none());
  const auto h = catalog::make_lyapunov("quadratic", {});
  LyapunovAuditSpec spec;
  spec.form = LyapunovConditionForm::kPointwiseSandwich;
  spec.alpha = 2.0;
  spec.gamma1 = [](double r) { return 0.5 * r * r; };
  spec.gamma2 = [](double r) { return 2.0 * r * r; };
  const std::vector<MeasureSample> samples = {{0.0, cloud({1.0, -0.4, 2.2})}};
  const auto report = audit_lyapunov_conditions(h, c, spec, samples);
  CHECK(report.generator_form == "pointwise");
  CHECK(report.pass());
  CHECK(report.worst_lower_margin <= 0.0);
  CHECK(report.worst_upper_margin <= 0.0);

  LyapunovAuditSpec inverted = spec;
  inverted.gamma1 = [](double r) { return 2.0 * r * r; };
  const auto rejected = audit_lyapunov_conditions(h, c, inverted, samples);
  CHECK_FALSE(rejected.sandwich_pass);

  LyapunovAuditSpec incomplete = spec;
  incomplete.gamma2 = nullptr;
  CHECK_THROWS_AS(audit_lyapunov_conditions(h, c, incomplete, samples), InvalidInputError);
}

TEST_CASE("bounded-form audit absorbs additive noise into the slack") {
  // b = -x with sigma = 0.5 gives generator -2|x|^2 + 0.25 on the square.
  const auto c = catalog::make_coefficients(
      "mean_field_ou", {{"a", 1.0}, {"sigma", 0.5}}, 1, JumpLaw::none());
  const auto h = catalog::make_lyapunov("quadratic", {});
  LyapunovAuditSpec spec;
  spec.form = LyapunovConditionForm::kIntegratedBounded;
  spec.alpha = 2.0;
  spec.n1 = 0.25;
  const std::vector<MeasureSample> samples = {{0.0, cloud({0.3, -1.2, 0.8, 2.0})},
                                              {1.3, cloud({-0.1, 0.6})}};
  const auto report = audit_lyapunov_conditions(h, c, spec, samples);
  CHECK(report.worst_generator_margin == Catch::Approx(0.0).margin(1e-12));
  CHECK(report.pass());

  LyapunovAuditSpec tight = spec;
  tight.n1 = 0.2;
  const auto rejected = audit_lyapunov_conditions(h, c, tight, samples);
  CHECK_FALSE(rejected.generator_pass);
  CHECK(rejected.worst_generator_margin == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("constraint pairing stays nonnegative along reflected runs") {
  const auto ray = MonotoneOperator::normal_cone(ConvexSet::halfspace(Vec::Ones(1), 0.0));
  const auto c = catalog::make_coefficients("pure_diffusion", {{"sigma", 1.0}}, 1, JumpLaw::none());
  RunOptions opts;
  opts.retain_stride = 1;
  const auto traj = simulate(run_config(50, 1e-3, 1.0, 17), c, ray,
                             std::vector<double>(50, 0.0), opts);

  const auto h = catalog::make_lyapunov("quadratic", {});
  LyapunovAuditSpec spec;
  spec.form = LyapunovConditionForm::kIntegratedBounded;
  spec.alpha = 2.0;
  spec.n1 = 12.0;  // sigma^2 plus alpha times any moment these clouds reach
  const std::vector<MeasureSample> samples = {
      {traj.t.back(), EmpiricalMeasure(traj.retained.back().states, 1)}};
  const auto report = audit_lyapunov_conditions(h, c, spec, samples, &traj);
  CHECK(report.k_pairing_steps == 1000);
  // Reflections move the state to the boundary where the gradient vanishes.
  CHECK(report.min_k_pairing == 0.0);
  CHECK(report.k_pairing_pass);
  CHECK(report.pass());
}

TEST_CASE("audit validates its inputs") {
  const auto c = catalog::make_coefficients("zero", {}, 1, JumpLaw::none());
  const auto h = catalog::make_lyapunov("quadratic", {});
  const std::vector<MeasureSample> samples = {{0.0, cloud({1.0})}};
  LyapunovAuditSpec spec;
  spec.alpha = 0.0;
  CHECK_THROWS_AS(audit_lyapunov_conditions(h, c, spec, samples), InvalidInputError);
  spec.alpha = 1.0;
  CHECK_THROWS_AS(audit_lyapunov_conditions(h, c, spec, {}), InvalidInputError);

  LyapunovFunction no_dt = h;
  no_dt.dt = nullptr;
  CHECK_THROWS_AS(audit_lyapunov_conditions(no_dt, c, spec, samples), CapabilityError);
}
