#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mvsde/calculus.hpp"
#include "mvsde/catalog.hpp"
#include "mvsde/coefficients.hpp"
#include "mvsde/config.hpp"
#include "mvsde/core.hpp"
#include "mvsde/monotone.hpp"
#include "mvsde/noise.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/solver.hpp"
#include "mvsde/stability.hpp"

/// Experiment runners: orchestrate simulations per parsed configuration and
/// emit deterministic CSV / JSON outputs.
namespace mvsde {

inline constexpr const char* kVersionString = "0.1.0";

struct ExperimentReport {
  std::vector<std::string> paths;    ///< emitted files, in creation order
  std::vector<std::string> summary;  ///< human-readable result lines
  std::string config_hash;
  std::uint64_t seed = 0;
  bool criteria_pass = true;  ///< false when a statistical criterion failed
  StabilityReport stability;  ///< populated for the stability kind
};

namespace detail {

[[nodiscard]] inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, ExperimentReport& report) : path_(path.string()) {
    out_.open(path);
    if (!out_) throw Error("cannot open output file " + path_);
    report.paths.push_back(path_);
  }

  void header(const std::string& line) { out_ << line << "\n"; }

  CsvFile& cell(double v) {
    sep();
    out_ << fmt_g(v);
    return *this;
  }

  CsvFile& cell(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }

  CsvFile& cell(bool pass) {
    sep();
    out_ << (pass ? "pass" : "fail");
    return *this;
  }

  void end_row() {
    out_ << "\n";
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ",";
    first_ = false;
  }

  std::string path_;
  std::ofstream out_;
  bool first_ = true;
};

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

inline void write_provenance(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                             ExperimentReport& report) {
  report.config_hash = config_hash(cfg);
  report.seed = cfg.solver.seed;
  Json j;
  j["config_hash"] = report.config_hash;
  j["seed"] = cfg.solver.seed;
  j["version"] = kVersionString;
  j["kind"] = cfg.experiment.kind;
  const std::filesystem::path path = dir / "provenance.json";
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file " + path.string());
  out << j.dump(2) << "\n";
  report.paths.push_back(path.string());

  const std::filesystem::path cfg_path = dir / "config_resolved.json";
  std::ofstream cfg_out(cfg_path);
  if (!cfg_out) throw Error("cannot open output file " + cfg_path.string());
  cfg_out << serialize_config(cfg);
  report.paths.push_back(cfg_path.string());
}

inline void write_trajectory_csv(const TrajectoryRecord& rec, const std::filesystem::path& dir,
                                 ExperimentReport& report) {
  CsvFile csv(dir / "trajectory.csv", report);
  csv.header("t,mean_sq,mean_sq_se,sup_mean_sq,k_variation_mean");
  for (std::size_t i = 0; i < rec.t.size(); ++i) {
    csv.cell(rec.t[i])
        .cell(rec.mean_sq[i])
        .cell(rec.mean_sq_se[i])
        .cell(rec.sup_mean_sq[i])
        .cell(rec.k_variation_mean[i]);
    csv.end_row();
  }
}

inline void write_events_csv(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                             ExperimentReport& report) {
  const JumpLaw law = build_jump_law(cfg.system.jumps);
  CsvFile csv(dir / "events.csv", report);
  std::string head = "particle,time";
  for (int d = 0; d < std::max(1, law.mark_dim()); ++d) head += ",mark_" + std::to_string(d);
  csv.header(head);
  if (law.rate() <= 0.0) return;
  for (int i = 0; i < cfg.solver.n_particles; ++i) {
    const std::vector<JumpEvent> events = sample_jump_events(
        law, cfg.solver.horizon, cfg.solver.seed, static_cast<std::uint32_t>(i));
    for (const JumpEvent& e : events) {
      csv.cell(static_cast<double>(i)).cell(e.time);
      for (int d = 0; d < law.mark_dim(); ++d) csv.cell(e.mark[d]);
      csv.end_row();
    }
  }
}

[[nodiscard]] inline double initial_mean_square(const TrajectoryRecord& rec) {
  double acc = 0.0;
  for (int i = 0; i < rec.n; ++i) {
    double s = 0.0;
    for (int d = 0; d < rec.dim; ++d) {
      const double v = rec.initial_states[static_cast<std::size_t>(i) * rec.dim + d];
      s += v * v;
    }
    acc += s;
  }
  return acc / rec.n;
}

}  // namespace detail

// ============================================================================
// simulate
// ============================================================================

[[nodiscard]] inline ExperimentReport run_simulate(const ExperimentConfig& cfg) {
  ExperimentReport report;
  const std::filesystem::path dir = detail::prepare_dir(cfg.output.directory);

  const CoefficientSet c = build_coefficients(cfg.system);
  const MonotoneOperator op = build_operator(cfg.system.op, cfg.system.dim);
  const SolverConfig scfg = build_solver_config(cfg, cfg.solver.epsilon.front());
  const std::vector<double> init =
      build_initial_states(cfg.system, cfg.solver.n_particles, cfg.solver.seed);

  RunOptions opts;
  opts.tail_start = 0.75 * cfg.solver.horizon;
  if (cfg.output.retain_snapshots) {
    opts.retain_stride = std::max<long long>(1, scfg.steps() / 64);
  }
  const TrajectoryRecord rec = simulate(scfg, c, op, init, opts);

  detail::write_trajectory_csv(rec, dir, report);
  if (cfg.output.dump_events) detail::write_events_csv(cfg, dir, report);
  detail::write_provenance(cfg, dir, report);

  std::ostringstream line;
  line << "simulate: terminal mean square " << detail::fmt_g(rec.mean_sq.back()) << " (se "
       << detail::fmt_g(rec.mean_sq_se.back()) << "), constraint variation "
       << detail::fmt_g(rec.k_variation_mean.back());
  report.summary.push_back(line.str());
  return report;
}

// ============================================================================
// averaging sweep
// ============================================================================

[[nodiscard]] inline ExperimentReport run_averaging_sweep(const ExperimentConfig& cfg) {
  ExperimentReport report;
  const std::filesystem::path dir = detail::prepare_dir(cfg.output.directory);

  const CoefficientSet c = build_coefficients(cfg.system);
  const AveragedTriple avg = catalog::make_averaged(
      cfg.system.coefficients, cfg.system.params, cfg.system.dim, build_jump_law(cfg.system.jumps));
  const MonotoneOperator op = build_operator(cfg.system.op, cfg.system.dim);
  const std::vector<double> init =
      build_initial_states(cfg.system, cfg.solver.n_particles, cfg.solver.seed);
  const double delta = cfg.experiment.averaging.delta;

  std::vector<double> d_terminal;
  std::vector<double> d_se;
  for (std::size_t k = 0; k < cfg.solver.epsilon.size(); ++k) {
    const double eps = cfg.solver.epsilon[k];
    const SolverConfig scfg = build_solver_config(cfg, eps);
    const CoupledRecord crec = simulate_coupled(scfg, c, avg, op, init);
    d_terminal.push_back(crec.terminal());
    d_se.push_back(crec.terminal_se());

    detail::CsvFile run_csv(dir / ("averaging_run_" + std::to_string(k) + ".csv"), report);
    run_csv.header("t,d_mean,d_se");
    for (std::size_t i = 0; i < crec.t.size(); ++i) {
      run_csv.cell(crec.t[i]).cell(crec.d_mean[i]).cell(crec.d_se[i]);
      run_csv.end_row();
    }
  }

  {
    detail::CsvFile csv(dir / "averaging_summary.csv", report);
    csv.header("epsilon,d_terminal,d_se,ci_lo,ci_hi,chebyshev_delta,chebyshev_bound");
    for (std::size_t k = 0; k < cfg.solver.epsilon.size(); ++k) {
      const double ci = 1.96 * d_se[k];
      csv.cell(cfg.solver.epsilon[k])
          .cell(d_terminal[k])
          .cell(d_se[k])
          .cell(d_terminal[k] - ci)
          .cell(d_terminal[k] + ci)
          .cell(delta)
          .cell(d_terminal[k] / (delta * delta));
      csv.end_row();
    }
  }
  detail::write_provenance(cfg, dir, report);

  bool decreasing = true;
  for (std::size_t k = 1; k < d_terminal.size(); ++k) {
    if (!(d_terminal[k] < d_terminal[k - 1])) decreasing = false;
  }
  bool separated = true;
  if (d_terminal.size() >= 2) {
    const double lo_first = d_terminal.front() - 1.96 * d_se.front();
    const double hi_last = d_terminal.back() + 1.96 * d_se.back();
    separated = hi_last < lo_first;
  }
  report.criteria_pass = decreasing && separated;
  std::ostringstream line;
  line << "averaging: deviation " << (decreasing ? "strictly decreasing" : "NOT decreasing")
       << " across epsilon; extreme confidence intervals "
       << (separated ? "separated" : "NOT separated");
  report.summary.push_back(line.str());
  for (std::size_t k = 0; k < d_terminal.size(); ++k) {
    std::ostringstream row;
    row << "  epsilon " << detail::fmt_g(cfg.solver.epsilon[k]) << ": D(T) "
        << detail::fmt_g(d_terminal[k]) << " (se " << detail::fmt_g(d_se[k]) << ")";
    report.summary.push_back(row.str());
  }
  return report;
}

// ============================================================================
// stability battery
// ============================================================================

[[nodiscard]] inline ExperimentReport run_stability_battery(const ExperimentConfig& cfg) {
  ExperimentReport report;
  const std::filesystem::path dir = detail::prepare_dir(cfg.output.directory);
  const StabilityParams& st = cfg.experiment.stability;

  const CoefficientSet c = build_coefficients(cfg.system);
  const MonotoneOperator op = build_operator(cfg.system.op, cfg.system.dim);
  const SolverConfig scfg = build_solver_config(cfg, cfg.solver.epsilon.front());
  const std::vector<double> init =
      build_initial_states(cfg.system, cfg.solver.n_particles, cfg.solver.seed);

  const double horizon = cfg.solver.horizon;
  RunOptions opts;
  opts.tail_start = st.tail_start >= 0.0 ? st.tail_start : 0.75 * horizon;
  opts.retain_stride = std::max<long long>(1, scfg.steps() / std::max(1, st.audit_snapshots));
  const TrajectoryRecord rec = simulate(scfg, c, op, init, opts);
  const MomentSeries series = moment_series(rec);
  const double xi_ms = detail::initial_mean_square(rec);

  const double window_lo = st.fit_window_lo >= 0.0 ? st.fit_window_lo : horizon / 4.0;
  const double window_hi = st.fit_window_hi >= 0.0 ? st.fit_window_hi : horizon;

  StabilityReport& out = report.stability;
  detail::CsvFile csv(dir / "stability_report.csv", report);
  csv.header("criterion,parameters,statistic,margin,verdict");

  for (const std::string& criterion : st.criteria) {
    StabilityVerdict verdict;
    verdict.criterion = criterion;
    if (criterion == "ms_exponential") {
      const DecayFit fit = fit_exponential_decay(series, window_lo, window_hi, xi_ms);
      const BoundCheck env = check_decay_envelope(series, st.a2 / st.a1, st.alpha, xi_ms);
      out.fitted_alpha = fit.alpha;
      out.fitted_c = fit.c;
      out.fit_r2 = fit.r2;
      verdict.statistic = fit.alpha;
      verdict.margin = env.worst_margin;
      verdict.pass = fit.alpha > 0.0 && env.pass;
      std::ostringstream params;
      params << "alpha=" << detail::fmt_g(st.alpha) << ";prefactor="
             << detail::fmt_g(st.a2 / st.a1) << ";window=[" << detail::fmt_g(window_lo) << " "
             << detail::fmt_g(window_hi) << "];fit_c=" << detail::fmt_g(fit.c)
             << ";fit_r2=" << detail::fmt_g(fit.r2);
      verdict.parameters = params.str();
    } else if (criterion == "ultimate_bound") {
      const BoundCheck bound =
          check_ultimate_boundedness(series, st.bound_m, st.bound_lambda, st.bound_w, xi_ms);
      out.bound_w = st.bound_w;
      verdict.statistic = st.bound_w;
      verdict.margin = bound.worst_margin;
      verdict.pass = bound.pass;
      std::ostringstream params;
      params << "M=" << detail::fmt_g(st.bound_m) << ";lambda=" << detail::fmt_g(st.bound_lambda)
             << ";W=" << detail::fmt_g(st.bound_w);
      verdict.parameters = params.str();
    } else if (criterion == "as_stability") {
      const TailFractionCheck tail = check_as_stability(rec.tail_sup, st.delta);
      out.as_fraction = tail.fraction;
      verdict.statistic = tail.fraction;
      verdict.margin = tail.threshold - tail.fraction;
      verdict.pass = tail.pass;
      std::ostringstream params;
      params << "delta=" << detail::fmt_g(st.delta) << ";tail_start="
             << detail::fmt_g(opts.tail_start) << ";threshold=" << detail::fmt_g(tail.threshold);
      verdict.parameters = params.str();
    } else if (criterion == "lyapunov_audit") {
      const LyapunovFunction h = catalog::make_lyapunov(st.lyapunov.name, st.lyapunov.params);
      LyapunovAuditSpec spec;
      spec.form = st.audit_form == "pointwise"           ? LyapunovConditionForm::kPointwiseSandwich
                  : st.audit_form == "integrated_bounded" ? LyapunovConditionForm::kIntegratedBounded
                                                          : LyapunovConditionForm::kIntegratedDecay;
      spec.alpha = st.alpha;
      spec.a1 = st.a1;
      spec.a2 = st.a2;
      spec.n1 = st.n1;
      spec.n2 = st.n2;
      spec.n3 = st.n3;
      if (spec.form == LyapunovConditionForm::kPointwiseSandwich) {
        const double g1 = st.gamma1_scale;
        const double g2 = st.gamma2_scale;
        spec.gamma1 = [g1](double r) { return g1 * r * r; };
        spec.gamma2 = [g2](double r) { return g2 * r * r; };
      }
      std::vector<MeasureSample> samples;
      for (const RetainedStep& step : rec.retained) {
        samples.push_back({step.t, EmpiricalMeasure(step.states, rec.dim)});
      }
      const TrajectoryRecord* k_traj = op.is_zero() ? nullptr : &rec;
      const LyapunovAuditReport audit = audit_lyapunov_conditions(h, c, spec, samples, k_traj);
      verdict.statistic = audit.worst_generator_margin;
      verdict.margin = audit.worst_generator_margin;
      verdict.pass = audit.pass();
      std::ostringstream params;
      params << "form=" << audit.generator_form << ";V=" << st.lyapunov.name
             << ";alpha=" << detail::fmt_g(st.alpha) << ";samples=" << audit.samples
             << ";sandwich_lo=" << detail::fmt_g(audit.worst_lower_margin)
             << ";sandwich_hi=" << detail::fmt_g(audit.worst_upper_margin);
      if (audit.k_pairing_steps > 0) {
        params << ";min_k_pairing=" << detail::fmt_g(audit.min_k_pairing);
      }
      verdict.parameters = params.str();
    } else {
      throw ConfigError({"experiment.criteria: unknown criterion '" + criterion + "'"});
    }
    out.verdicts.push_back(verdict);
    csv.cell(verdict.criterion)
        .cell(verdict.parameters)
        .cell(verdict.statistic)
        .cell(verdict.margin)
        .cell(verdict.pass);
    csv.end_row();

    std::ostringstream line;
    line << "stability " << verdict.criterion << ": " << (verdict.pass ? "pass" : "FAIL")
         << " (statistic " << detail::fmt_g(verdict.statistic) << ", margin "
         << detail::fmt_g(verdict.margin) << ")";
    report.summary.push_back(line.str());
  }

  detail::write_trajectory_csv(rec, dir, report);
  detail::write_provenance(cfg, dir, report);
  report.criteria_pass = out.all_pass();
  return report;
}

// ============================================================================
// change-of-variable residual check
// ============================================================================

[[nodiscard]] inline ExperimentReport run_ito_check(const ExperimentConfig& cfg) {
  ExperimentReport report;
  const std::filesystem::path dir = detail::prepare_dir(cfg.output.directory);
  const ItoParams& ip = cfg.experiment.ito;

  const CoefficientSet c = build_coefficients(cfg.system);
  const MonotoneOperator op = build_operator(cfg.system.op, cfg.system.dim);
  const LyapunovFunction h = catalog::make_lyapunov(ip.lyapunov.name, ip.lyapunov.params);
  const std::vector<double> init =
      build_initial_states(cfg.system, cfg.solver.n_particles, cfg.solver.seed);

  std::vector<double> step_sizes = {cfg.solver.step};
  if (ip.h_refine) step_sizes.push_back(0.5 * cfg.solver.step);

  struct StepResult {
    double step;
    double residual;
    double se;
    double z;
  };
  std::vector<StepResult> results;
  bool first_series_written = false;

  for (double step : step_sizes) {
    std::vector<double> pooled;
    for (int rep = 0; rep < ip.replicates; ++rep) {
      SolverConfig scfg = build_solver_config(cfg, cfg.solver.epsilon.front());
      scfg.step = step;
      scfg.seed = derive_seed(cfg.solver.seed, static_cast<std::uint64_t>(rep));
      RunOptions opts;
      opts.retain_stride = 1;
      const TrajectoryRecord rec = simulate(scfg, c, op, init, opts);
      const ItoResidualSeries series = ito_residual(rec, h, c);
      pooled.insert(pooled.end(), series.terminal_per_particle.begin(),
                    series.terminal_per_particle.end());
      if (!first_series_written) {
        detail::CsvFile csv(dir / "ito_residual.csv", report);
        csv.header("t,residual,se,z");
        for (std::size_t i = 0; i < series.t.size(); ++i) {
          csv.cell(series.t[i]).cell(series.residual[i]).cell(series.se[i]).cell(series.z[i]);
          csv.end_row();
        }
        first_series_written = true;
      }
    }
    const MeanSe stats = mean_se(pooled);
    results.push_back({step, stats.mean, stats.se,
                       stats.se > 0.0 ? stats.mean / stats.se : 0.0});
  }

  {
    detail::CsvFile csv(dir / "ito_summary.csv", report);
    csv.header("step,residual,se,z,replicates");
    for (const StepResult& r : results) {
      csv.cell(r.step).cell(r.residual).cell(r.se).cell(r.z).cell(
          static_cast<double>(ip.replicates));
      csv.end_row();
    }
  }
  detail::write_provenance(cfg, dir, report);

  bool pass = true;
  for (const StepResult& r : results) {
    if (std::abs(r.z) > 4.0) pass = false;
    std::ostringstream line;
    line << "ito step " << detail::fmt_g(r.step) << ": residual " << detail::fmt_g(r.residual)
         << " (se " << detail::fmt_g(r.se) << ", z " << detail::fmt_g(r.z) << ")";
    report.summary.push_back(line.str());
  }
  if (results.size() == 2) {
    const double coarse = std::abs(results[0].residual);
    const double fine = std::abs(results[1].residual);
    const double ratio = fine > 0.0 ? coarse / fine : std::numeric_limits<double>::infinity();
    if (!(ratio >= 1.5)) pass = false;
    std::ostringstream line;
    line << "ito refinement ratio |R(h)|/|R(h/2)| = " << detail::fmt_g(ratio)
         << (ratio >= 1.5 ? " (>= 1.5)" : " (< 1.5)");
    report.summary.push_back(line.str());
  }
  report.criteria_pass = pass;
  return report;
}

// ============================================================================
// audits
// ============================================================================

[[nodiscard]] inline ExperimentReport run_audits(const ExperimentConfig& cfg) {
  ExperimentReport report;
  const std::filesystem::path dir = detail::prepare_dir(cfg.output.directory);
  const AuditParams& ap = cfg.experiment.audits;
  const int dim = cfg.system.dim;

  const CoefficientSet c = build_coefficients(cfg.system);
  const MonotoneOperator op = build_operator(cfg.system.op, dim);
  const JumpLaw law = build_jump_law(cfg.system.jumps);

  const auto make_sampler = [&cfg, dim](std::uint64_t slot) {
    auto stream = std::make_shared<CounterStream>(cfg.solver.seed, 0, slot, StreamPurpose::kAudit);
    return [stream, dim]() {
      Vec x(dim);
      for (int d = 0; d < dim; ++d) x[d] = 2.0 * stream->gaussian();
      return x;
    };
  };

  detail::CsvFile csv(dir / "audit_report.csv", report);
  csv.header("audit,statistic,value,threshold,verdict");
  bool pass = true;
  const auto emit = [&csv, &report, &pass](const std::string& audit, const std::string& statistic,
                                           double value, double threshold, bool ok) {
    csv.cell(audit).cell(statistic).cell(value).cell(threshold).cell(ok);
    csv.end_row();
    if (!ok) pass = false;
    std::ostringstream line;
    line << "audit " << audit << ": " << statistic << " = " << detail::fmt_g(value)
         << (ok ? " (ok)" : " (FAIL)");
    report.summary.push_back(line.str());
  };

  {
    // Unit resolvent parameter: the graph pairs carry no 1/lambda roundoff
    // amplification, so the 1e-12 floor measures the operator itself.
    const MonotonicityReport mono = audit_monotonicity(op, make_sampler(0), ap.pairs, 1.0);
    emit("operator_monotonicity", "min_inner_product", mono.min_inner_product, -1e-12,
         mono.min_inner_product >= -1e-12);
  }

  {
    const AveragedTriple avg = catalog::make_averaged(cfg.system.coefficients, cfg.system.params,
                                                      dim, law);
    const InheritedBoundsReport bounds =
        audit_inherited_bounds(avg, c, make_sampler(1), ap.samples);
    emit("averaged_continuity", "fitted_ratio", bounds.fitted_continuity, 1.0 + 1e-6,
         bounds.fitted_continuity <= 1.0 + 1e-6);
    emit("averaged_growth", "growth_exponent", bounds.growth_exponent, 1.5,
         !bounds.growth_flag);

    // Time-average defects of the full system against its average, evaluated
    // on an audit cloud.  The jump defect is normalized by the mean squared
    // mark (reflected in the column name); finite values pass.
    auto sampler = make_sampler(2);
    const int cloud = 32;
    std::vector<double> flat(static_cast<std::size_t>(cloud) * dim);
    for (int i = 0; i < cloud; ++i) {
      const Vec x = sampler();
      for (int d = 0; d < dim; ++d) flat[static_cast<std::size_t>(i) * dim + d] = x[d];
    }
    const EmpiricalMeasure mu(flat, dim);
    const DefectReport defect = time_average_defect(c, avg, sampler(), mu, cfg.solver.horizon);
    emit("defect_drift", "psi1", defect.drift, std::numeric_limits<double>::infinity(),
         std::isfinite(defect.drift));
    emit("defect_diffusion", "psi2", defect.diffusion, std::numeric_limits<double>::infinity(),
         std::isfinite(defect.diffusion));
    emit("defect_jump", "psi3_over_mean_mark_sq", defect.jump,
         std::numeric_limits<double>::infinity(), std::isfinite(defect.jump));
  }

  if (law.rate() > 0.0) {
    const IsometryReport iso = verify_isometry(
        law, [](double, const Vec& u) { return u.norm(); }, cfg.solver.horizon, ap.streams,
        cfg.solver.seed);
    emit("jump_isometry", "z_score", iso.z, 3.0, std::abs(iso.z) <= 3.0);
    emit("jump_isometry_mean", "mc_mean", iso.mc_mean, std::numeric_limits<double>::infinity(),
         std::isfinite(iso.mc_mean));
  }

  detail::write_provenance(cfg, dir, report);
  report.criteria_pass = pass;
  return report;
}

// ============================================================================
// dispatch
// ============================================================================

[[nodiscard]] inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment.kind == "simulate") return run_simulate(cfg);
  if (cfg.experiment.kind == "averaging") return run_averaging_sweep(cfg);
  if (cfg.experiment.kind == "stability") return run_stability_battery(cfg);
  if (cfg.experiment.kind == "ito_check") return run_ito_check(cfg);
  if (cfg.experiment.kind == "audits") return run_audits(cfg);
  throw ConfigError({"experiment.kind: unknown kind '" + cfg.experiment.kind + "'"});
}

}  // namespace mvsde
