#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvsde/catalog.hpp"
#include "mvsde/coefficients.hpp"
#include "mvsde/core.hpp"
#include "mvsde/monotone.hpp"
#include "mvsde/noise.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/solver.hpp"

/// Experiment configuration: JSON schema, validation that reports every
/// violation with its path, round-trip serialization, and materialization of
/// catalog objects.
namespace mvsde {

using Json = nlohmann::json;

// ============================================================================
// Config structs
// ============================================================================

/// Convex-set description (for normal-cone operators).
struct SetConfig {
  std::string shape = "halfspace";  // halfspace | ball | box | intersection
  std::vector<double> normal;
  double offset = 0.0;
  std::vector<double> center;
  double radius = 1.0;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<SetConfig> members;
};

struct OperatorConfig {
  std::string kind = "zero";  // zero | normal_cone | subdifferential | linear_psd
  SetConfig set;
  std::string norm = "abs_sum";  // subdifferential flavor: abs_sum | norm | squared_norm
  double weight = 1.0;
  std::vector<std::vector<double>> matrix;
};

struct JumpConfig {
  double rate = 0.0;
  double alpha = 1.0;
  std::string law = "uniform_ball";  // uniform_ball | truncated_gaussian
  int mark_dim = 1;
};

struct InitialConfig {
  std::string kind = "constant";  // constant | gaussian
  std::vector<double> value;
  std::vector<double> mean;
  double std_dev = 1.0;
};

struct SystemConfig {
  int dim = 1;
  std::string coefficients = "mean_field_ou";
  catalog::Params params;
  OperatorConfig op;
  JumpConfig jumps;
  InitialConfig initial;
  double beta = 1.0;
};

struct SolverBlockConfig {
  int n_particles = 1000;
  double step = 1e-3;
  double horizon = 1.0;
  std::vector<double> epsilon = {1.0};
  std::string scheme = "resolvent_split";  // resolvent_split | yosida_explicit
  double yosida_lambda = 1e-2;
  std::uint64_t seed = 1;
  int threads = 1;
  double blowup_ceiling = 1e8;
};

struct LyapunovConfig {
  std::string name = "quadratic";
  catalog::Params params;
};

struct StabilityParams {
  std::vector<std::string> criteria;  // ms_exponential | ultimate_bound | as_stability | lyapunov_audit
  double alpha = 1.0;
  double fit_window_lo = -1.0;  // negative: default to horizon/4
  double fit_window_hi = -1.0;  // negative: default to horizon
  double bound_m = 1.0;
  double bound_lambda = 1.0;
  double bound_w = 0.0;
  double delta = 1e-3;
  double tail_start = -1.0;  // negative: default to 3 horizon/4
  LyapunovConfig lyapunov;
  std::string audit_form = "integrated_decay";  // integrated_decay | integrated_bounded | pointwise
  double a1 = 1.0, a2 = 1.0;
  double n1 = 0.0, n2 = 0.0, n3 = 0.0;
  double gamma1_scale = 0.5;  // pointwise sandwich moduli: scale * r^2
  double gamma2_scale = 2.0;
  int audit_snapshots = 8;
};

struct AveragingParams {
  double delta = 0.1;  // threshold for the deviation-probability bound
};

struct ItoParams {
  LyapunovConfig lyapunov = {"measure_quadratic", {}};
  int replicates = 1;
  bool h_refine = false;
};

struct AuditParams {
  int pairs = 4096;    // graph pairs for the monotonicity audit
  int samples = 64;    // coefficient-bound sample count
  int streams = 1000;  // isometry Monte Carlo streams
};

struct ExperimentBlockConfig {
  std::string kind = "simulate";  // simulate | averaging | stability | ito_check | audits
  AveragingParams averaging;
  StabilityParams stability;
  ItoParams ito;
  AuditParams audits;
};

struct OutputConfig {
  std::string directory = "out";
  bool retain_snapshots = false;
  bool dump_events = false;
};

struct ExperimentConfig {
  SystemConfig system;
  SolverBlockConfig solver;
  ExperimentBlockConfig experiment;
  OutputConfig output;
};

// ============================================================================
// Serialization
// ============================================================================

namespace detail {

inline Json set_to_json(const SetConfig& s) {
  Json j;
  j["shape"] = s.shape;
  if (s.shape == "halfspace") {
    j["normal"] = s.normal;
    j["offset"] = s.offset;
  } else if (s.shape == "ball") {
    j["center"] = s.center;
    j["radius"] = s.radius;
  } else if (s.shape == "box") {
    j["lo"] = s.lo;
    j["hi"] = s.hi;
  } else if (s.shape == "intersection") {
    Json members = Json::array();
    for (const SetConfig& m : s.members) members.push_back(set_to_json(m));
    j["members"] = members;
  }
  return j;
}

}  // namespace detail

[[nodiscard]] inline Json to_json(const ExperimentConfig& cfg) {
  Json j;
  Json& sys = j["system"];
  sys["dim"] = cfg.system.dim;
  sys["coefficients"]["name"] = cfg.system.coefficients;
  sys["coefficients"]["params"] = cfg.system.params;
  sys["operator"]["kind"] = cfg.system.op.kind;
  if (cfg.system.op.kind == "normal_cone") {
    sys["operator"]["set"] = detail::set_to_json(cfg.system.op.set);
  } else if (cfg.system.op.kind == "subdifferential") {
    sys["operator"]["norm"] = cfg.system.op.norm;
    sys["operator"]["weight"] = cfg.system.op.weight;
  } else if (cfg.system.op.kind == "linear_psd") {
    sys["operator"]["matrix"] = cfg.system.op.matrix;
  }
  sys["jumps"]["rate"] = cfg.system.jumps.rate;
  sys["jumps"]["alpha"] = cfg.system.jumps.alpha;
  sys["jumps"]["law"] = cfg.system.jumps.law;
  sys["jumps"]["mark_dim"] = cfg.system.jumps.mark_dim;
  sys["initial"]["kind"] = cfg.system.initial.kind;
  if (cfg.system.initial.kind == "constant") {
    sys["initial"]["value"] = cfg.system.initial.value;
  } else {
    sys["initial"]["mean"] = cfg.system.initial.mean;
    sys["initial"]["std"] = cfg.system.initial.std_dev;
  }
  sys["beta"] = cfg.system.beta;

  Json& sol = j["solver"];
  sol["n_particles"] = cfg.solver.n_particles;
  sol["step"] = cfg.solver.step;
  sol["horizon"] = cfg.solver.horizon;
  sol["epsilon"] = cfg.solver.epsilon;
  sol["scheme"] = cfg.solver.scheme;
  sol["yosida_lambda"] = cfg.solver.yosida_lambda;
  sol["seed"] = cfg.solver.seed;
  sol["threads"] = cfg.solver.threads;
  sol["blowup_ceiling"] = cfg.solver.blowup_ceiling;

  Json& exp = j["experiment"];
  exp["kind"] = cfg.experiment.kind;
  if (cfg.experiment.kind == "averaging") {
    exp["delta"] = cfg.experiment.averaging.delta;
  } else if (cfg.experiment.kind == "stability") {
    const StabilityParams& st = cfg.experiment.stability;
    exp["criteria"] = st.criteria;
    exp["alpha"] = st.alpha;
    if (st.fit_window_lo >= 0.0) exp["fit_window_lo"] = st.fit_window_lo;
    if (st.fit_window_hi >= 0.0) exp["fit_window_hi"] = st.fit_window_hi;
    exp["bound_m"] = st.bound_m;
    exp["bound_lambda"] = st.bound_lambda;
    exp["bound_w"] = st.bound_w;
    exp["delta"] = st.delta;
    if (st.tail_start >= 0.0) exp["tail_start"] = st.tail_start;
    exp["lyapunov"]["name"] = st.lyapunov.name;
    exp["lyapunov"]["params"] = st.lyapunov.params;
    exp["audit_form"] = st.audit_form;
    exp["a1"] = st.a1;
    exp["a2"] = st.a2;
    exp["n1"] = st.n1;
    exp["n2"] = st.n2;
    exp["n3"] = st.n3;
    exp["gamma1_scale"] = st.gamma1_scale;
    exp["gamma2_scale"] = st.gamma2_scale;
    exp["audit_snapshots"] = st.audit_snapshots;
  } else if (cfg.experiment.kind == "ito_check") {
    exp["lyapunov"]["name"] = cfg.experiment.ito.lyapunov.name;
    exp["lyapunov"]["params"] = cfg.experiment.ito.lyapunov.params;
    exp["replicates"] = cfg.experiment.ito.replicates;
    exp["h_refine"] = cfg.experiment.ito.h_refine;
  } else if (cfg.experiment.kind == "audits") {
    exp["pairs"] = cfg.experiment.audits.pairs;
    exp["samples"] = cfg.experiment.audits.samples;
    exp["streams"] = cfg.experiment.audits.streams;
  }

  j["output"]["directory"] = cfg.output.directory;
  j["output"]["retain_snapshots"] = cfg.output.retain_snapshots;
  j["output"]["dump_events"] = cfg.output.dump_events;
  return j;
}

[[nodiscard]] inline std::string serialize_config(const ExperimentConfig& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

[[nodiscard]] inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_json(a) == to_json(b);
}

/// FNV-1a hash of the canonical serialization, for provenance stamping.
[[nodiscard]] inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ============================================================================
// Parsing
// ============================================================================

namespace detail {

/// Collects violations instead of throwing, so one parse reports everything.
class ConfigReader {
 public:
  explicit ConfigReader(std::vector<std::string>& violations) : violations_(violations) {}

  void fail(const std::string& path, const std::string& what) {
    violations_.push_back(path + ": " + what);
  }

  [[nodiscard]] const Json* child(const Json& j, const std::string& path, const char* key,
                                  bool required) {
    if (!j.is_object()) return nullptr;
    const auto it = j.find(key);
    if (it == j.end()) {
      if (required) fail(path + "." + key, "missing required key");
      return nullptr;
    }
    return &*it;
  }

  double number(const Json& j, const std::string& path, const char* key, double fallback,
                bool required = false) {
    const Json* c = child(j, path, key, required);
    if (c == nullptr) return fallback;
    if (!c->is_number()) {
      fail(path + "." + key, "expected a number");
      return fallback;
    }
    return c->get<double>();
  }

  std::int64_t integer(const Json& j, const std::string& path, const char* key,
                       std::int64_t fallback, bool required = false) {
    const Json* c = child(j, path, key, required);
    if (c == nullptr) return fallback;
    if (!c->is_number_integer()) {
      fail(path + "." + key, "expected an integer");
      return fallback;
    }
    return c->get<std::int64_t>();
  }

  bool boolean(const Json& j, const std::string& path, const char* key, bool fallback) {
    const Json* c = child(j, path, key, false);
    if (c == nullptr) return fallback;
    if (!c->is_boolean()) {
      fail(path + "." + key, "expected a boolean");
      return fallback;
    }
    return c->get<bool>();
  }

  std::string text(const Json& j, const std::string& path, const char* key,
                   const std::string& fallback, bool required = false) {
    const Json* c = child(j, path, key, required);
    if (c == nullptr) return fallback;
    if (!c->is_string()) {
      fail(path + "." + key, "expected a string");
      return fallback;
    }
    return c->get<std::string>();
  }

  std::vector<double> number_list(const Json& j, const std::string& path, const char* key,
                                  std::vector<double> fallback, bool required = false) {
    const Json* c = child(j, path, key, required);
    if (c == nullptr) return fallback;
    if (!c->is_array()) {
      fail(path + "." + key, "expected an array of numbers");
      return fallback;
    }
    std::vector<double> out;
    for (const Json& e : *c) {
      if (!e.is_number()) {
        fail(path + "." + key, "expected an array of numbers");
        return fallback;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> string_list(const Json& j, const std::string& path, const char* key,
                                       std::vector<std::string> fallback) {
    const Json* c = child(j, path, key, false);
    if (c == nullptr) return fallback;
    if (!c->is_array()) {
      fail(path + "." + key, "expected an array of strings");
      return fallback;
    }
    std::vector<std::string> out;
    for (const Json& e : *c) {
      if (!e.is_string()) {
        fail(path + "." + key, "expected an array of strings");
        return fallback;
      }
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  catalog::Params params(const Json& j, const std::string& path, const char* key) {
    catalog::Params out;
    const Json* c = child(j, path, key, false);
    if (c == nullptr) return out;
    if (!c->is_object()) {
      fail(path + "." + key, "expected an object of numeric parameters");
      return out;
    }
    for (const auto& [k, v] : c->items()) {
      if (!v.is_number()) {
        fail(path + "." + key + "." + k, "expected a number");
        continue;
      }
      out[k] = v.get<double>();
    }
    return out;
  }

  void check_enum(const std::string& value, const std::vector<std::string>& valid,
                  const std::string& path) {
    if (std::find(valid.begin(), valid.end(), value) != valid.end()) return;
    std::ostringstream msg;
    msg << "unknown value '" << value << "'; valid:";
    for (const std::string& v : valid) msg << " " << v;
    fail(path, msg.str());
  }

 private:
  std::vector<std::string>& violations_;
};

inline SetConfig parse_set(ConfigReader& r, const Json& j, const std::string& path, int depth) {
  SetConfig s;
  if (depth > 4) {
    r.fail(path, "set nesting too deep");
    return s;
  }
  s.shape = r.text(j, path, "shape", "", true);
  r.check_enum(s.shape, {"halfspace", "ball", "box", "intersection"}, path + ".shape");
  if (s.shape == "halfspace") {
    s.normal = r.number_list(j, path, "normal", {}, true);
    s.offset = r.number(j, path, "offset", 0.0, true);
  } else if (s.shape == "ball") {
    s.center = r.number_list(j, path, "center", {}, true);
    s.radius = r.number(j, path, "radius", 1.0, true);
  } else if (s.shape == "box") {
    s.lo = r.number_list(j, path, "lo", {}, true);
    s.hi = r.number_list(j, path, "hi", {}, true);
  } else if (s.shape == "intersection") {
    const Json* members = r.child(j, path, "members", true);
    if (members != nullptr) {
      if (!members->is_array() || members->empty()) {
        r.fail(path + ".members", "expected a nonempty array of sets");
      } else {
        int idx = 0;
        for (const Json& m : *members) {
          s.members.push_back(
              parse_set(r, m, path + ".members[" + std::to_string(idx) + "]", depth + 1));
          ++idx;
        }
      }
    }
  }
  return s;
}

}  // namespace detail

/// Parses and validates a JSON experiment configuration.  Every violation is
/// collected and reported together in the thrown ConfigError; defaults fill
/// omitted optional keys.
[[nodiscard]] inline ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::string> violations;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError({std::string("config: not valid JSON: ") + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"config: top level must be an object"});

  detail::ConfigReader r(violations);
  ExperimentConfig cfg;

  // --- system ---
  const Json* sys = r.child(j, "config", "system", true);
  if (sys != nullptr) {
    cfg.system.dim = static_cast<int>(r.integer(*sys, "system", "dim", 1));
    if (cfg.system.dim < 1 || cfg.system.dim > kMaxDim) {
      r.fail("system.dim", "must be between 1 and " + std::to_string(kMaxDim));
    }
    if (const Json* coeff = r.child(*sys, "system", "coefficients", true)) {
      cfg.system.coefficients = r.text(*coeff, "system.coefficients", "name", "", true);
      cfg.system.params = r.params(*coeff, "system.coefficients", "params");
      const std::vector<std::string> names = catalog::coefficient_names();
      if (!cfg.system.coefficients.empty()) {
        r.check_enum(cfg.system.coefficients, names, "system.coefficients.name");
      }
    }
    if (const Json* op = r.child(*sys, "system", "operator", false)) {
      cfg.system.op.kind = r.text(*op, "system.operator", "kind", "zero");
      r.check_enum(cfg.system.op.kind, {"zero", "normal_cone", "subdifferential", "linear_psd"},
                   "system.operator.kind");
      if (cfg.system.op.kind == "normal_cone") {
        if (const Json* set = r.child(*op, "system.operator", "set", true)) {
          cfg.system.op.set = detail::parse_set(r, *set, "system.operator.set", 0);
        }
      } else if (cfg.system.op.kind == "subdifferential") {
        cfg.system.op.norm = r.text(*op, "system.operator", "norm", "abs_sum");
        r.check_enum(cfg.system.op.norm, {"abs_sum", "norm", "squared_norm"},
                     "system.operator.norm");
        cfg.system.op.weight = r.number(*op, "system.operator", "weight", 1.0);
        if (!(cfg.system.op.weight > 0.0)) {
          r.fail("system.operator.weight", "must be positive");
        }
      } else if (cfg.system.op.kind == "linear_psd") {
        const Json* m = r.child(*op, "system.operator", "matrix", true);
        if (m != nullptr) {
          if (!m->is_array()) {
            r.fail("system.operator.matrix", "expected an array of rows");
          } else {
            for (const Json& row : *m) {
              std::vector<double> rv;
              if (!row.is_array()) {
                r.fail("system.operator.matrix", "expected an array of rows");
                break;
              }
              for (const Json& e : row) {
                if (!e.is_number()) {
                  r.fail("system.operator.matrix", "entries must be numbers");
                  break;
                }
                rv.push_back(e.get<double>());
              }
              cfg.system.op.matrix.push_back(rv);
            }
          }
        }
      }
    }
    if (const Json* jm = r.child(*sys, "system", "jumps", false)) {
      cfg.system.jumps.rate = r.number(*jm, "system.jumps", "rate", 0.0);
      cfg.system.jumps.alpha = r.number(*jm, "system.jumps", "alpha", 1.0);
      cfg.system.jumps.law = r.text(*jm, "system.jumps", "law", "uniform_ball");
      cfg.system.jumps.mark_dim = static_cast<int>(r.integer(*jm, "system.jumps", "mark_dim", 1));
      r.check_enum(cfg.system.jumps.law, {"uniform_ball", "truncated_gaussian"},
                   "system.jumps.law");
      if (cfg.system.jumps.rate < 0.0) r.fail("system.jumps.rate", "must be nonnegative");
      if (cfg.system.jumps.rate > 0.0) {
        if (!(cfg.system.jumps.alpha > 0.0)) r.fail("system.jumps.alpha", "must be positive");
        if (cfg.system.jumps.mark_dim < 1 || cfg.system.jumps.mark_dim > kMaxDim) {
          r.fail("system.jumps.mark_dim", "must be between 1 and " + std::to_string(kMaxDim));
        }
      }
    }
    if (const Json* init = r.child(*sys, "system", "initial", true)) {
      cfg.system.initial.kind = r.text(*init, "system.initial", "kind", "constant");
      r.check_enum(cfg.system.initial.kind, {"constant", "gaussian"}, "system.initial.kind");
      if (cfg.system.initial.kind == "constant") {
        cfg.system.initial.value = r.number_list(*init, "system.initial", "value", {}, true);
        if (!cfg.system.initial.value.empty() &&
            static_cast<int>(cfg.system.initial.value.size()) != cfg.system.dim) {
          r.fail("system.initial.value", "length must equal system.dim");
        }
      } else if (cfg.system.initial.kind == "gaussian") {
        cfg.system.initial.mean = r.number_list(*init, "system.initial", "mean", {}, true);
        cfg.system.initial.std_dev = r.number(*init, "system.initial", "std", 1.0, true);
        if (!cfg.system.initial.mean.empty() &&
            static_cast<int>(cfg.system.initial.mean.size()) != cfg.system.dim) {
          r.fail("system.initial.mean", "length must equal system.dim");
        }
        if (cfg.system.initial.std_dev < 0.0) r.fail("system.initial.std", "must be nonnegative");
      }
    }
    cfg.system.beta = r.number(*sys, "system", "beta", 1.0);
    if (!(cfg.system.beta > 0.0)) r.fail("system.beta", "must be positive");
  }

  // --- solver ---
  const Json* sol = r.child(j, "config", "solver", true);
  if (sol != nullptr) {
    cfg.solver.n_particles = static_cast<int>(r.integer(*sol, "solver", "n_particles", 1000));
    cfg.solver.step = r.number(*sol, "solver", "step", 1e-3, true);
    cfg.solver.horizon = r.number(*sol, "solver", "horizon", 1.0, true);
    cfg.solver.epsilon = r.number_list(*sol, "solver", "epsilon", {1.0});
    cfg.solver.scheme = r.text(*sol, "solver", "scheme", "resolvent_split");
    cfg.solver.yosida_lambda = r.number(*sol, "solver", "yosida_lambda", 1e-2);
    cfg.solver.seed = static_cast<std::uint64_t>(r.integer(*sol, "solver", "seed", 1));
    cfg.solver.threads = static_cast<int>(r.integer(*sol, "solver", "threads", 1));
    cfg.solver.blowup_ceiling = r.number(*sol, "solver", "blowup_ceiling", 1e8);

    if (cfg.solver.n_particles < 1) r.fail("solver.n_particles", "must be at least 1");
    if (!(cfg.solver.step > 0.0)) r.fail("solver.step", "must be positive");
    if (!(cfg.solver.horizon > 0.0)) r.fail("solver.horizon", "must be positive");
    if (cfg.solver.step > 0.0 && cfg.solver.horizon > 0.0) {
      const double ratio = cfg.solver.horizon / cfg.solver.step;
      if (std::abs(ratio - std::llround(ratio)) > 1e-9 * std::max(1.0, ratio)) {
        r.fail("solver.step", "horizon not an integer multiple of step");
      }
    }
    if (cfg.solver.epsilon.empty()) r.fail("solver.epsilon", "must be nonempty");
    for (double e : cfg.solver.epsilon) {
      if (!(e > 0.0)) r.fail("solver.epsilon", "entries must be positive");
    }
    r.check_enum(cfg.solver.scheme, {"resolvent_split", "yosida_explicit"}, "solver.scheme");
    if (!(cfg.solver.yosida_lambda > 0.0)) r.fail("solver.yosida_lambda", "must be positive");
    if (cfg.solver.threads < 1) r.fail("solver.threads", "must be at least 1");
    if (!(cfg.solver.blowup_ceiling > 0.0)) r.fail("solver.blowup_ceiling", "must be positive");
  }

  // --- experiment ---
  const Json* exp = r.child(j, "config", "experiment", true);
  if (exp != nullptr) {
    cfg.experiment.kind = r.text(*exp, "experiment", "kind", "", true);
    r.check_enum(cfg.experiment.kind, {"simulate", "averaging", "stability", "ito_check", "audits"},
                 "experiment.kind");
    if (cfg.experiment.kind == "averaging") {
      cfg.experiment.averaging.delta = r.number(*exp, "experiment", "delta", 0.1);
      if (!(cfg.experiment.averaging.delta > 0.0)) r.fail("experiment.delta", "must be positive");
      for (std::size_t i = 1; i < cfg.solver.epsilon.size(); ++i) {
        if (cfg.solver.epsilon[i] >= cfg.solver.epsilon[i - 1]) {
          r.fail("solver.epsilon", "averaging sweep requires a strictly descending list");
          break;
        }
      }
    } else if (cfg.experiment.kind == "stability") {
      StabilityParams& st = cfg.experiment.stability;
      st.criteria = r.string_list(*exp, "experiment", "criteria", {});
      for (std::size_t i = 0; i < st.criteria.size(); ++i) {
        r.check_enum(st.criteria[i],
                     {"ms_exponential", "ultimate_bound", "as_stability", "lyapunov_audit"},
                     "experiment.criteria[" + std::to_string(i) + "]");
      }
      st.alpha = r.number(*exp, "experiment", "alpha", 1.0);
      st.fit_window_lo = r.number(*exp, "experiment", "fit_window_lo", -1.0);
      st.fit_window_hi = r.number(*exp, "experiment", "fit_window_hi", -1.0);
      st.bound_m = r.number(*exp, "experiment", "bound_m", 1.0);
      st.bound_lambda = r.number(*exp, "experiment", "bound_lambda", 1.0);
      st.bound_w = r.number(*exp, "experiment", "bound_w", 0.0);
      st.delta = r.number(*exp, "experiment", "delta", 1e-3);
      st.tail_start = r.number(*exp, "experiment", "tail_start", -1.0);
      if (const Json* lyap = r.child(*exp, "experiment", "lyapunov", false)) {
        st.lyapunov.name = r.text(*lyap, "experiment.lyapunov", "name", "quadratic");
        st.lyapunov.params = r.params(*lyap, "experiment.lyapunov", "params");
        r.check_enum(st.lyapunov.name, catalog::lyapunov_names(), "experiment.lyapunov.name");
      }
      st.audit_form = r.text(*exp, "experiment", "audit_form", "integrated_decay");
      r.check_enum(st.audit_form, {"integrated_decay", "integrated_bounded", "pointwise"},
                   "experiment.audit_form");
      st.a1 = r.number(*exp, "experiment", "a1", 1.0);
      st.a2 = r.number(*exp, "experiment", "a2", 1.0);
      st.n1 = r.number(*exp, "experiment", "n1", 0.0);
      st.n2 = r.number(*exp, "experiment", "n2", 0.0);
      st.n3 = r.number(*exp, "experiment", "n3", 0.0);
      st.gamma1_scale = r.number(*exp, "experiment", "gamma1_scale", 0.5);
      st.gamma2_scale = r.number(*exp, "experiment", "gamma2_scale", 2.0);
      st.audit_snapshots = static_cast<int>(r.integer(*exp, "experiment", "audit_snapshots", 8));
      if (!(st.gamma1_scale > 0.0) || !(st.gamma2_scale > 0.0)) {
        r.fail("experiment.gamma1_scale", "sandwich moduli scales must be positive");
      }
      if (!(st.alpha > 0.0)) r.fail("experiment.alpha", "must be positive");
      if (!(st.delta > 0.0)) r.fail("experiment.delta", "must be positive");
      if (st.audit_snapshots < 1) r.fail("experiment.audit_snapshots", "must be at least 1");
      if (st.tail_start >= 0.0 && st.tail_start >= cfg.solver.horizon) {
        r.fail("experiment.tail_start", "must lie inside the horizon");
      }
    } else if (cfg.experiment.kind == "ito_check") {
      if (const Json* lyap = r.child(*exp, "experiment", "lyapunov", false)) {
        cfg.experiment.ito.lyapunov.name =
            r.text(*lyap, "experiment.lyapunov", "name", "measure_quadratic");
        cfg.experiment.ito.lyapunov.params = r.params(*lyap, "experiment.lyapunov", "params");
        r.check_enum(cfg.experiment.ito.lyapunov.name, catalog::lyapunov_names(),
                     "experiment.lyapunov.name");
      }
      cfg.experiment.ito.replicates =
          static_cast<int>(r.integer(*exp, "experiment", "replicates", 1));
      cfg.experiment.ito.h_refine = r.boolean(*exp, "experiment", "h_refine", false);
      if (cfg.experiment.ito.replicates < 1) r.fail("experiment.replicates", "must be at least 1");
    } else if (cfg.experiment.kind == "audits") {
      cfg.experiment.audits.pairs = static_cast<int>(r.integer(*exp, "experiment", "pairs", 4096));
      cfg.experiment.audits.samples =
          static_cast<int>(r.integer(*exp, "experiment", "samples", 64));
      cfg.experiment.audits.streams =
          static_cast<int>(r.integer(*exp, "experiment", "streams", 1000));
      if (cfg.experiment.audits.pairs < 1) r.fail("experiment.pairs", "must be at least 1");
      if (cfg.experiment.audits.samples < 1) r.fail("experiment.samples", "must be at least 1");
      if (cfg.experiment.audits.streams < 1) r.fail("experiment.streams", "must be at least 1");
    }
  }

  // --- output ---
  if (const Json* out = r.child(j, "config", "output", false)) {
    cfg.output.directory = r.text(*out, "output", "directory", "out");
    cfg.output.retain_snapshots = r.boolean(*out, "output", "retain_snapshots", false);
    cfg.output.dump_events = r.boolean(*out, "output", "dump_events", false);
  }

  // The almost-sure criterion and the pointwise audit form are stated for
  // non-random initial data; enforce a constant initial law for them.
  if (cfg.experiment.kind == "stability" && cfg.system.initial.kind != "constant") {
    const StabilityParams& st = cfg.experiment.stability;
    const bool wants_as = std::find(st.criteria.begin(), st.criteria.end(), "as_stability") !=
                          st.criteria.end();
    const bool wants_pointwise =
        st.audit_form == "pointwise" &&
        std::find(st.criteria.begin(), st.criteria.end(), "lyapunov_audit") != st.criteria.end();
    if (wants_as || wants_pointwise) {
      r.fail("system.initial.kind",
             "almost-sure and pointwise-audit checks require a constant initial condition");
    }
  }

  // Cross-checks requiring several blocks at once.
  if (violations.empty()) {
    try {
      JumpLaw law = cfg.system.jumps.rate > 0.0
                        ? JumpLaw(cfg.system.jumps.rate, cfg.system.jumps.alpha,
                                  cfg.system.jumps.law == "uniform_ball"
                                      ? MarkLaw::kUniformBall
                                      : MarkLaw::kTruncatedGaussian,
                                  cfg.system.jumps.mark_dim)
                        : JumpLaw::none();
      (void)catalog::make_coefficients(cfg.system.coefficients, cfg.system.params, cfg.system.dim,
                                       law);
    } catch (const Error& e) {
      violations.push_back(std::string("system.coefficients: ") + e.what());
    }
  }

  if (!violations.empty()) throw ConfigError(violations);
  return cfg;
}

// ============================================================================
// Materialization
// ============================================================================

namespace detail {

inline ConvexSet build_set(const SetConfig& s, int dim) {
  const auto vec_of = [dim](const std::vector<double>& v, const char* what) {
    if (static_cast<int>(v.size()) != dim) {
      throw ConfigError({std::string(what) + ": length must equal system.dim"});
    }
    Vec out(dim);
    for (int i = 0; i < dim; ++i) out[i] = v[static_cast<std::size_t>(i)];
    return out;
  };
  if (s.shape == "halfspace") {
    return ConvexSet::halfspace(vec_of(s.normal, "system.operator.set.normal"), s.offset);
  }
  if (s.shape == "ball") {
    return ConvexSet::ball(vec_of(s.center, "system.operator.set.center"), s.radius);
  }
  if (s.shape == "box") {
    return ConvexSet::box(vec_of(s.lo, "system.operator.set.lo"),
                          vec_of(s.hi, "system.operator.set.hi"));
  }
  if (s.shape == "intersection") {
    std::vector<ConvexSet> members;
    members.reserve(s.members.size());
    for (const SetConfig& m : s.members) members.push_back(build_set(m, dim));
    return ConvexSet::intersection(std::move(members));
  }
  throw ConfigError({"system.operator.set.shape: unknown shape '" + s.shape + "'"});
}

}  // namespace detail

[[nodiscard]] inline MonotoneOperator build_operator(const OperatorConfig& op, int dim) {
  if (op.kind == "zero") return MonotoneOperator::zero(dim);
  if (op.kind == "normal_cone") {
    return MonotoneOperator::normal_cone(detail::build_set(op.set, dim));
  }
  if (op.kind == "subdifferential") {
    if (op.norm == "abs_sum") {
      return MonotoneOperator::subdifferential(Subdifferential::Fn::kAbsSum, op.weight, dim);
    }
    if (op.norm == "norm") {
      return MonotoneOperator::subdifferential(Subdifferential::Fn::kNorm, op.weight, dim);
    }
    return MonotoneOperator::subdifferential(Subdifferential::Fn::kSquaredNorm, op.weight, dim);
  }
  if (op.kind == "linear_psd") {
    if (static_cast<int>(op.matrix.size()) != dim) {
      throw ConfigError({"system.operator.matrix: must be dim x dim"});
    }
    Mat m(dim, dim);
    for (int i = 0; i < dim; ++i) {
      if (static_cast<int>(op.matrix[static_cast<std::size_t>(i)].size()) != dim) {
        throw ConfigError({"system.operator.matrix: must be dim x dim"});
      }
      for (int k = 0; k < dim; ++k) m(i, k) = op.matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    return MonotoneOperator::linear_psd(m);
  }
  throw ConfigError({"system.operator.kind: unknown kind '" + op.kind + "'"});
}

[[nodiscard]] inline JumpLaw build_jump_law(const JumpConfig& jumps) {
  if (jumps.rate <= 0.0) return JumpLaw::none();
  return JumpLaw(jumps.rate, jumps.alpha,
                 jumps.law == "uniform_ball" ? MarkLaw::kUniformBall : MarkLaw::kTruncatedGaussian,
                 jumps.mark_dim);
}

[[nodiscard]] inline CoefficientSet build_coefficients(const SystemConfig& sys) {
  CoefficientSet c =
      catalog::make_coefficients(sys.coefficients, sys.params, sys.dim, build_jump_law(sys.jumps));
  c.beta = sys.beta;
  return c;
}

/// Draws the initial particle block (flat layout) from the configured law.
[[nodiscard]] inline std::vector<double> build_initial_states(const SystemConfig& sys,
                                                              int n_particles,
                                                              std::uint64_t seed) {
  std::vector<double> states(static_cast<std::size_t>(n_particles) * sys.dim);
  if (sys.initial.kind == "constant") {
    if (static_cast<int>(sys.initial.value.size()) != sys.dim) {
      throw ConfigError({"system.initial.value: length must equal system.dim"});
    }
    for (int i = 0; i < n_particles; ++i) {
      for (int d = 0; d < sys.dim; ++d) {
        states[static_cast<std::size_t>(i) * sys.dim + d] =
            sys.initial.value[static_cast<std::size_t>(d)];
      }
    }
    return states;
  }
  if (static_cast<int>(sys.initial.mean.size()) != sys.dim) {
    throw ConfigError({"system.initial.mean: length must equal system.dim"});
  }
  for (int i = 0; i < n_particles; ++i) {
    CounterStream stream(seed, static_cast<std::uint64_t>(i), 0, StreamPurpose::kInitial);
    for (int d = 0; d < sys.dim; ++d) {
      states[static_cast<std::size_t>(i) * sys.dim + d] =
          sys.initial.mean[static_cast<std::size_t>(d)] + sys.initial.std_dev * stream.gaussian();
    }
  }
  return states;
}

[[nodiscard]] inline SolverConfig build_solver_config(const ExperimentConfig& cfg,
                                                      double epsilon) {
  SolverConfig sc;
  sc.n_particles = cfg.solver.n_particles;
  sc.step = cfg.solver.step;
  sc.horizon = cfg.solver.horizon;
  sc.epsilon = epsilon;
  sc.scheme = cfg.solver.scheme == "yosida_explicit" ? Scheme::kYosidaExplicit
                                                     : Scheme::kResolventSplit;
  sc.yosida_lambda = cfg.solver.yosida_lambda;
  sc.seed = cfg.solver.seed;
  sc.blowup_ceiling = cfg.solver.blowup_ceiling;
  sc.threads = cfg.solver.threads;
  return sc;
}

}  // namespace mvsde
