#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

/// Shared scalar/vector types and error taxonomy for the mvsde library.
///
/// State dimensions are small in every supported system, so vectors and
/// matrices are dynamically sized with a fixed compile-time capacity.  That
/// keeps value semantics (no aliasing surprises in particle loops) while
/// avoiding heap traffic in the hot path.
namespace mvsde {

/// Maximum supported state / driving-noise / mark dimension.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

// ============================================================================
// Error taxonomy
// ============================================================================

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed argument values (non-finite input, bad dimensions, bad ranges).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// An iterative routine exhausted its budget without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A constraint set turned out to be empty (or numerically infeasible).
class InfeasibleSetError : public Error {
 public:
  using Error::Error;
};

/// A required callback or feature was not supplied by the caller.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A simulated particle left the configured safety region.
class BlowUpError : public Error {
 public:
  using Error::Error;
};

/// Configuration file problems; carries the full list of violations.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::vector<std::string> violations)
      : Error(what), violations_(std::move(violations)) {}
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  [[nodiscard]] const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& violations) {
    std::string out = "invalid configuration";
    for (const std::string& v : violations) out += "; " + v;
    return out;
  }

  std::vector<std::string> violations_;
};

// ============================================================================
// Small shared utilities
// ============================================================================

/// Throws InvalidInputError when any coefficient of `v` is not finite.
inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw InvalidInputError(std::string(what) + ": non-finite value");
}

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw InvalidInputError(std::string(what) + ": non-finite value");
}

/// Runs `body(begin, end)` over a static partition of [0, n).
///
/// Every index is processed by exactly one invocation and all writes made by
/// `body` must target index-owned slots; reductions belong after the join.
/// Results are therefore identical for every thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 1 || n < 2) {
    body(0, n);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  const std::size_t chunk = (n + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

/// Mean and standard error of the mean over a sample.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  const std::size_t n = xs.size();
  if (n == 0) return out;
  long double acc = 0.0L;
  for (double x : xs) acc += x;
  out.mean = static_cast<double>(acc / static_cast<long double>(n));
  if (n < 2) return out;
  long double ss = 0.0L;
  for (double x : xs) {
    const long double d = x - out.mean;
    ss += d * d;
  }
  const double var = static_cast<double>(ss / static_cast<long double>(n - 1));
  out.se = std::sqrt(var / static_cast<double>(n));
  return out;
}

}  // namespace mvsde
