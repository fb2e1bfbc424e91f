#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mvsde/core.hpp"

/// Empirical measures over particle ensembles and the distances between them.
namespace mvsde {

/// An immutable snapshot of N weighted-equally particle positions in R^d.
///
/// Mean and second moment are cached at construction: mean-field coefficient
/// evaluations read them once per particle, so the snapshot is built once per
/// solver step and shared across the ensemble.
class EmpiricalMeasure {
 public:
  /// Takes ownership of a flat row-major (n x dim) coordinate array.
  EmpiricalMeasure(std::vector<double> flat, int dim) : flat_(std::move(flat)), dim_(dim) {
    if (dim_ < 1 || dim_ > kMaxDim) throw InvalidInputError("measure dimension out of range");
    if (flat_.empty() || flat_.size() % static_cast<std::size_t>(dim_) != 0) {
      throw InvalidInputError("measure coordinate array size is not a multiple of the dimension");
    }
    n_ = static_cast<int>(flat_.size() / static_cast<std::size_t>(dim_));
    mean_ = Vec::Zero(dim_);
    long double m2 = 0.0L;
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < dim_; ++k) {
        const double v = flat_[static_cast<std::size_t>(i) * dim_ + k];
        if (!std::isfinite(v)) throw InvalidInputError("measure coordinate is not finite");
        mean_[k] += v;
        m2 += static_cast<long double>(v) * v;
      }
    }
    mean_ /= static_cast<double>(n_);
    second_moment_ = static_cast<double>(m2 / n_);
  }

  static EmpiricalMeasure from_points(const std::vector<Vec>& points) {
    if (points.empty()) throw InvalidInputError("measure needs at least one particle");
    const int d = static_cast<int>(points.front().size());
    std::vector<double> flat;
    flat.reserve(points.size() * static_cast<std::size_t>(d));
    for (const Vec& p : points) {
      if (p.size() != d) throw InvalidInputError("measure points disagree in dimension");
      for (int k = 0; k < d; ++k) flat.push_back(p[k]);
    }
    return EmpiricalMeasure(std::move(flat), d);
  }

  /// Point mass at x, replicated n times (so equal-size metrics apply).
  static EmpiricalMeasure dirac(const Vec& x, int n = 1) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(n) * x.size());
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < x.size(); ++k) flat.push_back(x[k]);
    }
    return EmpiricalMeasure(std::move(flat), static_cast<int>(x.size()));
  }

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const Vec& mean() const { return mean_; }

  /// (1/N) sum_i |x_i|^2; the squared measure norm used in growth bounds.
  [[nodiscard]] double second_moment() const { return second_moment_; }

  [[nodiscard]] Vec point(int i) const {
    Vec out(dim_);
    for (int k = 0; k < dim_; ++k) out[k] = flat_[static_cast<std::size_t>(i) * dim_ + k];
    return out;
  }

  [[nodiscard]] const std::vector<double>& flat() const { return flat_; }

 private:
  std::vector<double> flat_;
  int dim_ = 0;
  int n_ = 0;
  Vec mean_;
  double second_moment_ = 0.0;
};

/// Root mean square distance under the index coupling: the two ensembles must
/// pair particle i with particle i (shared-noise couplings do exactly that).
/// This dominates every optimal-transport distance of order two.
[[nodiscard]] inline double coupled_rms_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size()) throw InvalidInputError("coupled distance needs equal particle counts");
  if (mu.dim() != nu.dim()) throw InvalidInputError("coupled distance needs equal dimensions");
  long double acc = 0.0L;
  const std::size_t total = mu.flat().size();
  for (std::size_t j = 0; j < total; ++j) {
    const long double d = mu.flat()[j] - nu.flat()[j];
    acc += d * d;
  }
  return std::sqrt(static_cast<double>(acc / mu.size()));
}

/// Exact second-order Wasserstein distance between two one-dimensional
/// ensembles of equal size, via sorted order statistics.
[[nodiscard]] inline double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != 1 || nu.dim() != 1) {
    throw InvalidInputError("exact transport distance is implemented for dimension one only");
  }
  if (mu.size() != nu.size()) throw InvalidInputError("transport distance needs equal particle counts");
  std::vector<double> a = mu.flat();
  std::vector<double> b = nu.flat();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(static_cast<double>(acc / a.size()));
}

}  // namespace mvsde
