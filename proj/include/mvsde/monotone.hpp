#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mvsde/core.hpp"

/// Maximal monotone operators and the convex geometry they act on.
///
/// The operator catalog is closed: the zero operator, normal cones of convex
/// sets, subdifferentials of a small family of convex functions, and linear
/// positive-semidefinite maps.  Each kind has an exact resolvent, which is
/// what the solver steps through; no general variational solver is involved.
namespace mvsde {

class ConvexSet;

// ============================================================================
// Convex sets
// ============================================================================

/// Closed halfspace {x : <normal, x> >= offset}; the normal is stored unit.
struct Halfspace {
  Vec normal;
  double offset = 0.0;
};

struct Ball {
  Vec center;
  double radius = 0.0;
};

/// Axis-aligned box [lo, hi]; lo < hi componentwise.
struct Box {
  Vec lo;
  Vec hi;
};

/// Intersection of finitely many sets; projected via Dykstra's algorithm.
struct SetIntersection {
  std::vector<ConvexSet> members;
};

/// A closed convex set with nonempty interior and an exact (or Dykstra)
/// projection.  Construction validates the geometry; an empty intersection is
/// rejected by a feasibility probe.
class ConvexSet {
 public:
  using Shape = std::variant<Halfspace, Ball, Box, SetIntersection>;

  static ConvexSet halfspace(Vec normal, double offset) {
    require_finite(normal, "halfspace normal");
    require_finite(offset, "halfspace offset");
    const double len = normal.norm();
    if (len <= 0.0) throw InvalidInputError("halfspace normal must be nonzero");
    Halfspace h{normal / len, offset / len};
    return ConvexSet(Shape(std::move(h)), static_cast<int>(normal.size()));
  }

  static ConvexSet ball(Vec center, double radius) {
    require_finite(center, "ball center");
    require_finite(radius, "ball radius");
    if (radius <= 0.0) throw InvalidInputError("ball radius must be positive");
    const int d = static_cast<int>(center.size());
    return ConvexSet(Shape(Ball{std::move(center), radius}), d);
  }

  static ConvexSet box(Vec lo, Vec hi) {
    require_finite(lo, "box lower corner");
    require_finite(hi, "box upper corner");
    if (lo.size() != hi.size()) throw InvalidInputError("box corners disagree in dimension");
    for (int i = 0; i < lo.size(); ++i) {
      if (!(lo[i] < hi[i])) throw InvalidInputError("box requires lo < hi componentwise");
    }
    const int d = static_cast<int>(lo.size());
    return ConvexSet(Shape(Box{std::move(lo), std::move(hi)}), d);
  }

  /// Intersection of `members` (all of one dimension).  A Dykstra feasibility
  /// probe runs at construction and throws InfeasibleSetError when the
  /// members have no common point.
  static ConvexSet intersection(std::vector<ConvexSet> members);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const Shape& shape() const { return shape_; }

 private:
  ConvexSet(Shape shape, int dim) : shape_(std::move(shape)), dim_(dim) {}

  Shape shape_;
  int dim_ = 0;
};

/// Euclidean projection of `y` onto `set`.
///
/// Primitive shapes project in closed form.  Intersections run Dykstra's
/// alternating projections to their floating-point fixpoint (the iteration
/// stops once the per-cycle change stalls at the rounding floor while the
/// iterate is feasible to 1e-10), and throw ConvergenceError on a feasible
/// problem that exhausts the cycle budget or InfeasibleSetError when the
/// residual indicates an empty intersection.
[[nodiscard]] Vec project(const ConvexSet& set, const Vec& y);

/// Membership test with additive tolerance `tol` on each defining inequality.
[[nodiscard]] bool contains(const ConvexSet& set, const Vec& x, double tol = 1e-10);

namespace detail {

inline Vec project_primitive(const ConvexSet::Shape& shape, const Vec& y);

inline Vec project_dykstra(const SetIntersection& inter, const Vec& y) {
  constexpr int kMaxCycles = 100000;
  constexpr double kFeasTol = 1e-10;
  const std::size_t m = inter.members.size();
  Vec x = y;
  std::vector<Vec> corrections(m, Vec::Zero(y.size()));
  double best_residual = std::numeric_limits<double>::infinity();
  double prev_change = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
    const Vec x_prev = x;
    for (std::size_t j = 0; j < m; ++j) {
      const Vec target = x + corrections[j];
      const Vec projected = project(inter.members[j], target);
      corrections[j] = target - projected;
      x = projected;
    }
    double residual = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      residual = std::max(residual, (x - project(inter.members[j], x)).norm());
    }
    best_residual = std::min(best_residual, residual);
    const double change = (x - x_prev).norm();
    if (residual <= kFeasTol) {
      // Run the geometric phase out completely: accept only once the
      // per-cycle change hits the rounding floor and stops shrinking, so
      // the returned point is the iteration's floating-point fixpoint.
      if (change == 0.0) return x;
      stalled = change < 0.999 * prev_change ? 0 : stalled + 1;
      if (stalled >= 8 && change <= kFeasTol * (1.0 + x.norm())) return x;
    }
    prev_change = change;
  }
  if (best_residual > 1e-6) {
    throw InfeasibleSetError("intersection appears empty (member distance " + std::to_string(best_residual) + ")");
  }
  throw ConvergenceError("Dykstra projection exhausted its cycle budget");
}

inline Vec project_primitive(const ConvexSet::Shape& shape, const Vec& y) {
  if (const auto* h = std::get_if<Halfspace>(&shape)) {
    const double slack = h->normal.dot(y) - h->offset;
    if (slack >= 0.0) return y;
    return y - slack * h->normal;
  }
  if (const auto* b = std::get_if<Ball>(&shape)) {
    const Vec r = y - b->center;
    const double len = r.norm();
    if (len <= b->radius) return y;
    return b->center + (b->radius / len) * r;
  }
  if (const auto* bx = std::get_if<Box>(&shape)) {
    Vec out = y;
    for (int i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], bx->lo[i], bx->hi[i]);
    return out;
  }
  return project_dykstra(std::get<SetIntersection>(shape), y);
}

}  // namespace detail

inline Vec project(const ConvexSet& set, const Vec& y) {
  require_finite(y, "projection input");
  if (y.size() != set.dim()) throw InvalidInputError("projection input dimension mismatch");
  return detail::project_primitive(set.shape(), y);
}

inline bool contains(const ConvexSet& set, const Vec& x, double tol) {
  if (x.size() != set.dim()) throw InvalidInputError("membership input dimension mismatch");
  if (const auto* h = std::get_if<Halfspace>(&set.shape())) {
    return h->normal.dot(x) >= h->offset - tol;
  }
  if (const auto* b = std::get_if<Ball>(&set.shape())) {
    return (x - b->center).norm() <= b->radius + tol;
  }
  if (const auto* bx = std::get_if<Box>(&set.shape())) {
    for (int i = 0; i < x.size(); ++i) {
      if (x[i] < bx->lo[i] - tol || x[i] > bx->hi[i] + tol) return false;
    }
    return true;
  }
  const auto& inter = std::get<SetIntersection>(set.shape());
  for (const auto& member : inter.members) {
    if (!contains(member, x, tol)) return false;
  }
  return true;
}

inline ConvexSet ConvexSet::intersection(std::vector<ConvexSet> members) {
  if (members.empty()) throw InvalidInputError("intersection needs at least one member");
  const int d = members.front().dim();
  for (const auto& s : members) {
    if (s.dim() != d) throw InvalidInputError("intersection members disagree in dimension");
  }
  ConvexSet out(Shape(SetIntersection{std::move(members)}), d);
  (void)project(out, Vec::Zero(d));  // feasibility probe; throws when empty
  return out;
}

// ============================================================================
// Monotone operators
// ============================================================================

/// The single-valued zero operator; its resolvent is the identity.
struct ZeroOperator {};

/// Normal cone of a convex set; resolvent is the projection for every
/// resolvent parameter.
struct NormalCone {
  ConvexSet set;
};

/// Subdifferential of one of a closed family of convex functions, each with
/// an exact proximal map.
struct Subdifferential {
  enum class Fn {
    kAbsSum,       ///< weight * sum_i |x_i|
    kNorm,         ///< weight * |x|
    kSquaredNorm,  ///< (weight / 2) * |x|^2
  };
  Fn fn = Fn::kAbsSum;
  double weight = 1.0;
};

/// x -> M x with M symmetric positive semidefinite.
struct LinearPsd {
  Mat m;
};

/// A maximal monotone operator from the closed catalog above.
class MonotoneOperator {
 public:
  using Kind = std::variant<ZeroOperator, NormalCone, Subdifferential, LinearPsd>;

  static MonotoneOperator zero(int dim) {
    if (dim < 1 || dim > kMaxDim) throw InvalidInputError("operator dimension out of range");
    return MonotoneOperator(Kind(ZeroOperator{}), dim);
  }

  static MonotoneOperator normal_cone(ConvexSet set) {
    const int d = set.dim();
    return MonotoneOperator(Kind(NormalCone{std::move(set)}), d);
  }

  static MonotoneOperator subdifferential(Subdifferential::Fn fn, double weight, int dim) {
    require_finite(weight, "subdifferential weight");
    if (weight < 0.0) throw InvalidInputError("subdifferential weight must be nonnegative");
    if (dim < 1 || dim > kMaxDim) throw InvalidInputError("operator dimension out of range");
    return MonotoneOperator(Kind(Subdifferential{fn, weight}), dim);
  }

  /// Validates symmetry and positive semidefiniteness of `m`; the stored
  /// matrix is the symmetrized copy.
  static MonotoneOperator linear_psd(Mat m) {
    if (m.rows() != m.cols()) throw InvalidInputError("linear operator matrix must be square");
    if (!m.allFinite()) throw InvalidInputError("linear operator matrix has non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
      throw InvalidInputError("linear operator matrix must be symmetric");
    }
    Mat sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw InvalidInputError("linear operator matrix must be positive semidefinite");
    }
    const int d = static_cast<int>(sym.rows());
    return MonotoneOperator(Kind(LinearPsd{std::move(sym)}), d);
  }

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const Kind& kind() const { return kind_; }
  [[nodiscard]] bool is_zero() const { return std::holds_alternative<ZeroOperator>(kind_); }

 private:
  MonotoneOperator(Kind kind, int dim) : kind_(std::move(kind)), dim_(dim) {}

  Kind kind_;
  int dim_ = 0;
};

/// Resolvent (I + lambda * A)^{-1} applied to `x`; exact for every catalog
/// kind.  Requires lambda > 0.
[[nodiscard]] inline Vec resolvent(const MonotoneOperator& op, double lambda, const Vec& x) {
  require_finite(x, "resolvent input");
  require_finite(lambda, "resolvent parameter");
  if (lambda <= 0.0) throw InvalidInputError("resolvent parameter must be positive");
  if (x.size() != op.dim()) throw InvalidInputError("resolvent input dimension mismatch");
  if (std::holds_alternative<ZeroOperator>(op.kind())) return x;
  if (const auto* nc = std::get_if<NormalCone>(&op.kind())) return project(nc->set, x);
  if (const auto* sd = std::get_if<Subdifferential>(&op.kind())) {
    const double w = lambda * sd->weight;
    switch (sd->fn) {
      case Subdifferential::Fn::kAbsSum: {
        Vec out = x;
        for (int i = 0; i < out.size(); ++i) {
          const double mag = std::abs(out[i]) - w;
          out[i] = mag > 0.0 ? std::copysign(mag, out[i]) : 0.0;
        }
        return out;
      }
      case Subdifferential::Fn::kNorm: {
        const double len = x.norm();
        if (len <= w) return Vec::Zero(x.size());
        return (1.0 - w / len) * x;
      }
      case Subdifferential::Fn::kSquaredNorm:
        return x / (1.0 + w);
    }
  }
  const auto& lin = std::get<LinearPsd>(op.kind());
  Mat sys = Mat::Identity(op.dim(), op.dim()) + lambda * lin.m;
  return sys.llt().solve(x);
}

/// Yosida approximation A_lambda(x) = (x - J_lambda(x)) / lambda.
[[nodiscard]] inline Vec yosida(const MonotoneOperator& op, double lambda, const Vec& x) {
  return (x - resolvent(op, lambda, x)) / lambda;
}

/// Minimal section: the least-norm element of A(x), or nullopt when x lies
/// outside the operator domain (the value is then conventionally infinite).
[[nodiscard]] inline std::optional<Vec> minimal_section(const MonotoneOperator& op, const Vec& x) {
  require_finite(x, "minimal section input");
  if (x.size() != op.dim()) throw InvalidInputError("minimal section input dimension mismatch");
  if (std::holds_alternative<ZeroOperator>(op.kind())) return Vec(Vec::Zero(x.size()));
  if (const auto* nc = std::get_if<NormalCone>(&op.kind())) {
    if (!contains(nc->set, x, 1e-9)) return std::nullopt;
    return Vec(Vec::Zero(x.size()));  // every normal cone contains the origin
  }
  if (const auto* sd = std::get_if<Subdifferential>(&op.kind())) {
    switch (sd->fn) {
      case Subdifferential::Fn::kAbsSum: {
        Vec out(x.size());
        for (int i = 0; i < x.size(); ++i) {
          out[i] = x[i] > 0.0 ? sd->weight : (x[i] < 0.0 ? -sd->weight : 0.0);
        }
        return out;
      }
      case Subdifferential::Fn::kNorm: {
        const double len = x.norm();
        if (len == 0.0) return Vec(Vec::Zero(x.size()));
        return Vec((sd->weight / len) * x);
      }
      case Subdifferential::Fn::kSquaredNorm:
        return Vec(sd->weight * x);
    }
  }
  return Vec(std::get<LinearPsd>(op.kind()).m * x);
}

/// Sampled monotonicity audit over graph pairs obtained through the Yosida
/// surrogate at a small parameter: (J_lambda x, A_lambda x) lies on the
/// operator graph exactly, so each sampled pair must satisfy
/// <x - x', y - y'> >= 0 up to tolerance.
struct MonotonicityReport {
  double min_inner_product = 0.0;
  int violations = 0;
  int pairs = 0;
};

[[nodiscard]] inline MonotonicityReport audit_monotonicity(const MonotoneOperator& op,
                                                           const std::function<Vec()>& sampler, int pairs,
                                                           double lambda = 1e-3, double tol = 1e-12) {
  if (pairs < 1) throw InvalidInputError("monotonicity audit needs at least one pair");
  if (lambda <= 0.0) throw InvalidInputError("monotonicity audit lambda must be positive");
  MonotonicityReport report;
  report.pairs = pairs;
  report.min_inner_product = std::numeric_limits<double>::infinity();
  for (int i = 0; i < pairs; ++i) {
    const Vec xa = sampler();
    const Vec xb = sampler();
    const Vec ja = resolvent(op, lambda, xa);
    const Vec jb = resolvent(op, lambda, xb);
    const Vec ya = (xa - ja) / lambda;
    const Vec yb = (xb - jb) / lambda;
    const double ip = (ja - jb).dot(ya - yb);
    report.min_inner_product = std::min(report.min_inner_product, ip);
    if (ip < -tol) ++report.violations;
  }
  return report;
}

}  // namespace mvsde
