#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mvsde/core.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/rng.hpp"

using namespace mvsde;

namespace {

Vec scalar(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

EmpiricalMeasure cloud_1d(const std::vector<double>& xs) { return EmpiricalMeasure(xs, 1); }

EmpiricalMeasure random_cloud(int n, std::uint64_t seed) {
  std::vector<double> flat(n);
  CounterStream stream(seed, 0, 0, StreamPurpose::kAudit);
  for (double& x : flat) x = stream.gaussian();
  return cloud_1d(flat);
}

// Brute-force transport cost for two-particle ensembles: the optimum over the
// only two couplings available.
double w2_two_points(double a0, double a1, double b0, double b1) {
  const double straight = 0.5 * ((a0 - b0) * (a0 - b0) + (a1 - b1) * (a1 - b1));
  const double crossed = 0.5 * ((a0 - b1) * (a0 - b1) + (a1 - b0) * (a1 - b0));
  return std::sqrt(std::min(straight, crossed));
}

}  // namespace

TEST_CASE("cached statistics match direct evaluation") {
  CHECK(EmpiricalMeasure::dirac(scalar(0.0)).second_moment() == 0.0);

  Vec p(2);
  p << 3.0, 4.0;
  const EmpiricalMeasure point_mass = EmpiricalMeasure::dirac(p, 5);
  CHECK(point_mass.size() == 5);
  CHECK(point_mass.second_moment() == Catch::Approx(25.0));
  CHECK((point_mass.mean() - p).norm() == 0.0);

  const EmpiricalMeasure pair = cloud_1d({-1.0, 1.0});
  CHECK(pair.second_moment() == Catch::Approx(1.0));
  CHECK(pair.mean()[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(pair.point(0)[0] == -1.0);
  CHECK(pair.point(1)[0] == 1.0);
}

TEST_CASE("measure construction validates its input") {
  CHECK_THROWS_AS(EmpiricalMeasure(std::vector<double>{}, 1), InvalidInputError);
  CHECK_THROWS_AS(EmpiricalMeasure(std::vector<double>{1.0, 2.0, 3.0}, 2), InvalidInputError);
  CHECK_THROWS_AS(EmpiricalMeasure(std::vector<double>{std::nan("")}, 1), InvalidInputError);
  CHECK_THROWS_AS(EmpiricalMeasure::from_points({}), InvalidInputError);
}

TEST_CASE("index-coupled distance matches hand values") {
  const EmpiricalMeasure a = cloud_1d({0.0, 2.0});
  const EmpiricalMeasure b = cloud_1d({1.0, 3.0});
  CHECK(coupled_rms_distance(a, a) == 0.0);
  CHECK(coupled_rms_distance(a, b) == Catch::Approx(1.0));
  CHECK(coupled_rms_distance(cloud_1d({0.5}), cloud_1d({-1.5})) == Catch::Approx(2.0));
  CHECK_THROWS_AS(coupled_rms_distance(a, cloud_1d({1.0})), InvalidInputError);
}

TEST_CASE("one-dimensional transport distance matches hand values") {
  CHECK(wasserstein2_1d(cloud_1d({0.7}), cloud_1d({0.7})) == 0.0);
  CHECK(wasserstein2_1d(cloud_1d({0.0}), cloud_1d({-2.5})) == Catch::Approx(2.5));
  // Sorted matching pairs 0-1 and 2-3 regardless of input order.
  CHECK(wasserstein2_1d(cloud_1d({2.0, 0.0}), cloud_1d({1.0, 3.0})) == Catch::Approx(1.0));

  Vec p2(2);
  p2 << 0.0, 0.0;
  const EmpiricalMeasure planar = EmpiricalMeasure::dirac(p2);
  CHECK_THROWS_AS(wasserstein2_1d(planar, planar), InvalidInputError);
}

TEST_CASE("transport distance agrees with the brute-force two-point optimum") {
  CounterStream stream(77, 0, 0, StreamPurpose::kAudit);
  for (int trial = 0; trial < 200; ++trial) {
    const double a0 = stream.gaussian(), a1 = stream.gaussian();
    const double b0 = stream.gaussian(), b1 = stream.gaussian();
    const double exact = w2_two_points(a0, a1, b0, b1);
    const double computed = wasserstein2_1d(cloud_1d({a0, a1}), cloud_1d({b0, b1}));
    REQUIRE(computed == Catch::Approx(exact).margin(1e-12));
  }
}

TEST_CASE("transport distance is a metric on sampled clouds") {
  const int n = 32;
  const EmpiricalMeasure a = random_cloud(n, 1);
  const EmpiricalMeasure b = random_cloud(n, 2);
  const EmpiricalMeasure c = random_cloud(n, 3);
  const double ab = wasserstein2_1d(a, b);
  const double ba = wasserstein2_1d(b, a);
  const double bc = wasserstein2_1d(b, c);
  const double ac = wasserstein2_1d(a, c);
  CHECK(std::abs(ab - ba) <= 1e-12);
  CHECK(ac <= ab + bc + 1e-12);
  CHECK(wasserstein2_1d(a, a) <= 1e-12);
}

TEST_CASE("index coupling dominates optimal transport") {
  for (std::uint64_t seed = 10; seed < 40; ++seed) {
    const EmpiricalMeasure a = random_cloud(16, seed);
    const EmpiricalMeasure b = random_cloud(16, seed + 100);
    REQUIRE(wasserstein2_1d(a, b) <= coupled_rms_distance(a, b) + 1e-12);
  }
}

TEST_CASE("second moment is the squared transport distance to the origin mass") {
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const EmpiricalMeasure a = random_cloud(25, seed);
    const EmpiricalMeasure zero = EmpiricalMeasure::dirac(scalar(0.0), 25);
    const double w = wasserstein2_1d(a, zero);
    REQUIRE(w * w == Catch::Approx(a.second_moment()).margin(1e-12));
  }
}
