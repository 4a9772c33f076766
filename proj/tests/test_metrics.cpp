#include <doctest.h>

#include "dataengine/errors.hpp"
#include "dataengine/metrics.hpp"
#include "support.hpp"

using namespace dataengine;
using testing::brute_adi;
using testing::point_model;
using testing::random_pose;

namespace {

const ObjectModel& cylinder() {
  static const ObjectModel m = sample_cylinder_model(5.0, 61.0);
  return m;
}

// Small cylinder so the brute-force oracle stays cheap.
const ObjectModel& small_cylinder() {
  static const ObjectModel m = sample_cylinder_model(5.0, 40.0, 400, 11);
  return m;
}

}  // namespace

TEST_CASE("nn_distances") {
  Rng rng(1);
  PointCloud a, b;
  for (int i = 0; i < 500; ++i) {
    a.points.push_back(testing::random_vec(rng, 50));
    b.points.push_back(testing::random_vec(rng, 50));
  }
  for (double d : nn_distances(a, a)) CHECK(d == 0.0);

  PointCloud single;
  single.points = {Vec3(1, 2, 3)};
  const auto to_single = nn_distances(a, single);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_single[i] == (a.points[i] - Vec3(1, 2, 3)).norm());
  }

  const auto fast = nn_distances(a, b);
  const auto slow = nn_distances_brute_force(a, b);
  REQUIRE(fast.size() == slow.size());
  for (std::size_t i = 0; i < fast.size(); ++i) CHECK(std::abs(fast[i] - slow[i]) <= 1e-9);

  CHECK_THROWS_AS(nn_distances(a, PointCloud{}), InvalidArgument);
  CHECK_THROWS_AS(nn_distances_brute_force(a, PointCloud{}), InvalidArgument);
  CHECK(nn_distances(PointCloud{}, b).empty());
}

TEST_CASE("e_adi basic values") {
  Rng rng(2);
  const Pose p = random_pose(rng, 500);
  CHECK(e_adi(cylinder(), p, p) == 0.0);

  const ObjectModel dot = point_model({Vec3::Zero()});
  CHECK(e_adi(dot, Pose::identity(), Pose::from_translation({3, 0, 0})) == 3.0);
  CHECK(e_adi(dot, Pose::from_translation({0, 0, 1}), Pose::from_translation({0, 4, 1})) == 4.0);
}

TEST_CASE("e_adi matches the brute-force oracle") {
  Rng rng(3);
  const ObjectModel& m = small_cylinder();
  for (int i = 0; i < 20; ++i) {
    const Pose a = random_pose(rng, 20);
    const Pose b = i % 2 ? random_pose(rng, 20) : a * Pose::from_axis_angle(Vec3::UnitZ(), 37.0 * i);
    CHECK(std::abs(e_adi(m, a, b) - brute_adi(m.points(), a, b)) <= 1e-9);
  }
}

TEST_CASE("e_adi under spin about the part axis stays within sampling tolerance") {
  const ObjectModel& m = small_cylinder();
  const double tol = 2.0 * m.sampling_resolution();
  for (int k = 0; k < 36; ++k) {
    const Pose spun = Pose::from_axis_angle(Vec3::UnitZ(), 10.0 * k);
    const double oracle = brute_adi(m.points(), Pose::identity(), spun);
    CHECK(oracle <= tol);
    CHECK(e_adi(m, Pose::identity(), spun) <= tol);
  }
}

TEST_CASE("e_adi is non-negative and left-invariant") {
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const Pose a = random_pose(rng, 30), b = random_pose(rng, 30), g = random_pose(rng, 800);
    const double e = e_adi(cylinder(), a, b);
    CHECK(e >= 0.0);
    CHECK(std::abs(e_adi(cylinder(), g * a, g * b) - e) <= 1e-9);
  }
}

TEST_CASE("e_adi_at_least agrees with e_adi") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng, 10);
    const Pose b = i % 3 == 0 ? a : random_pose(rng, 10);
    const double e = e_adi(cylinder(), a, b);
    for (double bound : {0.0, 0.5 * e, e, 2.0, 10.0, 1e6}) {
      CHECK(e_adi_at_least(cylinder(), a, b, bound) == (e >= bound));
    }
  }
}

TEST_CASE("normalize_flip") {
  const Pose expected = Pose::from_translation({0, 0, 600});
  const Pose ten = expected * Pose::from_axis_angle(Vec3::UnitX(), 10.0);
  FlipNormalized n = normalize_flip(expected, ten, 90.0);
  CHECK_FALSE(n.flipped);
  CHECK(n.expected == expected);
  CHECK(n.found == ten);

  n = normalize_flip(expected, flip_y(expected), 90.0);
  CHECK(n.flipped);
  CHECK(angular_error_z(n.expected, n.found) == 0.0);

  n = normalize_flip(expected, expected * Pose::from_axis_angle(Vec3::UnitX(), 91.0), 90.0);
  CHECK(n.flipped);
  n = normalize_flip(expected, expected * Pose::from_axis_angle(Vec3::UnitX(), 90.0), 90.0);
  CHECK_FALSE(n.flipped);
  // The measurement is never altered.
  CHECK(n.found == expected * Pose::from_axis_angle(Vec3::UnitX(), 90.0));
}

TEST_CASE("verify on constructed errors") {
  // Single point: e_adi is the translation offset, e_theta the tilt.
  const ObjectModel dot = point_model({Vec3::Zero()});
  const auto found = [](double mm, double deg) {
    return Pose::from_axis_angle(Vec3::UnitX(), deg, Vec3(mm, 0, 0));
  };
  VerificationResult r = verify(dot, Pose::identity(), found(1.5, 10));
  CHECK(r.is_tp);
  CHECK(r.e_adi == 1.5);
  CHECK(r.e_theta == 10.0);
  CHECK_FALSE(r.flipped);

  r = verify(dot, Pose::identity(), found(2.5, 5));
  CHECK_FALSE(r.is_tp);

  CHECK_FALSE(verify(dot, Pose::identity(), found(2.0, 0)).is_tp);
  CHECK_FALSE(verify(dot, Pose::identity(), found(0.0, 15)).is_tp);
  CHECK(verify(dot, Pose::identity(), found(1.999, 14.999)).is_tp);
}

TEST_CASE("verify accepts an exact flip") {
  Rng rng(6);
  const ObjectModel& m = small_cylinder();
  const Pose expected = random_pose(rng, 50);
  const VerificationResult r = verify(m, expected, flip_y(expected));
  CHECK(r.flipped);
  CHECK(r.is_tp);
  CHECK(r.e_theta == 0.0);
  // Oracle: the flipped model lands on itself up to sampling.
  CHECK(brute_adi(m.points(), flip_y(expected), flip_y(expected)) == 0.0);
  CHECK(r.e_adi <= 2.0 * m.sampling_resolution());
}

TEST_CASE("verify is stable under spin of the found pose") {
  // Dense sampling keeps the tolerance band narrow enough to leave positives.
  static const ObjectModel m = sample_cylinder_model(5.0, 61.0, 20000, 3);
  const double tol = 2.0 * m.sampling_resolution();
  Rng rng(7);
  int positives = 0, negatives = 0;
  for (int i = 0; i < 24; ++i) {
    const Pose expected = random_pose(rng, 50);
    const bool near = i % 2;
    const Pose found = expected * Pose::from_axis_angle(testing::random_vec(rng, 1).normalized(),
                                                        near ? 0.2 * i : 1.5 * i,
                                                        testing::random_vec(rng, near ? 0.1 : 6.0));
    const VerificationResult base = verify(m, expected, found);
    if (std::abs(base.e_adi - 2.0) <= tol) continue;
    (base.is_tp ? positives : negatives)++;
    for (int k = 0; k < 36; ++k) {
      const Pose spun = found * Pose::from_axis_angle(Vec3::UnitZ(), 10.0 * k);
      CHECK(verify(m, expected, spun).is_tp == base.is_tp);
    }
  }
  CHECK(positives >= 4);
  CHECK(negatives >= 4);
}

TEST_CASE("verify is invariant under a simultaneous flip") {
  Rng rng(8);
  const ObjectModel& m = cylinder();
  const double tol = 2.0 * m.sampling_resolution();
  for (int i = 0; i < 40; ++i) {
    const Pose e = random_pose(rng, 50);
    const Pose f = e * Pose::from_axis_angle(testing::random_vec(rng, 1).normalized(), 5.0 * i,
                                             testing::random_vec(rng, 1.5));
    const VerificationResult a = verify(m, e, f);
    if (std::abs(a.e_adi - 2.0) <= tol) continue;
    CHECK(verify(m, flip_y(e), flip_y(f)).is_tp == a.is_tp);
  }
}

TEST_CASE("threshold validation") {
  CHECK_NOTHROW(VerificationThresholds{}.validate());
  CHECK_THROWS_AS((VerificationThresholds{-1.0, 15, 90}.validate()), InvalidArgument);
  CHECK_THROWS_AS((VerificationThresholds{2.0, 0.0, 90}.validate()), InvalidArgument);
  CHECK_THROWS_AS((VerificationThresholds{2.0, 15, 10}.validate()), InvalidArgument);
  const VerificationThresholds d;
  CHECK(d.adi_mm == 2.0);
  CHECK(d.angle_deg == 15.0);
  CHECK(d.flip_trigger_deg == 90.0);
}
