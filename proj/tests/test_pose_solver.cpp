#include <doctest.h>

#include "dataengine/errors.hpp"
#include "dataengine/kdtree.hpp"
#include "dataengine/metrics.hpp"
#include "dataengine/pose_solver.hpp"
#include "dataengine/sim_workcell.hpp"
#include "support.hpp"

using namespace dataengine;
using testing::max_abs_diff;
using testing::random_pose;
using testing::random_vec;

namespace {

std::vector<Correspondence> exact_corrs(const Pose& t, Rng& rng, int n) {
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    const Vec3 m = random_vec(rng, 30);
    out.push_back({m, t.apply(m)});
  }
  return out;
}

double rms(const std::vector<Correspondence>& c, const Pose& p) {
  double s = 0.0;
  for (const auto& x : c) s += (p.apply(x.model_point) - x.scene_point).squaredNorm();
  return std::sqrt(s / c.size());
}

const ObjectModel& cylinder() {
  static const ObjectModel m = sample_cylinder_model(5.0, 61.0);
  return m;
}

}  // namespace

TEST_CASE("kabsch recovers exact transforms") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose t = random_pose(rng, 500);
    const Pose est = kabsch(exact_corrs(t, rng, 3 + i % 20));
    CHECK((est.translation - t.translation).norm() < 1e-6);
    CHECK(rotation_geodesic(est, t) < 1e-6);
    CHECK(est.rotation.determinant() == doctest::Approx(1.0));
  }
  CHECK(max_abs_diff(kabsch(exact_corrs(Pose::identity(), rng, 10)), Pose::identity()) < 1e-12);
}

TEST_CASE("kabsch never returns a reflection") {
  Rng rng(2);
  // Scene is a mirror image of the model: the best proper rotation is still
  // a rotation.
  std::vector<Correspondence> c;
  for (int i = 0; i < 20; ++i) {
    const Vec3 m = random_vec(rng, 10);
    c.push_back({m, Vec3(-m.x(), m.y(), m.z())});
  }
  const Pose p = kabsch(c);
  CHECK(p.rotation.determinant() == doctest::Approx(1.0));
}

TEST_CASE("kabsch is locally optimal under noise") {
  Rng rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const Pose truth = random_pose(rng, 200);
  std::vector<Correspondence> c;
  for (int i = 0; i < 100; ++i) {
    const Vec3 m = random_vec(rng, 30);
    c.push_back({m, truth.apply(m) + Vec3(g(rng), g(rng), g(rng))});
  }
  const Pose est = kabsch(c);
  const double best = rms(c, est);
  // Random neighbourhood oracle: no perturbed pose fits better.
  for (int i = 0; i < 10000; ++i) {
    const double scale = i < 5000 ? 0.01 : 0.5;
    const Pose delta = Pose::from_axis_angle(random_vec(rng, 1).normalized(), scale * g(rng),
                                             scale * random_vec(rng, 1));
    CHECK(best <= rms(c, delta * est) + 1e-12);
  }
}

TEST_CASE("kabsch is equivariant") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Pose p = random_pose(rng, 100), g = random_pose(rng, 100);
    auto c = exact_corrs(p, rng, 12);
    std::normal_distribution<double> n(0.0, 0.5);
    for (auto& x : c) x.scene_point += Vec3(n(rng), n(rng), n(rng));
    auto moved = c;
    for (auto& x : moved) x.scene_point = g.apply(x.scene_point);
    CHECK(max_abs_diff(kabsch(moved), g * kabsch(c)) < 1e-9);
  }
}

TEST_CASE("kabsch rejects degenerate input") {
  std::vector<Correspondence> two{{Vec3(0, 0, 0), Vec3(0, 0, 0)}, {Vec3(1, 0, 0), Vec3(1, 0, 0)}};
  CHECK_THROWS_AS(kabsch(two), DegenerateConfiguration);
  std::vector<Correspondence> line;
  for (int i = 0; i < 5; ++i) line.push_back({Vec3(i, 2.0 * i, 0), Vec3(i, 0, 0)});
  CHECK_THROWS_AS(kabsch(line), DegenerateConfiguration);
  std::vector<Correspondence> same(4, {Vec3(1, 1, 1), Vec3(2, 2, 2)});
  CHECK_THROWS_AS(kabsch(same), DegenerateConfiguration);
}

TEST_CASE("ransac without outliers matches kabsch") {
  Rng rng(5);
  const Pose t = random_pose(rng, 300);
  const auto c = exact_corrs(t, rng, 30);
  const PoseHypothesis h = ransac_pose(c);
  CHECK(max_abs_diff(h.pose, kabsch(c)) < 1e-6);
  CHECK(h.inlier_count == 30);
}

TEST_CASE("ransac with 40% outliers") {
  int ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(100 + trial);
    const Pose t = random_pose(rng, 300);
    std::vector<Correspondence> c = exact_corrs(t, rng, 60);
    std::normal_distribution<double> g(0.0, 0.3);
    for (int i = 0; i < 60; ++i) {
      if (i < 24) {
        c[i].scene_point = random_vec(rng, 300);
      } else {
        c[i].scene_point += Vec3(g(rng), g(rng), g(rng));
      }
    }
    const PoseHypothesis h = ransac_pose(c, {500, 3.0, static_cast<std::uint64_t>(trial)});
    ok += (h.pose.translation - t.translation).norm() <= 2.0 && rotation_geodesic(h.pose, t) <= 5.0;
  }
  CHECK(ok >= 190);
}

TEST_CASE("ransac reproducibility and failure") {
  Rng rng(6);
  auto c = exact_corrs(random_pose(rng), rng, 40);
  for (int i = 0; i < 15; ++i) c[i].scene_point = random_vec(rng, 100);
  const PoseHypothesis a = ransac_pose(c, {128, 3.0, 9});
  const PoseHypothesis b = ransac_pose(c, {128, 3.0, 9});
  CHECK(a.pose == b.pose);
  CHECK(a.inlier_count == b.inlier_count);

  // Every correspondence disagrees with every other one.
  std::vector<Correspondence> junk;
  for (int i = 0; i < 30; ++i) {
    junk.push_back({random_vec(rng, 10), Vec3(1000.0 * i, -700.0 * i * i, 313.0 * (i % 7))});
  }
  CHECK_THROWS_AS(ransac_pose(junk, {200, 0.001, 1}), NoConsensus);
  CHECK_THROWS_AS(ransac_pose({}), DegenerateConfiguration);
}

TEST_CASE("depth_check") {
  Rng rng(7);
  const ObjectModel& m = cylinder();
  const Pose p = random_pose(rng, 100);
  const PointCloud posed = transform_points(p, m.surface_cloud());
  CHECK(depth_check(p, m, posed, 1e-9) == 1.0);

  PointCloud far;
  for (int i = 0; i < 500; ++i) far.points.push_back(random_vec(rng, 100) + Vec3(0, 0, 5000));
  CHECK(depth_check(p, m, far, 3.0) == 0.0);

  // Delete every point on one side of the object's local x = 0 plane.
  PointCloud half;
  for (std::size_t i = 0; i < m.points().size(); ++i) {
    if (m.points()[i].x() > 0.0) half.points.push_back(posed.points[i]);
  }
  CHECK(depth_check(p, m, half, 1.0) == doctest::Approx(0.5).epsilon(0.2));
  CHECK(std::abs(depth_check(p, m, half, 1.0) - 0.5) <= 0.1);

  double prev = 1.0;
  for (double tau : {10.0, 3.0, 1.0, 0.3, 0.1, 0.0}) {
    const double o = depth_check(p * Pose::from_translation({0.7, 0, 0}), m, posed, tau);
    CHECK(o <= prev);
    CHECK(o >= 0.0);
    prev = o;
  }
  CHECK_THROWS_AS(depth_check(p, m, PointCloud{}, 3.0), InvalidArgument);
}

TEST_CASE("nms") {
  const ObjectModel& m = cylinder();
  const Pose a = Pose::from_translation({0, 0, 800});
  const Pose b = Pose::from_translation({100, 0, 800});

  const auto one = nms({{a, 0, 0.9, 0.9}}, m, 10.0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].pose == a);

  const auto dup = nms({{a, 0, 0.7, 0.7}, {a, 0, 0.9, 0.9}}, m, 10.0);
  REQUIRE(dup.size() == 1);
  CHECK(dup[0].score == 0.9);

  REQUIRE(e_adi(m, a, b) >= 10.0);
  const auto apart = nms({{a, 0, 0.7, 0.7}, {b, 0, 0.8, 0.8}}, m, 10.0);
  REQUIRE(apart.size() == 2);
  CHECK(apart[0].pose == b);
}

TEST_CASE("nms output is a separated subset") {
  Rng rng(8);
  const ObjectModel& m = cylinder();
  std::vector<PoseHypothesis> hs;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    Pose p = random_pose(rng, 40);
    p.translation.z() += 800.0;
    hs.push_back({p, 0, 0.0, u(rng)});
  }
  const auto kept = nms(hs, m, 10.0);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0) CHECK(kept[i - 1].score >= kept[i].score);
    CHECK(std::any_of(hs.begin(), hs.end(), [&](const PoseHypothesis& h) {
      return h.pose == kept[i].pose && h.score == kept[i].score;
    }));
    for (std::size_t j = 0; j < i; ++j) CHECK(e_adi(m, kept[i].pose, kept[j].pose) >= 10.0);
  }
  CHECK(nms({}, m, 10.0).empty());
}

TEST_CASE("hypothesis score orders by overlap, then inliers") {
  CHECK(hypothesis_score(0.7, 0) > hypothesis_score(0.69, 1000));
  CHECK(hypothesis_score(0.7, 5) > hypothesis_score(0.7, 4));
}

TEST_CASE("estimate_batch") {
  Rng rng(9);
  const ObjectModel& m = cylinder();
  const Pose truth = random_lying_pose(m, {600, 450}, 800, rng);
  SceneState scene;
  scene.objects = {{0, truth}};
  scene.bins = {BinId::kA};
  scene.bin_a_count = 1;
  const PointCloud cloud = render_cloud(scene, m, 0.0, 0.0, rng);

  const PoseProposerFn perfect = [&](std::uint64_t) { return truth; };
  const auto one = estimate_batch(cloud, m, perfect, {48, 3.0, 0.6, 10.0, 1});
  REQUIRE(one.size() == 1);
  CHECK(one[0].pose == truth);

  const ErrorModel em{1.0, 3.0, 0.1, 0.3, Pose{}};
  const PoseProposerFn noisy = [&](std::uint64_t seed) {
    Rng r(seed);
    return oracle_propose({{0, truth}}, m, em, r).pose;
  };
  for (int k : {48, 6}) {
    BatchOptions o;
    o.k = k;
    o.seed = 17;
    const auto hs = estimate_batch(cloud, m, noisy, o);
    CHECK(hs.size() <= static_cast<std::size_t>(k));
    for (const auto& h : hs) CHECK(h.depth_overlap >= 0.6);
  }

  BatchOptions serial;
  serial.seed = 3;
  BatchOptions parallel = serial;
  parallel.threads = 4;
  const auto s = estimate_batch(cloud, m, noisy, serial);
  const auto p = estimate_batch(cloud, m, noisy, parallel);
  REQUIRE(s.size() == p.size());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i].pose == p[i].pose);

  const PoseProposerFn far = [](std::uint64_t) { return Pose::from_translation({0, 0, 9000}); };
  CHECK(estimate_batch(cloud, m, far).empty());
  CHECK(estimate_batch(PointCloud{}, m, perfect).empty());
  CHECK_THROWS_AS(estimate_batch(cloud, m, perfect, {0}), InvalidArgument);
}
