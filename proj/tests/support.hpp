#pragma once

#include <random>
#include <vector>

#include "dataengine/geometry.hpp"
#include "dataengine/proposer.hpp"

namespace testing {

using dataengine::Mat3;
using dataengine::Pose;
using dataengine::Rng;
using dataengine::Vec3;

inline Vec3 random_vec(Rng& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  return {u(rng), u(rng), u(rng)};
}

inline Pose random_pose(Rng& rng, double half = 100.0) {
  Pose p = dataengine::random_rotation_pose(rng);
  p.translation = random_vec(rng, half);
  return p;
}

inline double max_abs_diff(const Pose& a, const Pose& b) {
  return std::max((a.rotation - b.rotation).cwiseAbs().maxCoeff(),
                  (a.translation - b.translation).cwiseAbs().maxCoeff());
}

// Model made of the given points only, no symmetry.
inline dataengine::ObjectModel point_model(std::vector<Vec3> pts, double diameter = 1.0) {
  dataengine::ObjectModel::Parts parts;
  parts.id = "points";
  parts.surface_cloud.points = std::move(pts);
  parts.diameter_mm = diameter;
  return dataengine::ObjectModel(std::move(parts));
}

// O(N^2) nearest-neighbour mean used as an oracle for e_adi.
inline double brute_adi(const std::vector<Vec3>& pts, const Pose& a, const Pose& b) {
  double sum = 0.0;
  for (const Vec3& p : pts) {
    const Vec3 x = a.apply(p);
    double best = 1e300;
    for (const Vec3& q : pts) best = std::min(best, (x - b.apply(q)).norm());
    sum += best;
  }
  return sum / static_cast<double>(pts.size());
}

}  // namespace testing
