#include "dataengine/metrics.hpp"

#include <cmath>
#include <limits>

#include "dataengine/errors.hpp"
#include "dataengine/kdtree.hpp"

namespace dataengine {

void VerificationThresholds::validate() const {
  if (!(adi_mm > 0.0)) throw InvalidArgument("thresholds.adi_mm must be positive");
  if (!(angle_deg > 0.0)) throw InvalidArgument("thresholds.angle_deg must be positive");
  if (!(flip_trigger_deg > 0.0)) {
    throw InvalidArgument("thresholds.flip_trigger_deg must be positive");
  }
  if (flip_trigger_deg < angle_deg) {
    throw InvalidArgument("thresholds.flip_trigger_deg must be >= thresholds.angle_deg");
  }
}

std::vector<double> nn_distances(const PointCloud& query, const PointCloud& target) {
  if (target.empty()) throw InvalidArgument("nearest-neighbour target cloud is empty");
  const KdTree tree(target.points);
  std::vector<double> out;
  out.reserve(query.size());
  for (const Vec3& q : query.points) out.push_back(tree.nearest_distance(q));
  return out;
}

std::vector<double> nn_distances_brute_force(const PointCloud& query, const PointCloud& target) {
  if (target.empty()) throw InvalidArgument("nearest-neighbour target cloud is empty");
  std::vector<double> out;
  out.reserve(query.size());
  for (const Vec3& q : query.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& t : target.points) best = std::min(best, (t - q).squaredNorm());
    out.push_back(std::sqrt(best));
  }
  return out;
}

double e_adi(const ObjectModel& model, const Pose& pose_a, const Pose& pose_b) {
  if (pose_a == pose_b) return 0.0;
  // min_q |a p - b q| = min_q |b^-1 a p - q|, so the model's own index serves
  // every pose pair.
  const Pose rel = compose(invert(pose_b), pose_a);
  const KdTree& tree = model.index();
  double sum = 0.0;
  for (const Vec3& p : model.points()) sum += tree.nearest_distance(rel.apply(p));
  return snap_to_grid(sum / static_cast<double>(model.points().size()));
}

bool e_adi_at_least(const ObjectModel& model, const Pose& pose_a, const Pose& pose_b,
                    double bound) {
  if (bound <= 0.0) return true;
  if (pose_a == pose_b) return false;
  // The centroid of matched points stays within the bounding sphere of the
  // other copy, which gives a cheap lower bound.
  if ((pose_a.translation - pose_b.translation).norm() - 2.0 * model.bounding_radius() >= bound) {
    return true;
  }
  const Pose rel = compose(invert(pose_b), pose_a);
  const KdTree& tree = model.index();
  const double budget = bound * static_cast<double>(model.points().size());
  double sum = 0.0;
  for (const Vec3& p : model.points()) {
    sum += tree.nearest_distance(rel.apply(p));
    if (sum >= budget) return true;
  }
  return snap_to_grid(sum / static_cast<double>(model.points().size())) >= bound;
}

FlipNormalized normalize_flip(const Pose& expected, const Pose& found, double trigger_deg) {
  if (angular_error_z(expected, found) > trigger_deg) return {flip_y(expected), found, true};
  return {expected, found, false};
}

VerificationResult verify(const ObjectModel& model, const Pose& expected, const Pose& found,
                          const VerificationThresholds& thresholds) {
  const FlipNormalized n = normalize_flip(expected, found, thresholds.flip_trigger_deg);
  VerificationResult r;
  r.flipped = n.flipped;
  r.e_adi = e_adi(model, n.expected, n.found);
  r.e_theta = angular_error_z(n.expected, n.found);
  r.is_tp = r.e_adi < thresholds.adi_mm && r.e_theta < thresholds.angle_deg;
  return r;
}

}  // namespace dataengine
