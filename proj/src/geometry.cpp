#include "dataengine/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dataengine/errors.hpp"
#include "dataengine/kdtree.hpp"

namespace dataengine {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kDriftTolerance = 1e-12;

}  // namespace

Pose Pose::from_axis_angle(const Vec3& axis, double angle_deg, const Vec3& t) {
  if (axis.norm() == 0.0) return from_translation(t);
  return {Eigen::AngleAxisd(angle_deg * kDeg, axis.normalized()).toRotationMatrix(), t};
}

double Pose::orthonormality_error() const {
  return (rotation.transpose() * rotation - Mat3::Identity()).norm();
}

bool Pose::is_valid(double tol) const {
  return rotation.allFinite() && translation.allFinite() && orthonormality_error() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

std::string to_string(Symmetry s) {
  return s == Symmetry::kContinuousZ ? "continuous-z" : "none";
}

Symmetry symmetry_from_string(const std::string& s) {
  if (s == "none") return Symmetry::kNone;
  if (s == "continuous-z") return Symmetry::kContinuousZ;
  throw InvalidArgument("unknown symmetry '" + s + "'");
}

ObjectModel::ObjectModel(Parts parts) : parts_(std::move(parts)) {
  if (parts_.surface_cloud.empty()) throw InvalidArgument("object model has no surface points");
  if (!parts_.normals.empty() && parts_.normals.size() != parts_.surface_cloud.size()) {
    throw InvalidArgument("object model normals do not match its surface cloud");
  }
  for (const Vec3& p : parts_.surface_cloud.points) {
    if (!p.allFinite()) throw InvalidArgument("object model has a non-finite point");
    bounding_radius_ = std::max(bounding_radius_, p.norm());
  }
  index_ = std::make_shared<const KdTree>(parts_.surface_cloud.points);
}

double ObjectModel::sampling_resolution() const {
  return parts_.diameter_mm / std::sqrt(static_cast<double>(parts_.surface_cloud.size()));
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Pose orthonormalized(const Pose& p) {
  if (p.orthonormality_error() <= kDriftTolerance) return p;
  return {project_to_rotation(p.rotation), p.translation};
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  return orthonormalized(out);
}

Pose invert(const Pose& p) {
  const Mat3 rt = p.rotation.transpose();
  return {rt, -(rt * p.translation)};
}

std::vector<Vec3> transform_points(const Pose& p, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const Vec3& x : pts) out.push_back(p.apply(x));
  return out;
}

PointCloud transform_points(const Pose& p, const PointCloud& c) {
  return {transform_points(p, c.points), c.source_ids};
}

double snap_to_grid(double v) { return std::round(v / kMetricGrid) * kMetricGrid; }

double angular_error_z(const Pose& a, const Pose& b) {
  const Vec3 za = a.rotation.col(2);
  const Vec3 zb = b.rotation.col(2);
  // atan2 form of arccos(clamp(za . zb)): exact zero for identical axes and
  // well conditioned near 0 and 180 degrees.
  return snap_to_grid(std::atan2(za.cross(zb).norm(), za.dot(zb)) / kDeg);
}

double rotation_geodesic(const Pose& a, const Pose& b) {
  const Mat3 rel = a.rotation.transpose() * b.rotation;
  const Vec3 v(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * v.norm(), 0.5 * (rel.trace() - 1.0)) / kDeg;
}

Pose flip_y(const Pose& p) {
  Pose out = p;
  out.rotation.col(0) = -p.rotation.col(0);
  out.rotation.col(2) = -p.rotation.col(2);
  return out;
}

Mat3 rotation_z(double angle_deg) {
  return Eigen::AngleAxisd(angle_deg * kDeg, Vec3::UnitZ()).toRotationMatrix();
}

Pose align_spin(const Pose& reference, const Pose& pose) {
  const Mat3 m = reference.rotation.transpose() * pose.rotation;
  const double psi = std::atan2(m(0, 1) - m(1, 0), m(0, 0) + m(1, 1));
  return {pose.rotation * rotation_z(psi / kDeg), pose.translation};
}

std::vector<Vec3> farthest_point_sampling(const std::vector<Vec3>& pts, std::size_t count) {
  if (pts.empty() || count == 0) return {};
  count = std::min(count, pts.size());

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());

  std::size_t first = 0;
  double far = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - centroid).squaredNorm();
    if (d > far) {
      far = d;
      first = i;
    }
  }

  std::vector<double> dist(pts.size(), std::numeric_limits<double>::infinity());
  std::vector<Vec3> out;
  out.reserve(count);
  std::size_t next = first;
  while (out.size() < count) {
    out.push_back(pts[next]);
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      dist[i] = std::min(dist[i], (pts[i] - pts[next]).squaredNorm());
      if (dist[i] > best) {
        best = dist[i];
        arg = i;
      }
    }
    next = arg;
  }
  return out;
}

double cloud_diameter(const std::vector<Vec3>& pts) {
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best = std::max(best, (pts[i] - pts[j]).squaredNorm());
  return std::sqrt(best);
}

ObjectModel sample_cylinder_model(double radius_mm, double height_mm, int n_points,
                                  std::uint64_t seed, std::string id, int n_keypoints) {
  if (!(radius_mm > 0.0) || !(height_mm > 0.0)) {
    throw InvalidArgument("cylinder dimensions must be positive");
  }
  if (n_points < 64) throw InvalidArgument("cylinder model needs at least 64 points");

  const double lateral = 2.0 * std::numbers::pi * radius_mm * height_mm;
  const double caps = 2.0 * std::numbers::pi * radius_mm * radius_mm;
  const double p_lateral = lateral / (lateral + caps);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ObjectModel::Parts parts;
  parts.id = std::move(id);
  parts.surface_cloud.points.reserve(n_points);
  parts.normals.reserve(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double theta = 2.0 * std::numbers::pi * unit(rng);
    const double c = std::cos(theta), s = std::sin(theta);
    if (unit(rng) < p_lateral) {
      const double z = (unit(rng) - 0.5) * height_mm;
      parts.surface_cloud.points.emplace_back(radius_mm * c, radius_mm * s, z);
      parts.normals.emplace_back(c, s, 0.0);
    } else {
      const double r = radius_mm * std::sqrt(unit(rng));
      const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
      parts.surface_cloud.points.emplace_back(r * c, r * s, sign * 0.5 * height_mm);
      parts.normals.emplace_back(0.0, 0.0, sign);
    }
  }
  parts.diameter_mm = std::hypot(2.0 * radius_mm, height_mm);
  parts.symmetry = Symmetry::kContinuousZ;
  parts.keypoints = farthest_point_sampling(parts.surface_cloud.points,
                                            static_cast<std::size_t>(std::max(n_keypoints, 0)));
  parts.stable_rest_height_mm = radius_mm;
  parts.radius_mm = radius_mm;
  parts.height_mm = height_mm;
  return ObjectModel(std::move(parts));
}

}  // namespace dataengine
