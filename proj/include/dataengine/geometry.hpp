#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace dataengine {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class KdTree;

// Rigid transform in SE(3). Translation in millimetres.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static Pose from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  // Axis-angle with the angle in degrees.
  static Pose from_axis_angle(const Vec3& axis, double angle_deg,
                              const Vec3& t = Vec3::Zero());

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  // Frobenius norm of R^T R - I.
  double orthonormality_error() const;
  bool is_valid(double tol = 1e-9) const;

  bool operator==(const Pose& other) const {
    return rotation == other.rotation && translation == other.translation;
  }
};

struct PointCloud {
  std::vector<Vec3> points;
  // Empty, or one entry per point naming the object that produced it.
  std::vector<int> source_ids;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class Symmetry { kNone, kContinuousZ };

std::string to_string(Symmetry s);
Symmetry symmetry_from_string(const std::string& s);

// Surface-sampled rigid part. Immutable once built; holds a spatial index
// over its own surface cloud so model-to-model distances stay O(N log N).
class ObjectModel {
 public:
  struct Parts {
    std::string id;
    PointCloud surface_cloud;
    std::vector<Vec3> normals;  // optional, parallel to surface_cloud
    double diameter_mm = 0.0;
    Symmetry symmetry = Symmetry::kNone;
    std::vector<Vec3> keypoints;
    double stable_rest_height_mm = 0.0;
    double radius_mm = 0.0;
    double height_mm = 0.0;
  };

  explicit ObjectModel(Parts parts);

  const std::string& id() const { return parts_.id; }
  const PointCloud& surface_cloud() const { return parts_.surface_cloud; }
  const std::vector<Vec3>& points() const { return parts_.surface_cloud.points; }
  const std::vector<Vec3>& normals() const { return parts_.normals; }
  double diameter() const { return parts_.diameter_mm; }
  Symmetry symmetry() const { return parts_.symmetry; }
  const std::vector<Vec3>& keypoints() const { return parts_.keypoints; }
  double stable_rest_height() const { return parts_.stable_rest_height_mm; }
  double radius() const { return parts_.radius_mm; }
  double height() const { return parts_.height_mm; }

  // diameter / sqrt(n): nominal spacing of the surface samples.
  double sampling_resolution() const;
  // Largest distance of a surface point from the model origin.
  double bounding_radius() const { return bounding_radius_; }

  const KdTree& index() const { return *index_; }

 private:
  Parts parts_;
  double bounding_radius_ = 0.0;
  std::shared_ptr<const KdTree> index_;
};

// Applies b, then a.
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);
inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

PointCloud transform_points(const Pose& p, const PointCloud& c);
std::vector<Vec3> transform_points(const Pose& p, const std::vector<Vec3>& pts);

// Metric values are snapped to this grid (mm or degrees) so that poses
// constructed at a threshold measure exactly the threshold.
inline constexpr double kMetricGrid = 1e-12;
double snap_to_grid(double v);

// Angle in degrees between the object z-axes of two poses, in [0, 180].
double angular_error_z(const Pose& a, const Pose& b);
// Angle in degrees of the relative rotation a^T b, in [0, 180].
double rotation_geodesic(const Pose& a, const Pose& b);

// Half turn about the body y-axis: R -> R * diag(-1, 1, -1).
Pose flip_y(const Pose& p);

Mat3 rotation_z(double angle_deg);

// Nearest proper rotation in the Frobenius sense (polar decomposition).
Mat3 project_to_rotation(const Mat3& m);
// Re-orthonormalises the rotation when drift exceeds 1e-12.
Pose orthonormalized(const Pose& p);

// Spins `pose` about its own z-axis so that its rotation is as close as
// possible to `reference`. Used to pick the representative of a
// continuous-z symmetric pose that a learner should compare against.
Pose align_spin(const Pose& reference, const Pose& pose);

// Greedy farthest-point sampling, seeded with the point farthest from the
// centroid. Deterministic for a given cloud.
std::vector<Vec3> farthest_point_sampling(const std::vector<Vec3>& pts, std::size_t count);

inline constexpr int kDefaultCylinderPoints = 2048;
inline constexpr int kDefaultKeypoints = 8;

// Cylinder centred on the origin with its axis along z. Points are drawn
// area-uniformly over the lateral surface and both caps.
ObjectModel sample_cylinder_model(double radius_mm, double height_mm,
                                  int n_points = kDefaultCylinderPoints,
                                  std::uint64_t seed = 0,
                                  std::string id = "cylinder",
                                  int n_keypoints = kDefaultKeypoints);

// Largest pairwise distance, brute force.
double cloud_diameter(const std::vector<Vec3>& pts);

}  // namespace dataengine
