#pragma once

#include <vector>

#include "dataengine/geometry.hpp"

namespace dataengine {

// Acceptance gate for a grasp comparison. Both inequalities are strict.
struct VerificationThresholds {
  double adi_mm = 2.0;
  double angle_deg = 15.0;
  // A z-axis error above this is treated as a half-turn flip of the part.
  double flip_trigger_deg = 90.0;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct VerificationResult {
  double e_adi = 0.0;    // mm
  double e_theta = 0.0;  // degrees
  bool flipped = false;
  bool is_tp = false;
};

// Exact per-point nearest distance from each query point to the target.
std::vector<double> nn_distances(const PointCloud& query, const PointCloud& target);
std::vector<double> nn_distances_brute_force(const PointCloud& query, const PointCloud& target);

// Average distance for indistinguishable views: the model under pose_a is
// matched point-wise to its nearest neighbour under pose_b. Snapped to
// kMetricGrid.
double e_adi(const ObjectModel& model, const Pose& pose_a, const Pose& pose_b);

// True when e_adi(model, a, b) >= bound. Stops scanning as soon as the
// running sum settles the answer.
bool e_adi_at_least(const ObjectModel& model, const Pose& pose_a, const Pose& pose_b,
                    double bound);

struct FlipNormalized {
  Pose expected;
  Pose found;
  bool flipped = false;
};

// When the z-axes disagree by more than trigger_deg, the expected (plan
// side) pose is turned by R_y; the measurement is never altered.
FlipNormalized normalize_flip(const Pose& expected, const Pose& found, double trigger_deg);

VerificationResult verify(const ObjectModel& model, const Pose& expected, const Pose& found,
                          const VerificationThresholds& thresholds = {});

}  // namespace dataengine
