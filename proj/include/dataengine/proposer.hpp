#pragma once

#include <random>
#include <string>
#include <vector>

#include "dataengine/geometry.hpp"
#include "dataengine/pose_solver.hpp"

namespace dataengine {

using Rng = std::mt19937_64;

// Error characteristics of a simulated zero-shot estimator.
//
// A proposal for an object with true pose T is T * bias * N, where N has
// per-axis Gaussian translation noise (sigma_t) and an axis-uniform rotation
// whose angle is |Normal(0, sigma_r)|. With probability p_flip the result is
// additionally turned half way about its y-axis; with probability p_gross it
// is replaced by a uniformly random pose in the bin. The bias acts on the
// object side, so it is the same offset in every scene.
struct ErrorModel {
  double sigma_t = 0.0;  // mm
  double sigma_r = 0.0;  // degrees
  double p_flip = 0.0;
  double p_gross = 0.0;
  Pose bias;

  void validate() const;
};

struct ObjectTruth {
  int id = 0;
  Pose pose;
};

using SceneTruth = std::vector<ObjectTruth>;

// Axis-aligned box in camera coordinates from which gross errors are drawn.
struct BinVolume {
  Vec3 center{0.0, 0.0, 780.0};
  Vec3 half_extent{300.0, 225.0, 30.0};
};

struct Proposal {
  Pose pose;
  // Ground-truth bookkeeping for evaluation only; labeling never reads it.
  int target_object_id = -1;
};

// Calibration produced by the learner. bias_estimate is identity when no
// samples were used.
struct Calibration {
  Pose bias_estimate;
  int n_samples = 0;
  double residual_rms_t = 0.0;  // mm
  double residual_rms_r = 0.0;  // degrees
};

Pose random_rotation_pose(Rng& rng);
// Translation ~ N(0, sigma_t) per axis, rotation axis-uniform with angle
// |N(0, sigma_r)|.
Pose sample_perturbation(double sigma_t, double sigma_r, Rng& rng);

Proposal oracle_propose(const SceneTruth& scene, const ObjectModel& model, const ErrorModel& em,
                        Rng& rng, const BinVolume& bin = {});

struct KeypointProposal {
  std::vector<Correspondence> correspondences;
  int target_object_id = -1;
};

// Model keypoints matched to their true scene locations plus isotropic noise.
// round(outlier_rate * n) of them get a random scene point instead.
KeypointProposal keypoint_propose(const SceneTruth& scene, const ObjectModel& model,
                                  double kp_noise_mm, double outlier_rate, Rng& rng,
                                  const BinVolume& bin = {});

Proposal apply_calibration(const Proposal& p, const Calibration& cal);

// Named parametric stand-ins for the four test parts. The dimensions only
// respect the stated 32-61 mm length range; the error models are knobs.
struct ObjectPreset {
  std::string name;
  double radius_mm;
  double height_mm;
  ErrorModel error_model;
};

const std::vector<ObjectPreset>& object_presets();
const ObjectPreset& object_preset(const std::string& name);

}  // namespace dataengine
