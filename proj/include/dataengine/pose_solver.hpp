#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dataengine/geometry.hpp"

namespace dataengine {

class KdTree;

struct Correspondence {
  Vec3 model_point;
  Vec3 scene_point;
};

// score = depth_overlap + kInlierTieBreak * inlier_count. Overlap is a
// multiple of 1/|model|, so the inlier term only ever breaks ties.
inline constexpr double kInlierTieBreak = 1e-9;

struct PoseHypothesis {
  Pose pose;
  int inlier_count = 0;
  double depth_overlap = 0.0;
  double score = 0.0;
};

double hypothesis_score(double depth_overlap, int inlier_count);

// Least-squares rigid transform taking model points onto scene points.
// Throws DegenerateConfiguration for fewer than three points or collinear /
// coincident model points.
Pose kabsch(const std::vector<Correspondence>& corrs);

struct RansacOptions {
  int iterations = 256;
  double inlier_mm = 3.0;
  std::uint64_t seed = 0;
};

// Minimal three-point hypotheses, best consensus refit on its inliers.
// Throws NoConsensus when no hypothesis gathers three inliers.
PoseHypothesis ransac_pose(const std::vector<Correspondence>& corrs,
                           const RansacOptions& options = {});

// Fraction of posed model points within tau_mm of the scene. The full model
// is used; there is no self-occlusion reasoning.
double depth_check(const Pose& pose, const ObjectModel& model, const PointCloud& scene,
                   double tau_mm);
double depth_check(const Pose& pose, const ObjectModel& model, const KdTree& scene_index,
                   double tau_mm);

// Greedy suppression by descending score: a hypothesis whose e_adi to an
// already kept one is below radius_mm is dropped. Output sorted by score.
std::vector<PoseHypothesis> nms(std::vector<PoseHypothesis> hypotheses,
                                const ObjectModel& model, double radius_mm);

// Produces one pose for the hypothesis with the given seed.
using PoseProposerFn = std::function<Pose(std::uint64_t hypothesis_seed)>;

struct BatchOptions {
  int k = 48;
  double tau_mm = 3.0;
  double min_overlap = 0.6;
  double nms_radius_mm = 10.0;
  std::uint64_t seed = 0;
  // Hypothesis i always uses seed + i, so any thread count yields the same
  // result.
  int threads = 1;
};

// Proposes k poses, drops those whose overlap is below min_overlap,
// deduplicates with nms and returns them ranked. Empty means no detection.
std::vector<PoseHypothesis> estimate_batch(const PointCloud& scene, const ObjectModel& model,
                                           const PoseProposerFn& proposer,
                                           const BatchOptions& options = {});

}  // namespace dataengine
