#include "dataengine/pose_solver.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <random>
#include <thread>

#include "dataengine/errors.hpp"
#include "dataengine/kdtree.hpp"
#include "dataengine/metrics.hpp"

namespace dataengine {

double hypothesis_score(double depth_overlap, int inlier_count) {
  return depth_overlap + kInlierTieBreak * static_cast<double>(inlier_count);
}

Pose kabsch(const std::vector<Correspondence>& corrs) {
  if (corrs.size() < 3) throw DegenerateConfiguration("kabsch needs at least 3 correspondences");

  Vec3 cm = Vec3::Zero(), cs = Vec3::Zero();
  for (const auto& c : corrs) {
    if (!c.model_point.allFinite() || !c.scene_point.allFinite()) {
      throw InvalidArgument("kabsch correspondence has a non-finite coordinate");
    }
    cm += c.model_point;
    cs += c.scene_point;
  }
  const double n = static_cast<double>(corrs.size());
  cm /= n;
  cs /= n;

  Mat3 h = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  for (const auto& c : corrs) {
    const Vec3 dm = c.model_point - cm;
    h += dm * (c.scene_point - cs).transpose();
    spread += dm * dm.transpose();
  }

  // Rank of the centred model points: collinear or coincident inputs leave
  // the rotation about their line undetermined.
  const Eigen::Vector3d ev = Eigen::JacobiSVD<Mat3>(spread).singularValues();
  if (!(ev(0) > 0.0) || ev(1) <= 1e-12 * ev(0)) {
    throw DegenerateConfiguration("kabsch model points are collinear or coincident");
  }

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  // Reflection correction: flip the axis of the smallest singular value.
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = v * d * u.transpose();
  return orthonormalized(Pose{r, cs - r * cm});
}

namespace {

int count_inliers(const std::vector<Correspondence>& corrs, const Pose& pose, double inlier_mm,
                  std::vector<Correspondence>* inliers) {
  const double tol_sq = inlier_mm * inlier_mm;
  int count = 0;
  for (const auto& c : corrs) {
    if ((pose.apply(c.model_point) - c.scene_point).squaredNorm() < tol_sq) {
      ++count;
      if (inliers) inliers->push_back(c);
    }
  }
  return count;
}

}  // namespace

PoseHypothesis ransac_pose(const std::vector<Correspondence>& corrs,
                           const RansacOptions& options) {
  if (corrs.size() < 3) throw DegenerateConfiguration("ransac needs at least 3 correspondences");
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, corrs.size() - 1);

  int best_count = 0;
  Pose best;
  std::vector<Correspondence> sample(3);
  for (int it = 0; it < options.iterations; ++it) {
    std::size_t i = pick(rng), j = pick(rng), k = pick(rng);
    if (i == j || j == k || i == k) continue;
    sample = {corrs[i], corrs[j], corrs[k]};
    Pose candidate;
    try {
      candidate = kabsch(sample);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    const int count = count_inliers(corrs, candidate, options.inlier_mm, nullptr);
    if (count > best_count) {
      best_count = count;
      best = candidate;
    }
  }
  if (best_count < 3) throw NoConsensus("no hypothesis reached 3 inliers");

  std::vector<Correspondence> inliers;
  count_inliers(corrs, best, options.inlier_mm, &inliers);
  PoseHypothesis out;
  try {
    out.pose = kabsch(inliers);
  } catch (const DegenerateConfiguration&) {
    out.pose = best;
  }
  out.inlier_count = count_inliers(corrs, out.pose, options.inlier_mm, nullptr);
  if (out.inlier_count < best_count) {
    // Refit drifted away from its own support; keep the minimal-sample fit.
    out.pose = best;
    out.inlier_count = best_count;
  }
  out.score = hypothesis_score(0.0, out.inlier_count);
  return out;
}

double depth_check(const Pose& pose, const ObjectModel& model, const KdTree& scene_index,
                   double tau_mm) {
  if (scene_index.size() == 0) throw InvalidArgument("depth check against an empty scene");
  std::size_t hits = 0;
  for (const Vec3& p : model.points()) {
    if (scene_index.nearest_distance(pose.apply(p)) <= tau_mm) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(model.points().size());
}

double depth_check(const Pose& pose, const ObjectModel& model, const PointCloud& scene,
                   double tau_mm) {
  if (scene.empty()) throw InvalidArgument("depth check against an empty scene");
  return depth_check(pose, model, KdTree(scene.points), tau_mm);
}

std::vector<PoseHypothesis> nms(std::vector<PoseHypothesis> hypotheses,
                                const ObjectModel& model, double radius_mm) {
  std::stable_sort(hypotheses.begin(), hypotheses.end(),
                   [](const PoseHypothesis& a, const PoseHypothesis& b) {
                     return a.score > b.score;
                   });
  std::vector<PoseHypothesis> kept;
  for (auto& h : hypotheses) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const PoseHypothesis& k) {
      return !e_adi_at_least(model, h.pose, k.pose, radius_mm);
    });
    if (!duplicate) kept.push_back(std::move(h));
  }
  return kept;
}

std::vector<PoseHypothesis> estimate_batch(const PointCloud& scene, const ObjectModel& model,
                                           const PoseProposerFn& proposer,
                                           const BatchOptions& options) {
  if (options.k < 1) throw InvalidArgument("estimate_batch needs k >= 1");
  if (scene.empty()) return {};
  const KdTree index(scene.points);

  std::vector<PoseHypothesis> all(static_cast<std::size_t>(options.k));
  const auto run = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      PoseHypothesis& h = all[static_cast<std::size_t>(i)];
      h.pose = proposer(options.seed + static_cast<std::uint64_t>(i));
      h.depth_overlap = depth_check(h.pose, model, index, options.tau_mm);
      h.score = hypothesis_score(h.depth_overlap, h.inlier_count);
    }
  };
  const int threads = std::clamp(options.threads, 1, options.k);
  if (threads == 1) {
    run(0, options.k);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (options.k + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(run, t * chunk, std::min(options.k, (t + 1) * chunk));
    }
  }

  std::vector<PoseHypothesis> passed;
  for (auto& h : all) {
    if (h.depth_overlap >= options.min_overlap) passed.push_back(std::move(h));
  }
  return nms(std::move(passed), model, options.nms_radius_mm);
}

}  // namespace dataengine
