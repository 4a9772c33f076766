#include "dataengine/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "dataengine/model_io.hpp"

namespace dataengine {

Calibration fit_calibration(const std::vector<CalibrationPair>& pairs) {
  Calibration cal;
  if (pairs.empty()) return cal;

  std::vector<Pose> errors;
  errors.reserve(pairs.size());
  Vec3 t_sum = Vec3::Zero();
  Mat3 r_sum = Mat3::Zero();
  for (const auto& p : pairs) {
    errors.push_back(compose(invert(p.verified_true), p.proposed));
    t_sum += errors.back().translation;
    r_sum += errors.back().rotation;
  }
  const double n = static_cast<double>(pairs.size());
  cal.bias_estimate.translation = t_sum / n;
  cal.bias_estimate.rotation = project_to_rotation(r_sum / n);
  cal.n_samples = static_cast<int>(pairs.size());

  double st = 0.0, sr = 0.0;
  for (const Pose& e : errors) {
    st += (e.translation - cal.bias_estimate.translation).squaredNorm();
    const double r = rotation_geodesic(e, cal.bias_estimate);
    sr += r * r;
  }
  cal.residual_rms_t = std::sqrt(st / n);
  cal.residual_rms_r = std::sqrt(sr / n);
  return cal;
}

void EpochPlan::validate() const {
  if (real_count < 0 || base_count < 0) throw InvalidArgument("epoch counts must be >= 0");
  if (total() < 1) throw InvalidArgument("epoch must hold at least one sample");
  if (!(random_keypoint_fraction >= 0.0 && random_keypoint_fraction <= 1.0)) {
    throw InvalidArgument("random_keypoint_fraction must be in [0, 1]");
  }
}

KeypointDraw keypoint_sampler(const ObjectModel& model, Rng& rng, const EpochPlan& plan) {
  plan.validate();
  const std::size_t count = model.keypoints().size();
  if (model.points().size() < count) {
    throw InvalidArgument("model has fewer surface points than keypoints");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  KeypointDraw out;
  out.random = unit(rng) < plan.random_keypoint_fraction;
  if (!out.random) {
    out.keypoints = model.keypoints();
    return out;
  }
  // Distinct indices via a partial Fisher-Yates shuffle.
  std::vector<std::size_t> idx(model.points().size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
    std::swap(idx[i], idx[d(rng)]);
    out.keypoints.push_back(model.points()[idx[i]]);
  }
  return out;
}

double evaluate_recall(const ErrorModel& proposer, const Calibration& calibration,
                       const ObjectModel& model, const RecallOptions& options) {
  if (options.test_episodes < 1) throw InvalidArgument("evaluate_recall needs test_episodes >= 1");
  BinVolume volume;
  volume.center = Vec3(0.0, 0.0, options.floor_z - model.stable_rest_height());
  volume.half_extent = Vec3(0.5 * options.bin_extent.x(), 0.5 * options.bin_extent.y(),
                            model.stable_rest_height());
  int hits = 0;
  for (int e = 0; e < options.test_episodes; ++e) {
    Rng rng(derive_seed(options.seed, 0x7265636c, static_cast<std::uint64_t>(e)));
    const Pose truth = random_lying_pose(model, options.bin_extent, options.floor_z, rng);
    const SceneTruth scene{{0, truth}};
    const Proposal raw = oracle_propose(scene, model, proposer, rng, volume);
    const Proposal calibrated = apply_calibration(raw, calibration);
    if (verify(model, calibrated.pose, truth, options.thresholds).is_tp) ++hits;
  }
  return static_cast<double>(hits) / options.test_episodes;
}

std::vector<CalibrationPair> calibration_pairs(const EpisodeStore& store, const ObjectModel& model,
                                               const VerificationThresholds& thresholds) {
  std::vector<CalibrationPair> pairs;
  for (const TaskRecord& task : store.tasks()) {
    if (task.split != "train") continue;
    for (const TrainingSample& s : build_training_set(store, task.id, model, thresholds)) {
      pairs.push_back({s.annotated_pose, align_spin(s.annotated_pose, s.verified_pose)});
    }
  }
  return pairs;
}

std::vector<CurvePoint> learning_curve(const std::vector<CalibrationPair>& pairs,
                                       const std::vector<int>& checkpoints,
                                       const std::vector<std::uint64_t>& seeds,
                                       const ErrorModel& proposer, const ObjectModel& model,
                                       RecallOptions options) {
  std::vector<CurvePoint> curve;
  for (int n : checkpoints) {
    if (n < 0) throw InvalidArgument("checkpoint counts must be >= 0");
    if (static_cast<std::size_t>(n) > pairs.size()) continue;
    const std::vector<CalibrationPair> first(pairs.begin(), pairs.begin() + n);
    const Calibration cal = fit_calibration(first);
    for (std::uint64_t seed : seeds) {
      options.seed = seed;
      curve.push_back({n, evaluate_recall(proposer, cal, model, options), seed});
    }
  }
  return curve;
}

std::vector<CurvePoint> learning_curve(const EpisodeStore& store,
                                       const std::vector<int>& checkpoints,
                                       const std::vector<std::uint64_t>& seeds,
                                       const ErrorModel& proposer, const ObjectModel& model,
                                       const RecallOptions& options) {
  return learning_curve(calibration_pairs(store, model, options.thresholds), checkpoints, seeds,
                        proposer, model, options);
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "n_samples,recall,seed\n";
  for (const CurvePoint& p : curve) {
    out << p.n_samples << ',' << format_real(p.recall) << ',' << p.seed << '\n';
  }
}

}  // namespace dataengine
