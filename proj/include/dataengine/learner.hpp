#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dataengine/episode_store.hpp"
#include "dataengine/errors.hpp"
#include "dataengine/labeling.hpp"
#include "dataengine/proposer.hpp"
#include "dataengine/sim_workcell.hpp"

namespace dataengine {

// Stand-in for fine-tuning: the learner estimates the estimator's systematic
// offset from verified samples and removes it from later proposals.

struct CalibrationPair {
  Pose proposed;
  Pose verified_true;
};

// Rigid average of the error transforms invert(true) * proposed: arithmetic
// mean of translations, chordal L2 mean of rotations (SVD projection of the
// mean matrix). Empty input gives the identity.
Calibration fit_calibration(const std::vector<CalibrationPair>& pairs);

// Per-epoch mixing of collected and original data plus the keypoint
// randomisation rate.
struct EpochPlan {
  int real_count = 1000;
  int base_count = 1000;
  double random_keypoint_fraction = 0.4;

  int total() const { return real_count + base_count; }
  void validate() const;
};

// total() draws with replacement. Each draw comes from `real` with
// probability real_count / total(); everything comes from `base` when
// `real` is empty.
template <class T>
std::vector<T> epoch_sampler(const std::vector<T>& real, const std::vector<T>& base,
                             const EpochPlan& plan, Rng& rng);

struct KeypointDraw {
  std::vector<Vec3> keypoints;
  bool random = false;
};

// With probability plan.random_keypoint_fraction, distinct uniform surface
// points; otherwise the model's farthest-point keypoints.
KeypointDraw keypoint_sampler(const ObjectModel& model, Rng& rng, const EpochPlan& plan = {});

struct RecallOptions {
  int test_episodes = 500;
  VerificationThresholds thresholds;
  std::uint64_t seed = 0;
  Eigen::Vector2d bin_extent{600.0, 450.0};
  double floor_z = 800.0;
};

// Fraction of fresh single-object, single-proposal episodes whose calibrated
// proposal verifies against the true pose.
double evaluate_recall(const ErrorModel& proposer, const Calibration& calibration,
                       const ObjectModel& model, const RecallOptions& options);

// Training pairs from the accepted samples of every train task, in episode
// order. The verified pose is spun about the part axis to the representative
// closest to the annotation, since that rotation is unobservable.
std::vector<CalibrationPair> calibration_pairs(const EpisodeStore& store, const ObjectModel& model,
                                               const VerificationThresholds& thresholds = {});

struct CurvePoint {
  int n_samples = 0;
  double recall = 0.0;
  std::uint64_t seed = 0;
};

inline const std::vector<int> kDefaultCheckpoints{0, 1, 10, 20, 200, 500, 1000};

// For each checkpoint n (skipping those beyond the available samples) fits a
// calibration on the first n pairs and evaluates recall for every seed. Each
// seed reuses the same test episodes across checkpoints.
std::vector<CurvePoint> learning_curve(const std::vector<CalibrationPair>& pairs,
                                       const std::vector<int>& checkpoints,
                                       const std::vector<std::uint64_t>& seeds,
                                       const ErrorModel& proposer, const ObjectModel& model,
                                       RecallOptions options);

std::vector<CurvePoint> learning_curve(const EpisodeStore& store,
                                       const std::vector<int>& checkpoints,
                                       const std::vector<std::uint64_t>& seeds,
                                       const ErrorModel& proposer, const ObjectModel& model,
                                       const RecallOptions& options);

// Header "n_samples,recall,seed", one row per point.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

// ---------------------------------------------------------------------------

template <class T>
std::vector<T> epoch_sampler(const std::vector<T>& real, const std::vector<T>& base,
                             const EpochPlan& plan, Rng& rng) {
  plan.validate();
  if (base.empty()) throw InvalidArgument("epoch_sampler needs a non-empty base set");
  const int total = plan.total();
  const double p_real =
      real.empty() ? 0.0 : static_cast<double>(plan.real_count) / static_cast<double>(total);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_base(0, base.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_real(0, real.empty() ? 0 : real.size() - 1);
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    if (p_real > 0.0 && unit(rng) < p_real) {
      out.push_back(real[pick_real(rng)]);
    } else {
      out.push_back(base[pick_base(rng)]);
    }
  }
  return out;
}

}  // namespace dataengine
