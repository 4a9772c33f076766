#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dataengine/episode_store.hpp"
#include "dataengine/metrics.hpp"

namespace dataengine {

enum class Verdict { kAcceptTrainingSample, kDiscard };

struct LabelDecision {
  Verdict verdict = Verdict::kDiscard;
  VerificationResult verification;
  RecordId episode_id = 0;  // the InHand record
};

// Object pose in the camera frame during in-hand inspection:
// cam_T_obj = cam_T_tcp * tcp_T_obj.
Pose expected_inhand_pose(const Pose& cam_T_tcp, const Pose& tcp_T_obj);

// Object pose in the TCP frame predicted by the plan. The TCP was servoed to
// bin_estimate * grasp, so an exact estimate leaves the object at grasp^-1.
Pose expected_grasp_pose(const Pose& bin_pose_estimate, const Pose& grasp_in_object_frame);

// Accept exactly when the verification gate reports a true positive. Every
// negative is discarded, whatever its true condition.
LabelDecision label_episode(const Pose& expected, const Pose& measured_inhand,
                            const ObjectModel& model, const VerificationThresholds& thresholds,
                            RecordId episode_id = 0);

struct TrainingSample {
  RecordId episode_id = 0;
  RecordId scene_cloud_ref = 0;
  std::string cloud_file;
  std::string object_id;
  // The in-bin estimate that passed verification, turned by R_y when the
  // match needed the flip.
  Pose annotated_pose;
  // In-bin pose implied by the in-hand measurement: estimate * grasp * measured.
  Pose verified_pose;
  bool flipped = false;
};

struct LabelCounts {
  std::size_t accepted = 0;
  std::size_t discarded = 0;
  std::size_t flipped = 0;
};

struct LabelingResult {
  std::vector<LabelDecision> decisions;  // one per InHand record, by id
  std::vector<TrainingSample> samples;   // accepted only, by episode id
  LabelCounts counts;
};

// Labels every InHand episode under the task.
LabelingResult label_task(const EpisodeStore& store, RecordId task_id, const ObjectModel& model,
                          const VerificationThresholds& thresholds = {});

std::vector<TrainingSample> build_training_set(const EpisodeStore& store, RecordId task_id,
                                               const ObjectModel& model,
                                               const VerificationThresholds& thresholds = {});

// One line per sample:
// <episode_id>\t<object_id>\t<cloud_file>\t<12 pose numbers, R row-major then t>
void write_training_set(std::ostream& out, const std::vector<TrainingSample>& samples);

}  // namespace dataengine
