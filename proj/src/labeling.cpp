#include "dataengine/labeling.hpp"

#include <ostream>

#include "dataengine/errors.hpp"

namespace dataengine {

Pose expected_inhand_pose(const Pose& cam_T_tcp, const Pose& tcp_T_obj) {
  return compose(cam_T_tcp, tcp_T_obj);
}

Pose expected_grasp_pose(const Pose& bin_pose_estimate, const Pose& grasp_in_object_frame) {
  (void)bin_pose_estimate;
  return invert(grasp_in_object_frame);
}

LabelDecision label_episode(const Pose& expected, const Pose& measured_inhand,
                            const ObjectModel& model, const VerificationThresholds& thresholds,
                            RecordId episode_id) {
  LabelDecision d;
  d.episode_id = episode_id;
  d.verification = verify(model, expected, measured_inhand, thresholds);
  d.verdict = d.verification.is_tp ? Verdict::kAcceptTrainingSample : Verdict::kDiscard;
  return d;
}

LabelingResult label_task(const EpisodeStore& store, RecordId task_id, const ObjectModel& model,
                          const VerificationThresholds& thresholds) {
  const Record root = store.get(task_id);
  const auto* task = std::get_if<TaskRecord>(&root);
  if (!task) throw SchemaError("record " + std::to_string(task_id) + " is not a task");

  LabelingResult out;
  for (const Record& r : store.records()) {
    if (level_of(r) != Level::kInHand) continue;
    const Lineage chain = store.lineage(id_of(r));
    if (chain.task.id != task_id) continue;
    if (chain.pose_est.cloud_id != chain.cloud.id || chain.cloud.task_id != chain.task.id) {
      throw IntegrityError("lineage of inhand " + std::to_string(chain.inhand.id) +
                           " does not close");
    }

    LabelDecision d = label_episode(chain.inhand.expected_pose, chain.inhand.measured_pose, model,
                                    thresholds, chain.inhand.id);
    if (d.verdict == Verdict::kAcceptTrainingSample) {
      TrainingSample s;
      s.episode_id = chain.inhand.id;
      s.scene_cloud_ref = chain.cloud.id;
      s.cloud_file = chain.cloud.cloud_file;
      s.object_id = task->object_id;
      s.flipped = d.verification.flipped;
      s.annotated_pose = s.flipped ? flip_y(chain.pose_est.pose) : chain.pose_est.pose;
      s.verified_pose = compose(compose(chain.pose_est.pose, chain.grasp.grasp_in_object_frame),
                                chain.inhand.measured_pose);
      out.samples.push_back(std::move(s));
      ++out.counts.accepted;
      if (d.verification.flipped) ++out.counts.flipped;
    } else {
      ++out.counts.discarded;
    }
    out.decisions.push_back(d);
  }
  return out;
}

std::vector<TrainingSample> build_training_set(const EpisodeStore& store, RecordId task_id,
                                               const ObjectModel& model,
                                               const VerificationThresholds& thresholds) {
  return label_task(store, task_id, model, thresholds).samples;
}

void write_training_set(std::ostream& out, const std::vector<TrainingSample>& samples) {
  for (const TrainingSample& s : samples) {
    out << s.episode_id << '\t' << s.object_id << '\t' << s.cloud_file << '\t'
        << format_pose_fields(s.annotated_pose) << '\n';
  }
}

}  // namespace dataengine
