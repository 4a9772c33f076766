#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dataengine/episode_store.hpp"
#include "dataengine/metrics.hpp"
#include "dataengine/pose_solver.hpp"
#include "dataengine/proposer.hpp"

namespace dataengine {

enum class BinId { kA, kB };

inline BinId other(BinId b) { return b == BinId::kA ? BinId::kB : BinId::kA; }

// Both bins share one footprint under the camera (camera at the origin,
// looking along +z); only the bin being picked from is rendered.
struct SceneState {
  std::vector<ObjectTruth> objects;  // camera frame
  std::vector<BinId> bins;           // parallel to objects
  Eigen::Vector2d bin_extent{600.0, 450.0};  // mm, centred on the optical axis
  double floor_z = 800.0;                    // mm from the camera
  int bin_a_count = 0;
  int bin_b_count = 0;
  int next_object_id = 0;

  SceneTruth in_bin(BinId bin) const;
  int count(BinId bin) const { return bin == BinId::kA ? bin_a_count : bin_b_count; }
  // Throws InvalidArgument when counts, extents or spacing are inconsistent.
  void validate(double min_spacing_mm) const;
};

struct DisturbanceModel {
  double p_move = 0.0;
  double move_sigma_t = 0.0;  // mm
  double move_sigma_r = 0.0;  // degrees
  double p_drop = 0.0;
  double p_pushout = 0.0;
  // Probability that a hypothesis admits a reachable, collision-free grasp.
  double p_feasible = 1.0;

  void validate() const;
};

struct InHandObservationModel {
  double obs_sigma_xy = 0.0;  // mm
  double obs_sigma_rz = 0.0;  // degrees
  // Gripper held in front of the overhead camera.
  Pose cam_T_tcp = Pose::from_translation({0.0, 0.0, 600.0});

  void validate() const;
};

struct SensorModel {
  double sigma_mm = 0.0;
  double dropout = 0.0;

  void validate() const;
};

// Random stable resting pose: axis parallel to the floor, random yaw and
// spin, origin uniform over the bin footprint.
Pose random_lying_pose(const ObjectModel& model, const Eigen::Vector2d& bin_extent,
                       double floor_z, Rng& rng);

// n objects in bin A, pairwise centre distance >= model diameter.
// Throws OverfullBin when rejection sampling gives up.
SceneState spawn_scene(int n, const ObjectModel& model, const Eigen::Vector2d& bin_extent,
                       Rng& rng, double floor_z = 800.0);

// Drops one new object into a bin at a free spot; false if none was found.
bool place_object(SceneState& scene, BinId bin, const ObjectModel& model, Rng& rng,
                  std::optional<int> object_id = std::nullopt);
void remove_object(SceneState& scene, int object_id);

// Depth-sensor surrogate over the objects of one bin: points whose outward
// normal faces away from the camera are culled, then Gaussian noise and
// random dropout are applied. source_ids carries the object id per point.
PointCloud render_cloud(const SceneState& scene, const ObjectModel& model, double sensor_sigma_mm,
                        double dropout, Rng& rng, BinId bin = BinId::kA);

struct GraspOutcome {
  Pose actual_tcp_obj;
  bool succeeded = false;
  bool missed = false;   // no object close enough to the estimate
  bool dropped = false;  // object fell after grasping
  int target_id = -1;
  Pose target_true_pose;  // bin pose of the target before the grasp
  int pushed_out_id = -1;
};

struct GraspOptions {
  // An estimate whose e_adi to every object exceeds this misses the bin.
  double miss_bound_mm = 8.0;
  BinId source = BinId::kA;
};

// Executes a grasp planned from chosen_estimate. The target is the object
// nearest the estimate by e_adi. The object ends up in the TCP at
//   grasp^-1 * estimate^-1 * true_pose * D
// with D a disturbance drawn with probability p_move. A successful grasp
// moves the target into the other bin; a drop removes it from play. Push-out
// may independently remove one other object from the source bin.
GraspOutcome execute_grasp(SceneState& scene, const ObjectModel& model,
                           const Pose& chosen_estimate, const Pose& grasp,
                           const DisturbanceModel& dm, Rng& rng, const GraspOptions& options = {});

// Sets the rotation about the object's own axis to the canonical one: the
// object x-axis is the viewing axis (TCP z) projected off the object axis.
Pose canonicalize_spin(const Pose& tcp_T_obj);

// In-hand template-matching surrogate. The pose is moved into the camera
// frame, perturbed only in x/y translation and rotation about the camera z,
// moved back, and its spin about the object axis canonicalised.
Pose observe_inhand(const Pose& actual_tcp_obj, const InHandObservationModel& om, Rng& rng);

// Success when e_adi <= tolerance_mm and the z-axis error <= tolerance_deg,
// without flip normalisation: a part held upside down cannot be inserted.
bool insertion_attempt(const ObjectModel& model, const Pose& measured_inhand, const Pose& expected,
                       double tolerance_mm = 2.0, double tolerance_deg = 15.0);

// Grasp frame in object coordinates used by the campaign: approach
// perpendicular to the part axis, offset 15% of the height from the centre.
Pose default_grasp(const ObjectModel& model);

struct CampaignConfig {
  int version = 1;

  std::string object_id = "novo_a";
  double radius_mm = 5.0;
  double height_mm = 61.0;
  int n_points = kDefaultCylinderPoints;
  std::uint64_t model_seed = 7;

  ErrorModel error_model;
  DisturbanceModel disturbance;
  InHandObservationModel observation;
  SensorModel sensor;

  int batch_k = 48;
  double depth_tau_mm = 3.0;
  double min_overlap = 0.6;
  double nms_radius_mm = 10.0;

  VerificationThresholds thresholds;
  double insertion_tolerance_mm = 2.0;
  double insertion_tolerance_deg = 15.0;

  int target_train = 1000;
  int target_test = 200;
  // 0 means 50 x (target_train + target_test).
  int max_episodes = 0;

  int bin_a_initial = 30;
  int bin_b_initial = 10;
  int transfers_per_swap = 20;
  Eigen::Vector2d bin_extent{600.0, 450.0};
  double floor_z = 800.0;
  double grasp_miss_mm = 8.0;
  // Keep successfully inserted parts in the fixture instead of the bin.
  bool retain_inserted = false;

  bool write_clouds = true;
  std::string network_type = "zero-shot";
  std::uint64_t seed = 1;
  int threads = 1;
  // Where the CLI writes the store log, clouds and config copy.
  std::string output_dir;

  // Throws ConfigError naming the field.
  void validate() const;
  int episode_cap() const;
  ObjectModel build_model() const;
};

// Fully specified zero-noise, zero-disturbance configuration.
CampaignConfig zero_noise_config();
// Default noise and disturbance used by the stock campaign.
CampaignConfig default_config();

// Ground truth kept for evaluation; never written to the store.
struct EpisodeTruth {
  int episode = 0;
  RecordId cloud_id = 0;
  RecordId inhand_id = 0;  // 0 when the episode ended before inspection
  int target_id = -1;
  Pose true_pose;
  Pose estimate;
  bool grasped = false;
  bool accepted = false;
  bool flipped = false;
  // verify(estimate, true_pose) under the same thresholds.
  bool estimate_is_tp = false;
  bool inserted = false;
  bool test_split = false;
};

struct ObjectLedger {
  int bin_a = 0;
  int bin_b = 0;
  int dropped = 0;   // dropped after grasping or pushed out of the bin
  int inserted = 0;  // held by the insertion fixture
  int refills = 0;
  int initial = 0;
  int batch = 0;

  bool conserved() const {
    return bin_a + bin_b + dropped + inserted == initial + refills * batch;
  }
};

struct CampaignReport {
  int episodes = 0;
  int accepted_train = 0;
  int accepted_test = 0;
  int discarded = 0;
  int no_detection = 0;
  int grasp_failures = 0;
  int insert_attempts = 0;
  int insert_successes = 0;
  bool reached_targets = false;
  bool conservation_held = true;
  ObjectLedger objects;
  std::vector<EpisodeTruth> truth;

  int accepted() const { return accepted_train + accepted_test; }
  double acceptance_rate() const {
    return episodes == 0 ? 0.0 : static_cast<double>(accepted()) / episodes;
  }
  // Accepted samples whose in-bin estimate is a true positive.
  double label_precision() const;
};

using EpisodeObserver = std::function<void(const EpisodeTruth&, const ObjectLedger&)>;

// Runs the collection protocol until both sample targets are met or the
// episode cap is hit. Cloud files go to cloud_dir when given (paths in the
// store are relative to the store's directory).
CampaignReport run_campaign(const CampaignConfig& config, EpisodeStore& store,
                            const std::optional<std::filesystem::path>& cloud_dir = std::nullopt,
                            const EpisodeObserver& observer = {});

// Binary cloud file: "DEPC" magic, uint32 count, float32 xyz triples.
void write_cloud_file(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud_file(const std::filesystem::path& path);

// SplitMix64 mix of (seed, stream, index), for independent sub-streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace dataengine
