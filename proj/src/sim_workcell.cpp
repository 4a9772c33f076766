#include "dataengine/sim_workcell.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "dataengine/errors.hpp"
#include "dataengine/labeling.hpp"

namespace dataengine {

namespace {

constexpr int kPlacementTries = 20000;
constexpr double kSecondsPerEpisode = 15.0;

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ index);
}

SceneTruth SceneState::in_bin(BinId bin) const {
  SceneTruth out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (bins[i] == bin) out.push_back(objects[i]);
  }
  return out;
}

void SceneState::validate(double min_spacing_mm) const {
  if (objects.size() != bins.size()) throw InvalidArgument("scene bins do not match objects");
  int a = 0, b = 0;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    (bins[i] == BinId::kA ? a : b)++;
    const Vec3& t = objects[i].pose.translation;
    if (std::abs(t.x()) > 0.5 * bin_extent.x() || std::abs(t.y()) > 0.5 * bin_extent.y()) {
      throw InvalidArgument("object " + std::to_string(objects[i].id) + " is outside the bin");
    }
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      if (bins[j] != bins[i]) continue;
      if ((objects[j].pose.translation - t).norm() < min_spacing_mm) {
        throw InvalidArgument("objects overlap");
      }
    }
  }
  if (a != bin_a_count || b != bin_b_count) throw InvalidArgument("bin counts are stale");
}

void DisturbanceModel::validate() const {
  if (!probability(p_move)) throw ConfigError("disturbance.p_move", "must be in [0, 1]");
  if (!probability(p_drop)) throw ConfigError("disturbance.p_drop", "must be in [0, 1]");
  if (!probability(p_pushout)) throw ConfigError("disturbance.p_pushout", "must be in [0, 1]");
  if (!probability(p_feasible)) throw ConfigError("disturbance.p_feasible", "must be in [0, 1]");
  if (!(move_sigma_t >= 0.0)) throw ConfigError("disturbance.move_sigma_t_mm", "must be >= 0");
  if (!(move_sigma_r >= 0.0)) throw ConfigError("disturbance.move_sigma_r_deg", "must be >= 0");
}

void InHandObservationModel::validate() const {
  if (!(obs_sigma_xy >= 0.0)) throw ConfigError("observation.obs_sigma_xy_mm", "must be >= 0");
  if (!(obs_sigma_rz >= 0.0)) throw ConfigError("observation.obs_sigma_rz_deg", "must be >= 0");
  if (!cam_T_tcp.is_valid(1e-6)) throw ConfigError("observation.cam_T_tcp", "not rigid");
}

void SensorModel::validate() const {
  if (!(sigma_mm >= 0.0)) throw ConfigError("sensor.sigma_mm", "must be >= 0");
  if (!probability(dropout)) throw ConfigError("sensor.dropout", "must be in [0, 1]");
}

Pose random_lying_pose(const ObjectModel& model, const Eigen::Vector2d& bin_extent,
                       double floor_z, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double yaw = 360.0 * unit(rng);
  const double spin = 360.0 * unit(rng);
  // Axis along camera x, then yaw about the camera axis.
  const Mat3 lay = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()).toRotationMatrix();
  Pose p;
  p.rotation = rotation_z(yaw) * lay * rotation_z(spin);
  p.translation = Vec3((unit(rng) - 0.5) * bin_extent.x(), (unit(rng) - 0.5) * bin_extent.y(),
                       floor_z - model.stable_rest_height());
  return p;
}

bool place_object(SceneState& scene, BinId bin, const ObjectModel& model, Rng& rng,
                  std::optional<int> object_id) {
  const double spacing = model.diameter();
  for (int attempt = 0; attempt < kPlacementTries; ++attempt) {
    const Pose p = random_lying_pose(model, scene.bin_extent, scene.floor_z, rng);
    bool free = true;
    for (std::size_t i = 0; i < scene.objects.size() && free; ++i) {
      free = scene.bins[i] != bin ||
             (scene.objects[i].pose.translation - p.translation).norm() >= spacing;
    }
    if (!free) continue;
    const int id = object_id ? *object_id : scene.next_object_id++;
    scene.objects.push_back({id, p});
    scene.bins.push_back(bin);
    (bin == BinId::kA ? scene.bin_a_count : scene.bin_b_count)++;
    return true;
  }
  return false;
}

void remove_object(SceneState& scene, int object_id) {
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (scene.objects[i].id != object_id) continue;
    (scene.bins[i] == BinId::kA ? scene.bin_a_count : scene.bin_b_count)--;
    scene.objects.erase(scene.objects.begin() + static_cast<std::ptrdiff_t>(i));
    scene.bins.erase(scene.bins.begin() + static_cast<std::ptrdiff_t>(i));
    return;
  }
  throw NotFound("no object " + std::to_string(object_id) + " in the scene");
}

SceneState spawn_scene(int n, const ObjectModel& model, const Eigen::Vector2d& bin_extent,
                       Rng& rng, double floor_z) {
  if (n < 1) throw InvalidArgument("spawn_scene needs n >= 1");
  if (!(bin_extent.x() > 0.0 && bin_extent.y() > 0.0)) {
    throw InvalidArgument("bin extent must be positive");
  }
  SceneState scene;
  scene.bin_extent = bin_extent;
  scene.floor_z = floor_z;
  for (int i = 0; i < n; ++i) {
    if (!place_object(scene, BinId::kA, model, rng)) {
      throw OverfullBin("could not place object " + std::to_string(i + 1) + " of " +
                        std::to_string(n));
    }
  }
  return scene;
}

PointCloud render_cloud(const SceneState& scene, const ObjectModel& model, double sensor_sigma_mm,
                        double dropout, Rng& rng, BinId bin) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& pts = model.points();
  const auto& normals = model.normals();
  PointCloud out;
  for (std::size_t o = 0; o < scene.objects.size(); ++o) {
    if (scene.bins[o] != bin) continue;
    const Pose& pose = scene.objects[o].pose;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 n_obj = normals.empty() ? Vec3(pts[i].x(), pts[i].y(), 0.0) : normals[i];
      Vec3 w = pose.apply(pts[i]);
      // Camera at the origin: keep points whose normal faces it.
      if ((pose.rotation * n_obj).dot(-w) <= 0.0) continue;
      if (dropout > 0.0 && unit(rng) < dropout) continue;
      if (sensor_sigma_mm > 0.0) w += Vec3(g(rng), g(rng), g(rng)) * sensor_sigma_mm;
      out.points.push_back(w);
      out.source_ids.push_back(scene.objects[o].id);
    }
  }
  return out;
}

GraspOutcome execute_grasp(SceneState& scene, const ObjectModel& model,
                           const Pose& chosen_estimate, const Pose& grasp,
                           const DisturbanceModel& dm, Rng& rng, const GraspOptions& options) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GraspOutcome out;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (scene.bins[i] != options.source) continue;
    const Pose& t = scene.objects[i].pose;
    if (e_adi_at_least(model, chosen_estimate, t, std::min(best, options.miss_bound_mm))) continue;
    const double d = e_adi(model, chosen_estimate, t);
    if (d < best) {
      best = d;
      out.target_id = scene.objects[i].id;
      out.target_true_pose = t;
    }
  }

  // Push-out happens whether or not the fingers find the part.
  const bool push = dm.p_pushout > 0.0 && unit(rng) < dm.p_pushout;
  if (push) {
    std::vector<int> others;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      if (scene.bins[i] == options.source && scene.objects[i].id != out.target_id) {
        others.push_back(scene.objects[i].id);
      }
    }
    if (!others.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      out.pushed_out_id = others[pick(rng)];
      remove_object(scene, out.pushed_out_id);
    }
  }

  if (out.target_id < 0) {
    out.missed = true;
    return out;
  }

  Pose disturbance;
  if (dm.p_move > 0.0 && unit(rng) < dm.p_move) {
    disturbance = sample_perturbation(dm.move_sigma_t, dm.move_sigma_r, rng);
  }
  out.actual_tcp_obj =
      invert(grasp) * invert(chosen_estimate) * out.target_true_pose * disturbance;

  const bool drop = dm.p_drop > 0.0 && unit(rng) < dm.p_drop;
  remove_object(scene, out.target_id);
  if (drop) {
    out.dropped = true;
    return out;
  }
  out.succeeded = true;
  if (!place_object(scene, other(options.source), model, rng, out.target_id)) {
    // Destination full: the part is lost like a drop, but the grasp itself
    // worked and the in-hand inspection still happens.
    out.dropped = true;
  }
  return out;
}

Pose canonicalize_spin(const Pose& tcp_T_obj) {
  const Vec3 axis = tcp_T_obj.rotation.col(2).normalized();
  Vec3 x = Vec3::UnitZ() - Vec3::UnitZ().dot(axis) * axis;
  if (x.norm() < 1e-9) x = Vec3::UnitX() - Vec3::UnitX().dot(axis) * axis;
  x.normalize();
  Pose out = tcp_T_obj;
  out.rotation.col(0) = x;
  out.rotation.col(1) = axis.cross(x);
  out.rotation.col(2) = axis;
  return out;
}

Pose observe_inhand(const Pose& actual_tcp_obj, const InHandObservationModel& om, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Pose cam_obj = compose(om.cam_T_tcp, actual_tcp_obj);
  if (om.obs_sigma_xy > 0.0 || om.obs_sigma_rz > 0.0) {
    const double dx = g(rng) * om.obs_sigma_xy;
    const double dy = g(rng) * om.obs_sigma_xy;
    const double dr = g(rng) * om.obs_sigma_rz;
    cam_obj.rotation = rotation_z(dr) * cam_obj.rotation;
    cam_obj.translation += Vec3(dx, dy, 0.0);
  }
  return canonicalize_spin(compose(invert(om.cam_T_tcp), cam_obj));
}

bool insertion_attempt(const ObjectModel& model, const Pose& measured_inhand, const Pose& expected,
                       double tolerance_mm, double tolerance_deg) {
  return e_adi(model, expected, measured_inhand) <= tolerance_mm &&
         angular_error_z(expected, measured_inhand) <= tolerance_deg;
}

Pose default_grasp(const ObjectModel& model) {
  // Object in the TCP frame: axis along TCP y, object x along the approach
  // axis (already spin-canonical), centre 15% of the height along the axis.
  Pose obj_in_tcp;
  obj_in_tcp.rotation << 0, 1, 0,  //
      0, 0, 1,                     //
      1, 0, 0;
  obj_in_tcp.translation = Vec3(0.0, 0.15 * model.height(), 0.0);
  return invert(obj_in_tcp);
}

void CampaignConfig::validate() const {
  if (version != 1) throw ConfigError("version", "unsupported version " + std::to_string(version));
  if (object_id.empty() || object_id.find_first_of(" \t\n") != std::string::npos) {
    throw ConfigError("object.id", "must be a single non-empty token");
  }
  if (!(radius_mm > 0.0)) throw ConfigError("object.radius_mm", "must be positive");
  if (!(height_mm > 0.0)) throw ConfigError("object.height_mm", "must be positive");
  if (n_points < 64) throw ConfigError("object.n_points", "must be >= 64");
  try {
    error_model.validate();
  } catch (const InvalidArgument& e) {
    std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(' ')), msg);
  }
  disturbance.validate();
  observation.validate();
  sensor.validate();
  if (batch_k < 1) throw ConfigError("batch_k", "must be >= 1");
  if (!(depth_tau_mm > 0.0)) throw ConfigError("depth_check.tau_mm", "must be positive");
  if (!(min_overlap >= 0.0 && min_overlap <= 1.0)) {
    throw ConfigError("depth_check.min_overlap", "must be in [0, 1]");
  }
  if (!(nms_radius_mm >= 0.0)) throw ConfigError("depth_check.nms_radius_mm", "must be >= 0");
  if (!(thresholds.adi_mm > 0.0)) throw ConfigError("thresholds.adi_mm", "must be positive");
  if (!(thresholds.angle_deg > 0.0)) throw ConfigError("thresholds.angle_deg", "must be positive");
  if (!(thresholds.flip_trigger_deg > 0.0)) {
    throw ConfigError("thresholds.flip_trigger_deg", "must be positive");
  }
  if (thresholds.flip_trigger_deg < thresholds.angle_deg) {
    throw ConfigError("thresholds.flip_trigger_deg", "must be >= thresholds.angle_deg");
  }
  if (!(insertion_tolerance_mm >= 0.0)) throw ConfigError("insertion.tolerance_mm", "must be >= 0");
  if (!(insertion_tolerance_deg >= 0.0)) {
    throw ConfigError("insertion.tolerance_deg", "must be >= 0");
  }
  if (target_train < 0) throw ConfigError("targets.train", "must be >= 0");
  if (target_test < 0) throw ConfigError("targets.test", "must be >= 0");
  if (target_train + target_test < 1) throw ConfigError("targets", "nothing to collect");
  if (max_episodes < 0) throw ConfigError("targets.max_episodes", "must be >= 0");
  if (bin_a_initial < 1) throw ConfigError("workcell.bin_a_initial", "must be >= 1");
  if (bin_b_initial < 0) throw ConfigError("workcell.bin_b_initial", "must be >= 0");
  if (transfers_per_swap < 1) throw ConfigError("workcell.transfers_per_swap", "must be >= 1");
  if (!(bin_extent.x() > 0.0 && bin_extent.y() > 0.0)) {
    throw ConfigError("workcell.bin_extent_mm", "must be positive");
  }
  if (!(floor_z > radius_mm)) throw ConfigError("workcell.floor_z_mm", "must exceed the radius");
  if (!(grasp_miss_mm > 0.0)) throw ConfigError("workcell.grasp_miss_mm", "must be positive");
  if (threads < 1) throw ConfigError("threads", "must be >= 1");
  // A loose packing bound; rejection sampling reports the real failure.
  const double diameter = std::hypot(2.0 * radius_mm, height_mm);
  const double disk = std::numbers::pi * 0.25 * diameter * diameter;
  const double area = (bin_extent.x() + diameter) * (bin_extent.y() + diameter);
  const int total = bin_a_initial + bin_b_initial;
  if (total * disk * 0.5 > area) throw ConfigError("workcell.bin_extent_mm", "too small for the parts");
}

int CampaignConfig::episode_cap() const {
  return max_episodes > 0 ? max_episodes : 50 * (target_train + target_test);
}

ObjectModel CampaignConfig::build_model() const {
  return sample_cylinder_model(radius_mm, height_mm, n_points, model_seed, object_id);
}

CampaignConfig zero_noise_config() {
  CampaignConfig c;
  c.error_model = ErrorModel{};
  c.disturbance = DisturbanceModel{};
  c.observation.obs_sigma_xy = 0.0;
  c.observation.obs_sigma_rz = 0.0;
  c.sensor = SensorModel{};
  return c;
}

CampaignConfig default_config() {
  CampaignConfig c;
  c.error_model.sigma_t = 0.8;
  c.error_model.sigma_r = 2.0;
  c.error_model.p_flip = 0.15;
  c.error_model.p_gross = 0.10;
  c.disturbance.p_move = 0.05;
  c.disturbance.move_sigma_t = 3.0;
  c.disturbance.move_sigma_r = 5.0;
  c.disturbance.p_drop = 0.05;
  c.disturbance.p_pushout = 0.02;
  c.disturbance.p_feasible = 0.9;
  c.observation.obs_sigma_xy = 0.2;
  c.observation.obs_sigma_rz = 0.5;
  c.sensor.sigma_mm = 0.3;
  c.sensor.dropout = 0.1;
  return c;
}

double CampaignReport::label_precision() const {
  int accepted = 0, correct = 0;
  for (const auto& t : truth) {
    if (!t.accepted) continue;
    ++accepted;
    if (t.estimate_is_tp) ++correct;
  }
  return accepted == 0 ? 1.0 : static_cast<double>(correct) / accepted;
}

void write_cloud_file(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write cloud " + path.string());
  out.write("DEPC", 4);
  const auto n = static_cast<std::uint32_t>(cloud.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  std::vector<float> buf;
  buf.reserve(3 * cloud.size());
  for (const Vec3& p : cloud.points) {
    buf.push_back(static_cast<float>(p.x()));
    buf.push_back(static_cast<float>(p.y()));
    buf.push_back(static_cast<float>(p.z()));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw Error("write failed: " + path.string());
}

PointCloud read_cloud_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open cloud " + path.string());
  char magic[4];
  std::uint32_t n = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, "DEPC", 4) != 0) throw Error("not a cloud file: " + path.string());
  std::vector<float> buf(3 * static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw Error("truncated cloud file: " + path.string());
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) cloud.points.emplace_back(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
  return cloud;
}

namespace {

enum Stream : std::uint64_t {
  kSceneStream = 1,
  kRenderStream,
  kBatchStream,
  kFeasibleStream,
  kGraspStream,
  kObserveStream,
};

}  // namespace

CampaignReport run_campaign(const CampaignConfig& config, EpisodeStore& store,
                            const std::optional<std::filesystem::path>& cloud_dir,
                            const EpisodeObserver& observer) {
  config.validate();
  const ObjectModel model = config.build_model();
  const Pose grasp = default_grasp(model);
  const int cap = config.episode_cap();

  if (cloud_dir && config.write_clouds) std::filesystem::create_directories(*cloud_dir);

  std::uint64_t refill_index = 0;
  const auto fill = [&](SceneState& scene) {
    Rng rng(derive_seed(config.seed, kSceneStream, refill_index++));
    scene = spawn_scene(config.bin_a_initial, model, config.bin_extent, rng, config.floor_z);
    for (int i = 0; i < config.bin_b_initial; ++i) {
      if (!place_object(scene, BinId::kB, model, rng)) throw OverfullBin("bin B refill failed");
    }
  };

  CampaignReport report;
  ObjectLedger& ledger = report.objects;
  ledger.initial = config.bin_a_initial + config.bin_b_initial;
  ledger.batch = ledger.initial;

  SceneState scene;
  fill(scene);
  BinId source = BinId::kA;
  int transfers = 0;

  BinVolume volume;
  volume.center = Vec3(0.0, 0.0, config.floor_z - model.stable_rest_height());
  volume.half_extent = Vec3(0.5 * config.bin_extent.x(), 0.5 * config.bin_extent.y(),
                            model.stable_rest_height());

  const auto new_task = [&](const char* split) {
    return store.append(TaskRecord{0, config.object_id, config.network_type, split});
  };
  RecordId task = config.target_train > 0 ? new_task("train") : new_task("test");
  bool test_phase = config.target_train == 0;

  const auto targets_met = [&] {
    return report.accepted_train >= config.target_train &&
           report.accepted_test >= config.target_test;
  };

  while (!targets_met() && report.episodes < cap) {
    if (scene.count(source) == 0 || transfers >= config.transfers_per_swap) {
      if (scene.count(other(source)) > 0) {
        source = other(source);
      } else if (scene.count(source) == 0) {
        fill(scene);
        source = BinId::kA;
        ++ledger.refills;
      }
      transfers = 0;
    }

    const int episode = ++report.episodes;
    EpisodeTruth truth;
    truth.episode = episode;
    truth.test_split = test_phase;

    Rng render_rng(derive_seed(config.seed, kRenderStream, episode));
    const PointCloud cloud =
        render_cloud(scene, model, config.sensor.sigma_mm, config.sensor.dropout, render_rng, source);

    std::string cloud_file = "none";
    if (cloud_dir && config.write_clouds) {
      char name[48];
      std::snprintf(name, sizeof name, "ep_%06d.bin", episode);
      write_cloud_file(*cloud_dir / name, cloud);
      cloud_file = (cloud_dir->filename() / name).generic_string();
    }
    truth.cloud_id =
        store.append(CloudRecord{0, task, cloud_file, kSecondsPerEpisode * (episode - 1)});

    const SceneTruth visible = scene.in_bin(source);
    const PoseProposerFn proposer = [&](std::uint64_t hyp_seed) {
      Rng rng(hyp_seed);
      return oracle_propose(visible, model, config.error_model, rng, volume).pose;
    };
    BatchOptions batch;
    batch.k = config.batch_k;
    batch.tau_mm = config.depth_tau_mm;
    batch.min_overlap = config.min_overlap;
    batch.nms_radius_mm = config.nms_radius_mm;
    batch.seed = derive_seed(config.seed, kBatchStream, episode);
    batch.threads = config.threads;
    const std::vector<PoseHypothesis> hyps = estimate_batch(cloud, model, proposer, batch);

    // Highest-scoring hypothesis that admits a grasp.
    Rng feasible_rng(derive_seed(config.seed, kFeasibleStream, episode));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const PoseHypothesis* chosen = nullptr;
    for (const auto& h : hyps) {
      if (unit(feasible_rng) < config.disturbance.p_feasible) {
        chosen = &h;
        break;
      }
    }

    const auto finish = [&] {
      ledger.bin_a = scene.bin_a_count;
      ledger.bin_b = scene.bin_b_count;
      if (!ledger.conserved()) report.conservation_held = false;
      if (observer) observer(truth, ledger);
      report.truth.push_back(truth);
    };

    if (!chosen) {
      ++report.no_detection;
      finish();
      continue;
    }

    const RecordId pose_id = store.append(PoseEstRecord{0, truth.cloud_id, chosen->pose, chosen->score});
    // The store rounds poses to file precision; plan from what was recorded
    // so that replaying the log reproduces every decision.
    const Pose estimate = std::get<PoseEstRecord>(store.get(pose_id)).pose;
    truth.estimate = estimate;

    Rng grasp_rng(derive_seed(config.seed, kGraspStream, episode));
    GraspOptions gopts;
    gopts.miss_bound_mm = config.grasp_miss_mm;
    gopts.source = source;
    const GraspOutcome outcome =
        execute_grasp(scene, model, estimate, grasp, config.disturbance, grasp_rng, gopts);
    if (outcome.pushed_out_id >= 0) ++ledger.dropped;
    truth.target_id = outcome.target_id;
    truth.true_pose = outcome.target_true_pose;

    const RecordId grasp_id = store.append(GraspRecord{0, pose_id, grasp, outcome.succeeded});
    if (outcome.dropped) ++ledger.dropped;
    if (!outcome.succeeded) {
      ++report.grasp_failures;
      finish();
      continue;
    }
    ++transfers;
    truth.grasped = true;
    truth.estimate_is_tp = verify(model, estimate, outcome.target_true_pose, config.thresholds).is_tp;

    Rng observe_rng(derive_seed(config.seed, kObserveStream, episode));
    const Pose measured = observe_inhand(outcome.actual_tcp_obj, config.observation, observe_rng);
    const Pose expected = expected_grasp_pose(estimate, grasp);
    truth.inhand_id = store.append(InHandRecord{0, grasp_id, measured, expected});
    const InHandRecord stored = std::get<InHandRecord>(store.get(truth.inhand_id));

    const LabelDecision decision = label_episode(stored.expected_pose, stored.measured_pose, model,
                                                 config.thresholds, truth.inhand_id);
    truth.accepted = decision.verdict == Verdict::kAcceptTrainingSample;
    truth.flipped = decision.verification.flipped;
    if (truth.accepted) {
      if (test_phase) {
        ++report.accepted_test;
      } else {
        ++report.accepted_train;
      }
    } else {
      ++report.discarded;
    }

    truth.inserted = insertion_attempt(model, stored.measured_pose, stored.expected_pose,
                                       config.insertion_tolerance_mm,
                                       config.insertion_tolerance_deg);
    ++report.insert_attempts;
    if (truth.inserted) ++report.insert_successes;
    store.append(InsertionRecord{0, truth.inhand_id, truth.inserted});
    if (truth.inserted && config.retain_inserted && !outcome.dropped) {
      remove_object(scene, outcome.target_id);
      ++ledger.inserted;
    }

    if (!test_phase && report.accepted_train >= config.target_train && config.target_test > 0) {
      task = new_task("test");
      test_phase = true;
    }
    finish();
  }

  report.reached_targets = targets_met();
  return report;
}

}  // namespace dataengine
