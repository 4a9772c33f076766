#include "dataengine/config.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "dataengine/errors.hpp"

namespace dataengine {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// One JSON object plus its dotted path. Keys are checked off as they are
// read; finish() rejects anything left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void real(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError(field(key), "out of range");
      }
      out = static_cast<int>(x);
    }
  }

  void unsigned64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned()) {
        out = v->get<std::uint64_t>();
      } else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
        out = static_cast<std::uint64_t>(v->get<std::int64_t>());
      } else {
        throw ConfigError(field(key), "expected a non-negative integer");
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <int N>
  bool vector(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    const json* v = find(key);
    if (!v) return false;
    if (!v->is_array() || v->size() != N) {
      throw ConfigError(field(key), "expected an array of " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) {
      if (!(*v)[i].is_number()) throw ConfigError(field(key), "expected numbers");
      out[i] = (*v)[i].get<double>();
      if (!std::isfinite(out[i])) throw ConfigError(field(key), "must be finite");
    }
    return true;
  }

  std::optional<Section> child(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Section(*v, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3 rotation_vector_deg(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * (aa.angle() / kDegToRad);
}

}  // namespace

CampaignConfig parse_campaign_config(const json& j) {
  CampaignConfig c = default_config();
  Section root(j, "");

  const json* version = root.find("version");
  if (!version) throw ConfigError("version", "missing");
  if (!version->is_number_integer()) throw ConfigError("version", "expected an integer");
  c.version = version->get<int>();
  if (c.version != 1) throw ConfigError("version", "unsupported version " + version->dump());

  if (auto s = root.child("object")) {
    s->string("id", c.object_id);
    s->real("radius_mm", c.radius_mm);
    s->real("height_mm", c.height_mm);
    s->integer("n_points", c.n_points);
    s->unsigned64("model_seed", c.model_seed);
    s->finish();
  }

  if (auto s = root.child("error_model")) {
    s->real("sigma_t_mm", c.error_model.sigma_t);
    s->real("sigma_r_deg", c.error_model.sigma_r);
    s->real("p_flip", c.error_model.p_flip);
    s->real("p_gross", c.error_model.p_gross);
    if (auto b = s->child("bias")) {
      b->vector<3>("translation_mm", c.error_model.bias.translation);
      Vec3 rv = Vec3::Zero();
      if (b->vector<3>("rotation_deg", rv)) {
        const double angle = rv.norm();
        c.error_model.bias.rotation =
            angle > 0.0 ? Eigen::AngleAxisd(angle * kDegToRad, rv / angle).toRotationMatrix()
                        : Mat3::Identity();
      }
      b->finish();
    }
    s->finish();
  }

  if (auto s = root.child("disturbance")) {
    s->real("p_move", c.disturbance.p_move);
    s->real("move_sigma_t_mm", c.disturbance.move_sigma_t);
    s->real("move_sigma_r_deg", c.disturbance.move_sigma_r);
    s->real("p_drop", c.disturbance.p_drop);
    s->real("p_pushout", c.disturbance.p_pushout);
    s->real("p_feasible", c.disturbance.p_feasible);
    s->finish();
  }

  if (auto s = root.child("observation")) {
    s->real("obs_sigma_xy_mm", c.observation.obs_sigma_xy);
    s->real("obs_sigma_rz_deg", c.observation.obs_sigma_rz);
    double standoff = c.observation.cam_T_tcp.translation.z();
    s->real("camera_standoff_mm", standoff);
    if (!(standoff > 0.0)) throw ConfigError("observation.camera_standoff_mm", "must be positive");
    c.observation.cam_T_tcp = Pose::from_translation({0.0, 0.0, standoff});
    s->finish();
  }

  if (auto s = root.child("sensor")) {
    s->real("sigma_mm", c.sensor.sigma_mm);
    s->real("dropout", c.sensor.dropout);
    s->finish();
  }

  root.integer("batch_k", c.batch_k);

  if (auto s = root.child("depth_check")) {
    s->real("tau_mm", c.depth_tau_mm);
    s->real("min_overlap", c.min_overlap);
    s->real("nms_radius_mm", c.nms_radius_mm);
    s->finish();
  }

  if (auto s = root.child("thresholds")) {
    s->real("adi_mm", c.thresholds.adi_mm);
    s->real("angle_deg", c.thresholds.angle_deg);
    s->real("flip_trigger_deg", c.thresholds.flip_trigger_deg);
    s->finish();
  }

  if (auto s = root.child("insertion")) {
    s->real("tolerance_mm", c.insertion_tolerance_mm);
    s->real("tolerance_deg", c.insertion_tolerance_deg);
    s->finish();
  }

  if (auto s = root.child("targets")) {
    s->integer("train", c.target_train);
    s->integer("test", c.target_test);
    s->integer("max_episodes", c.max_episodes);
    s->finish();
  }

  if (auto s = root.child("workcell")) {
    s->integer("bin_a_initial", c.bin_a_initial);
    s->integer("bin_b_initial", c.bin_b_initial);
    s->integer("transfers_per_swap", c.transfers_per_swap);
    s->vector<2>("bin_extent_mm", c.bin_extent);
    s->real("floor_z_mm", c.floor_z);
    s->real("grasp_miss_mm", c.grasp_miss_mm);
    s->boolean("retain_inserted", c.retain_inserted);
    s->boolean("write_clouds", c.write_clouds);
    s->string("network_type", c.network_type);
    s->finish();
  }

  root.unsigned64("seed", c.seed);
  root.integer("threads", c.threads);
  root.string("output_dir", c.output_dir);
  root.finish();

  c.validate();
  return c;
}

CampaignConfig parse_campaign_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return parse_campaign_config(j);
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_campaign_config(buf.str());
}

json to_json(const Pose& bias) {
  const Vec3 rv = rotation_vector_deg(bias.rotation);
  return {{"translation_mm", {bias.translation.x(), bias.translation.y(), bias.translation.z()}},
          {"rotation_deg", {rv.x(), rv.y(), rv.z()}}};
}

json to_json(const CampaignConfig& c) {
  json j;
  j["version"] = c.version;
  j["object"] = {{"id", c.object_id},
                 {"radius_mm", c.radius_mm},
                 {"height_mm", c.height_mm},
                 {"n_points", c.n_points},
                 {"model_seed", c.model_seed}};
  j["error_model"] = {{"sigma_t_mm", c.error_model.sigma_t},
                      {"sigma_r_deg", c.error_model.sigma_r},
                      {"p_flip", c.error_model.p_flip},
                      {"p_gross", c.error_model.p_gross},
                      {"bias", to_json(c.error_model.bias)}};
  j["disturbance"] = {{"p_move", c.disturbance.p_move},
                      {"move_sigma_t_mm", c.disturbance.move_sigma_t},
                      {"move_sigma_r_deg", c.disturbance.move_sigma_r},
                      {"p_drop", c.disturbance.p_drop},
                      {"p_pushout", c.disturbance.p_pushout},
                      {"p_feasible", c.disturbance.p_feasible}};
  j["observation"] = {{"obs_sigma_xy_mm", c.observation.obs_sigma_xy},
                      {"obs_sigma_rz_deg", c.observation.obs_sigma_rz},
                      {"camera_standoff_mm", c.observation.cam_T_tcp.translation.z()}};
  j["sensor"] = {{"sigma_mm", c.sensor.sigma_mm}, {"dropout", c.sensor.dropout}};
  j["batch_k"] = c.batch_k;
  j["depth_check"] = {{"tau_mm", c.depth_tau_mm},
                      {"min_overlap", c.min_overlap},
                      {"nms_radius_mm", c.nms_radius_mm}};
  j["thresholds"] = {{"adi_mm", c.thresholds.adi_mm},
                     {"angle_deg", c.thresholds.angle_deg},
                     {"flip_trigger_deg", c.thresholds.flip_trigger_deg}};
  j["insertion"] = {{"tolerance_mm", c.insertion_tolerance_mm},
                    {"tolerance_deg", c.insertion_tolerance_deg}};
  j["targets"] = {{"train", c.target_train},
                  {"test", c.target_test},
                  {"max_episodes", c.max_episodes}};
  j["workcell"] = {{"bin_a_initial", c.bin_a_initial},
                   {"bin_b_initial", c.bin_b_initial},
                   {"transfers_per_swap", c.transfers_per_swap},
                   {"bin_extent_mm", {c.bin_extent.x(), c.bin_extent.y()}},
                   {"floor_z_mm", c.floor_z},
                   {"grasp_miss_mm", c.grasp_miss_mm},
                   {"retain_inserted", c.retain_inserted},
                   {"write_clouds", c.write_clouds},
                   {"network_type", c.network_type}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace dataengine
