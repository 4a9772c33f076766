#include "dataengine/proposer.hpp"

#include <cmath>

#include "dataengine/errors.hpp"

namespace dataengine {

void ErrorModel::validate() const {
  const auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgument(std::string("error_model.") + name + " must be in [0, 1]");
    }
  };
  prob(p_flip, "p_flip");
  prob(p_gross, "p_gross");
  if (p_flip + p_gross > 1.0) throw InvalidArgument("error_model.p_gross plus p_flip exceeds 1");
  if (!(sigma_t >= 0.0)) throw InvalidArgument("error_model.sigma_t_mm must be >= 0");
  if (!(sigma_r >= 0.0)) throw InvalidArgument("error_model.sigma_r_deg must be >= 0");
  if (!bias.is_valid(1e-6)) throw InvalidArgument("error_model.bias is not a rigid transform");
}

namespace {

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Vec3 v(g(rng), g(rng), g(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

}  // namespace

Pose random_rotation_pose(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng));
  } while (q.norm() < 1e-12);
  q.normalize();
  return Pose::from_rotation(q.toRotationMatrix());
}

Pose sample_perturbation(double sigma_t, double sigma_r, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Pose out;
  if (sigma_t > 0.0) out.translation = Vec3(g(rng), g(rng), g(rng)) * sigma_t;
  if (sigma_r > 0.0) {
    const Vec3 axis = random_unit(rng);
    out.rotation = Pose::from_axis_angle(axis, std::abs(g(rng)) * sigma_r).rotation;
  }
  return out;
}

Proposal oracle_propose(const SceneTruth& scene, const ObjectModel& model, const ErrorModel& em,
                        Rng& rng, const BinVolume& bin) {
  (void)model;
  if (scene.empty()) throw InvalidArgument("oracle_propose on an empty scene");
  std::uniform_int_distribution<std::size_t> pick(0, scene.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const ObjectTruth& target = scene[pick(rng)];
  const double u = unit(rng);
  Proposal out;
  out.target_object_id = target.id;
  if (u < em.p_gross) {
    out.pose = random_rotation_pose(rng);
    for (int i = 0; i < 3; ++i) {
      out.pose.translation[i] =
          bin.center[i] + (2.0 * unit(rng) - 1.0) * bin.half_extent[i];
    }
    return out;
  }
  out.pose = target.pose * em.bias * sample_perturbation(em.sigma_t, em.sigma_r, rng);
  if (u < em.p_gross + em.p_flip) out.pose = flip_y(out.pose);
  return out;
}

KeypointProposal keypoint_propose(const SceneTruth& scene, const ObjectModel& model,
                                  double kp_noise_mm, double outlier_rate, Rng& rng,
                                  const BinVolume& bin) {
  if (scene.empty()) throw InvalidArgument("keypoint_propose on an empty scene");
  if (model.keypoints().size() < 3) throw InvalidArgument("model needs at least 3 keypoints");
  if (!(outlier_rate >= 0.0 && outlier_rate <= 1.0)) {
    throw InvalidArgument("outlier_rate must be in [0, 1]");
  }
  std::uniform_int_distribution<std::size_t> pick(0, scene.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);

  const ObjectTruth& target = scene[pick(rng)];
  KeypointProposal out;
  out.target_object_id = target.id;
  const auto& kps = model.keypoints();
  for (const Vec3& k : kps) {
    Vec3 s = target.pose.apply(k);
    if (kp_noise_mm > 0.0) s += Vec3(g(rng), g(rng), g(rng)) * kp_noise_mm;
    out.correspondences.push_back({k, s});
  }

  const auto n_out = static_cast<std::size_t>(std::lround(outlier_rate * kps.size()));
  // Choose which correspondences to corrupt by a partial Fisher-Yates shuffle.
  std::vector<std::size_t> order(kps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < n_out; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, order.size() - 1);
    std::swap(order[i], order[d(rng)]);
    Vec3 s;
    for (int a = 0; a < 3; ++a) s[a] = bin.center[a] + (2.0 * unit(rng) - 1.0) * bin.half_extent[a];
    out.correspondences[order[i]].scene_point = s;
  }
  return out;
}

Proposal apply_calibration(const Proposal& p, const Calibration& cal) {
  return {compose(p.pose, invert(cal.bias_estimate)), p.target_object_id};
}

const std::vector<ObjectPreset>& object_presets() {
  static const std::vector<ObjectPreset> presets = [] {
    const auto em = [](double st, double sr, double pf, double pg) {
      ErrorModel e;
      e.sigma_t = st;
      e.sigma_r = sr;
      e.p_flip = pf;
      e.p_gross = pg;
      return e;
    };
    return std::vector<ObjectPreset>{
        {"novo_a", 5.0, 61.0, em(0.8, 2.0, 0.15, 0.10)},
        {"novo_b", 6.0, 48.0, em(1.0, 2.5, 0.10, 0.15)},
        {"novo_c", 7.0, 40.0, em(1.2, 3.0, 0.20, 0.20)},
        {"wrs_screw", 4.0, 32.0, em(1.5, 4.0, 0.05, 0.25)},
    };
  }();
  return presets;
}

const ObjectPreset& object_preset(const std::string& name) {
  for (const auto& p : object_presets()) {
    if (p.name == name) return p;
  }
  throw NotFound("unknown object preset '" + name + "'");
}

}  // namespace dataengine
