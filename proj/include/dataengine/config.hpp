#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dataengine/sim_workcell.hpp"

namespace dataengine {

// Campaign config file (JSON). "version": 1 is required; every other
// section is optional and falls back to default_config(). Unknown keys are
// rejected so that a typo cannot silently change an experiment.
//
//   { "version": 1,
//     "object":      { "id", "radius_mm", "height_mm", "n_points", "model_seed" },
//     "error_model": { "sigma_t_mm", "sigma_r_deg", "p_flip", "p_gross",
//                      "bias": { "translation_mm": [x,y,z], "rotation_deg": [rx,ry,rz] } },
//     "disturbance": { "p_move", "move_sigma_t_mm", "move_sigma_r_deg",
//                      "p_drop", "p_pushout", "p_feasible" },
//     "observation": { "obs_sigma_xy_mm", "obs_sigma_rz_deg", "camera_standoff_mm" },
//     "sensor":      { "sigma_mm", "dropout" },
//     "batch_k": 48,
//     "depth_check": { "tau_mm", "min_overlap", "nms_radius_mm" },
//     "thresholds":  { "adi_mm", "angle_deg", "flip_trigger_deg" },
//     "insertion":   { "tolerance_mm", "tolerance_deg" },
//     "targets":     { "train", "test", "max_episodes" },
//     "workcell":    { "bin_a_initial", "bin_b_initial", "transfers_per_swap",
//                      "bin_extent_mm": [x,y], "floor_z_mm", "grasp_miss_mm",
//                      "retain_inserted", "write_clouds", "network_type" },
//     "seed": 1, "threads": 1, "output_dir": "run" }
//
// The bias rotation is a rotation vector in degrees.
//
// Throws ConfigError naming the dotted field path.
CampaignConfig parse_campaign_config(const nlohmann::json& j);
CampaignConfig parse_campaign_config(const std::string& text);
// NotFound when the file cannot be read.
CampaignConfig load_campaign_config(const std::filesystem::path& path);

// Complete config, every field explicit.
nlohmann::json to_json(const CampaignConfig& config);

nlohmann::json to_json(const Pose& bias);

}  // namespace dataengine
