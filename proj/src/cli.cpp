#include "dataengine/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "dataengine/config.hpp"
#include "dataengine/errors.hpp"
#include "dataengine/labeling.hpp"
#include "dataengine/learner.hpp"
#include "dataengine/model_io.hpp"

namespace dataengine {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

CampaignConfig campaign_for_store(const fs::path& store_path,
                                  const std::optional<std::string>& config_path) {
  const fs::path p = config_path ? fs::path(*config_path)
                                 : store_path.parent_path() / "campaign.json";
  try {
    return load_campaign_config(p);
  } catch (const NotFound& e) {
    throw ConfigError("config", e.what());
  }
}

EpisodeStore load_store(const fs::path& path, std::ostream& err) {
  if (!fs::exists(path)) throw NotFound("no store at " + path.string());
  std::vector<std::string> warnings;
  EpisodeStore store = EpisodeStore::load(path, &warnings);
  for (const std::string& w : warnings) err << "warning: " << w << '\n';
  return store;
}

std::string pose_text(const Pose& p) { return format_pose_fields(p, ','); }

std::string describe(const Record& r) {
  std::ostringstream s;
  s << "level=" << level_tag(level_of(r)) << " id=" << id_of(r);
  if (auto parent = parent_of(r)) s << " parent=" << *parent;
  std::visit(
      [&s](const auto& rec) {
        using T = std::decay_t<decltype(rec)>;
        if constexpr (std::is_same_v<T, TaskRecord>) {
          s << " object_id=" << rec.object_id << " network_type=" << rec.network_type
            << " split=" << rec.split;
        } else if constexpr (std::is_same_v<T, CloudRecord>) {
          s << " cloud_file=" << rec.cloud_file << " timestamp=" << format_real(rec.timestamp);
        } else if constexpr (std::is_same_v<T, PoseEstRecord>) {
          s << " score=" << format_real(rec.score) << " pose=" << pose_text(rec.pose);
        } else if constexpr (std::is_same_v<T, GraspRecord>) {
          s << " succeeded=" << rec.succeeded << " grasp=" << pose_text(rec.grasp_in_object_frame);
        } else if constexpr (std::is_same_v<T, InHandRecord>) {
          s << " measured=" << pose_text(rec.measured_pose)
            << " expected=" << pose_text(rec.expected_pose);
        } else {
          s << " succeeded=" << rec.succeeded;
        }
      },
      r);
  return s.str();
}

int cmd_run(const std::string& config_path, const Globals& g, std::ostream& out,
            std::ostream& err) {
  CampaignConfig config;
  try {
    config = load_campaign_config(config_path);
  } catch (const NotFound& e) {
    throw ConfigError("config", e.what());
  }
  if (g.seed) config.seed = *g.seed;
  if (g.out) config.output_dir = *g.out;
  if (config.output_dir.empty()) config.output_dir = "run";

  const fs::path dir = config.output_dir;
  const fs::path store_path = dir / "store.log";
  if (fs::exists(store_path)) throw WouldOverwrite("store already exists: " + store_path.string());

  fs::create_directories(dir);
  EpisodeStore store = EpisodeStore::create(store_path);
  {
    std::ofstream cfg(dir / "campaign.json");
    cfg << to_json(config).dump(2) << '\n';
    if (!cfg) throw Error("cannot write " + (dir / "campaign.json").string());
  }
  std::optional<fs::path> cloud_dir;
  if (config.write_clouds) cloud_dir = dir / "clouds";

  const CampaignReport report = run_campaign(config, store, cloud_dir);
  if (!report.reached_targets) err << "warning: episode cap reached before the sample targets\n";
  if (!report.conservation_held) err << "warning: object count conservation violated\n";

  const double insert_rate = report.insert_attempts == 0
                                 ? 0.0
                                 : static_cast<double>(report.insert_successes) /
                                       report.insert_attempts;
  out << "store=" << store_path.string() << '\n'
      << "episodes=" << report.episodes << '\n'
      << "accepted=" << report.accepted() << '\n'
      << "accepted_train=" << report.accepted_train << '\n'
      << "accepted_test=" << report.accepted_test << '\n'
      << "discarded=" << report.discarded << '\n'
      << "acceptance_rate=" << format_real(report.acceptance_rate()) << '\n'
      << "insert_success_rate=" << format_real(insert_rate) << '\n'
      << "reached_targets=" << report.reached_targets << '\n';
  return kExitOk;
}

struct LabelArgs {
  std::string store;
  std::optional<std::string> config;
  std::optional<double> adi_mm;
  std::optional<double> angle_deg;
  std::optional<double> flip_deg;
};

int cmd_label(const LabelArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const EpisodeStore store = load_store(a.store, err);
  const std::vector<TaskRecord> tasks = store.tasks();

  LabelCounts total;
  std::vector<TrainingSample> samples;
  if (!tasks.empty()) {
    const CampaignConfig config = campaign_for_store(a.store, a.config);
    VerificationThresholds th = config.thresholds;
    if (a.adi_mm) th.adi_mm = *a.adi_mm;
    if (a.angle_deg) th.angle_deg = *a.angle_deg;
    if (a.flip_deg) th.flip_trigger_deg = *a.flip_deg;
    try {
      th.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("thresholds", e.what());
    }
    const ObjectModel model = config.build_model();
    for (const TaskRecord& task : tasks) {
      const LabelingResult r = label_task(store, task.id, model, th);
      out << "task=" << task.id << " split=" << task.split << " accepted=" << r.counts.accepted
          << " discarded=" << r.counts.discarded << " flipped=" << r.counts.flipped << '\n';
      total.accepted += r.counts.accepted;
      total.discarded += r.counts.discarded;
      total.flipped += r.counts.flipped;
      samples.insert(samples.end(), r.samples.begin(), r.samples.end());
    }
  }
  out << "accepted=" << total.accepted << '\n'
      << "discarded=" << total.discarded << '\n'
      << "flipped=" << total.flipped << '\n';
  if (g.out) {
    std::ofstream f(*g.out);
    write_training_set(f, samples);
    if (!f) throw Error("cannot write " + *g.out);
    out << "export=" << *g.out << '\n';
  }
  return kExitOk;
}

struct CurveArgs {
  std::string store;
  std::optional<std::string> config;
  std::vector<int> checkpoints = kDefaultCheckpoints;
  std::vector<std::uint64_t> seeds;
  int test_episodes = 500;
};

int cmd_curve(const CurveArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const CampaignConfig config = campaign_for_store(a.store, a.config);
  const EpisodeStore store = load_store(a.store, err);
  if (a.test_episodes < 1) throw ConfigError("test-episodes", "must be >= 1");

  std::vector<std::uint64_t> seeds = a.seeds;
  if (seeds.empty()) seeds.push_back(g.seed.value_or(config.seed));

  const ObjectModel model = config.build_model();
  const std::vector<CalibrationPair> pairs = calibration_pairs(store, model, config.thresholds);
  for (int n : a.checkpoints) {
    if (n < 0) throw ConfigError("checkpoints", "must be >= 0");
    if (static_cast<std::size_t>(n) > pairs.size()) {
      err << "warning: checkpoint " << n << " skipped, only " << pairs.size()
          << " training samples\n";
    }
  }
  RecallOptions options;
  options.test_episodes = a.test_episodes;
  options.thresholds = config.thresholds;
  options.bin_extent = config.bin_extent;
  options.floor_z = config.floor_z;
  const std::vector<CurvePoint> curve =
      learning_curve(pairs, a.checkpoints, seeds, config.error_model, model, options);

  if (g.out) {
    std::ofstream f(*g.out);
    write_curve_csv(f, curve);
    if (!f) throw Error("cannot write " + *g.out);
    out << "csv=" << *g.out << '\n' << "rows=" << curve.size() << '\n';
  } else {
    write_curve_csv(out, curve);
  }
  return kExitOk;
}

int cmd_inspect(const std::string& store_path, RecordId id, std::ostream& out,
                std::ostream& err) {
  const EpisodeStore store = load_store(store_path, err);
  if (!store.contains(id)) throw NotFound("no record with id " + std::to_string(id));
  const Record rec = store.get(id);
  if (level_of(rec) == Level::kTask) {
    out << describe(rec) << '\n';
    std::map<Level, std::size_t> per_level;
    std::vector<RecordId> frontier{id};
    while (!frontier.empty()) {
      const RecordId cur = frontier.back();
      frontier.pop_back();
      for (const Record& c : store.children(cur)) {
        ++per_level[level_of(c)];
        frontier.push_back(id_of(c));
      }
    }
    out << "children=" << store.children(id).size() << '\n';
    for (const auto& [level, n] : per_level) out << level_tag(level) << "_count=" << n << '\n';
    return kExitOk;
  }
  // Root first.
  const std::vector<Record> chain = store.ancestors(id);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) out << describe(*it) << '\n';
  return kExitOk;
}

struct GenModelArgs {
  double radius = 5.0;
  double height = 61.0;
  int points = kDefaultCylinderPoints;
  std::string id = "cylinder";
  std::optional<std::string> preset;
};

int cmd_gen_model(GenModelArgs a, const Globals& g, std::ostream& out) {
  if (!g.out) throw ConfigError("out", "gen-model needs --out <file>");
  if (a.preset) {
    try {
      const ObjectPreset& p = object_preset(*a.preset);
      a.radius = p.radius_mm;
      a.height = p.height_mm;
      a.id = p.name;
    } catch (const NotFound& e) {
      throw ConfigError("preset", e.what());
    }
  }
  if (!(a.radius > 0.0)) throw ConfigError("radius", "must be positive");
  if (!(a.height > 0.0)) throw ConfigError("height", "must be positive");
  if (a.points < 64) throw ConfigError("points", "must be >= 64");
  if (fs::exists(*g.out)) throw WouldOverwrite("model file exists: " + *g.out);
  const ObjectModel model =
      sample_cylinder_model(a.radius, a.height, a.points, g.seed.value_or(0), a.id);
  save_model(*g.out, model);
  out << "model=" << *g.out << '\n'
      << "id=" << model.id() << '\n'
      << "points=" << model.points().size() << '\n'
      << "diameter_mm=" << format_real(model.diameter()) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-verifying pose data engine for simulated bin picking", "dataengine"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  std::uint64_t seed_value = 0;
  std::string out_value;
  auto* seed_opt = app.add_option("--seed", seed_value, "Random seed override");
  auto* out_opt = app.add_option("--out", out_value,
                                 "Output: run directory, CSV, export or model file");

  std::string run_config;
  auto* run = app.add_subcommand("run", "Collect a campaign into <out>/store.log");
  run->add_option("config", run_config, "Campaign config (JSON)")->required();

  LabelArgs label_args;
  auto* label = app.add_subcommand("label", "Re-label stored episodes");
  label->add_option("store", label_args.store, "Store log")->required();
  label->add_option("--config", label_args.config, "Campaign config, default campaign.json next to the store");
  label->add_option("--adi-mm", label_args.adi_mm, "e_adi threshold");
  label->add_option("--angle-deg", label_args.angle_deg, "Axis angle threshold");
  label->add_option("--flip-deg", label_args.flip_deg, "Flip trigger");

  CurveArgs curve_args;
  auto* curve = app.add_subcommand("curve", "Learning-curve CSV from a store");
  curve->add_option("store", curve_args.store, "Store log")->required();
  curve->add_option("--config", curve_args.config, "Campaign config, default campaign.json next to the store");
  curve->add_option("--checkpoints", curve_args.checkpoints, "Sample counts")->delimiter(',');
  curve->add_option("--seeds", curve_args.seeds, "Evaluation seeds")->delimiter(',');
  curve->add_option("--test-episodes", curve_args.test_episodes, "Episodes per recall estimate");

  std::string inspect_store;
  RecordId inspect_id = 0;
  auto* inspect = app.add_subcommand("inspect", "Show the lineage of a record");
  inspect->add_option("store", inspect_store, "Store log")->required();
  inspect->add_option("id", inspect_id, "Record id")->required();

  GenModelArgs gen_args;
  auto* gen = app.add_subcommand("gen-model", "Write a sampled cylinder model");
  gen->add_option("--radius", gen_args.radius, "Radius in mm");
  gen->add_option("--height", gen_args.height, "Height in mm");
  gen->add_option("--points", gen_args.points, "Surface samples");
  gen->add_option("--id", gen_args.id, "Object id");
  gen->add_option("--preset", gen_args.preset, "novo_a, novo_b, novo_c or wrs_screw");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (*seed_opt) g.seed = seed_value;
  if (*out_opt) g.out = out_value;

  try {
    if (*run) return cmd_run(run_config, g, out, err);
    if (*label) return cmd_label(label_args, g, out, err);
    if (*curve) return cmd_curve(curve_args, g, out, err);
    if (*inspect) return cmd_inspect(inspect_store, inspect_id, out, err);
    if (*gen) return cmd_gen_model(gen_args, g, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const SchemaError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const ParseError& e) {
    err << "integrity error: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const NotFound& e) {
    err << "not found: " << e.what() << '\n';
    return kExitNotFound;
  } catch (const WouldOverwrite& e) {
    err << "refusing to overwrite: " << e.what() << '\n';
    return kExitWouldOverwrite;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace dataengine
