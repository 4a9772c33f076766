#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "dataengine/geometry.hpp"

namespace dataengine {

using RecordId = std::uint64_t;

// Levels of the episode tree, root first. Every non-root record points at a
// record of the level immediately above it.
enum class Level { kTask, kCloud, kPoseEst, kGrasp, kInHand, kInsertion };

const char* level_tag(Level level);

struct TaskRecord {
  RecordId id = 0;
  std::string object_id;
  std::string network_type;
  std::string split;  // "train" or "test"
};

struct CloudRecord {
  RecordId id = 0;
  RecordId task_id = 0;
  std::string cloud_file;
  double timestamp = 0.0;  // seconds of simulated time
};

struct PoseEstRecord {
  RecordId id = 0;
  RecordId cloud_id = 0;
  Pose pose;  // camera frame
  double score = 0.0;
};

struct GraspRecord {
  RecordId id = 0;
  RecordId pose_est_id = 0;
  Pose grasp_in_object_frame;
  bool succeeded = false;
};

struct InHandRecord {
  RecordId id = 0;
  RecordId grasp_id = 0;
  Pose measured_pose;  // object in TCP frame, as observed
  Pose expected_pose;  // object in TCP frame, as planned
};

struct InsertionRecord {
  RecordId id = 0;
  RecordId inhand_id = 0;
  bool succeeded = false;
};

using Record = std::variant<TaskRecord, CloudRecord, PoseEstRecord, GraspRecord, InHandRecord,
                            InsertionRecord>;

Level level_of(const Record& r);
RecordId id_of(const Record& r);
// Parent id, or nullopt for a task.
std::optional<RecordId> parent_of(const Record& r);

struct Lineage {
  InHandRecord inhand;
  GraspRecord grasp;
  PoseEstRecord pose_est;
  CloudRecord cloud;
  TaskRecord task;
};

struct StoreOptions {
  // fsync after every appended line.
  bool fsync = true;
};

// Append-only tree of episode records, persisted as a line log:
//
//   storev1
//   <tag>\t<id>\t<parent>\t<fields...>
//
// Reals are written with 9 significant digits and poses as 12 numbers
// (rotation row-major, then translation). Appended values are rounded to
// that precision in memory as well, so a reloaded store is identical to the
// one that wrote it.
//
// One writer, any number of readers. Readers see every record up to some
// append boundary.
class EpisodeStore {
 public:
  // In-memory only.
  EpisodeStore();
  ~EpisodeStore();
  EpisodeStore(EpisodeStore&&) noexcept;
  EpisodeStore& operator=(EpisodeStore&&) noexcept;

  // New log at path; throws WouldOverwrite if the file exists.
  static EpisodeStore create(const std::filesystem::path& path, StoreOptions options = {});
  // Existing log, reopened for appending. A truncated tail line is dropped
  // from the file.
  static EpisodeStore open(const std::filesystem::path& path, StoreOptions options = {});
  // Reads a log without attaching to it. A truncated final line is skipped
  // and reported through warnings; any other malformed line is a ParseError.
  static EpisodeStore load(const std::filesystem::path& path,
                           std::vector<std::string>* warnings = nullptr);
  static EpisodeStore parse(const std::string& text, const std::string& source = "<memory>",
                            std::vector<std::string>* warnings = nullptr);

  // Validates the parent link, assigns the next id and persists the record
  // before returning. The id field of the argument is ignored.
  RecordId append(Record record);

  std::size_t size() const;
  bool contains(RecordId id) const;
  Record get(RecordId id) const;
  std::vector<Record> children(RecordId id) const;
  std::vector<Record> records() const;
  std::vector<TaskRecord> tasks() const;

  // InHand -> Grasp -> PoseEst -> Cloud -> Task.
  Lineage lineage(RecordId inhand_id) const;
  // The record followed by its ancestors up to the task.
  std::vector<Record> ancestors(RecordId id) const;

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  void insert_locked(Record record);
  void check_parent_locked(const Record& record) const;
  const Record& at_locked(RecordId id) const;

  std::unique_ptr<std::shared_mutex> mutex_;
  std::vector<Record> records_;
  std::unordered_map<RecordId, std::size_t> index_;
  std::unordered_map<RecordId, std::vector<std::size_t>> children_;
  RecordId next_id_ = 1;

  std::optional<std::filesystem::path> path_;
  StoreOptions options_;
  int fd_ = -1;
};

// Round-trip helpers shared with other text formats.
std::string format_pose_fields(const Pose& p, char sep = '\t');
Pose quantize(const Pose& p);
double quantize(double v);
std::string serialize_record(const Record& r);

}  // namespace dataengine
