#include "dataengine/episode_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "dataengine/errors.hpp"
#include "dataengine/model_io.hpp"

namespace dataengine {

namespace {

constexpr const char* kHeader = "storev1";

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_text_field(const std::string& s, const char* what) {
  if (s.find_first_of("\t\n\r") != std::string::npos) {
    throw InvalidArgument(std::string(what) + " must not contain tabs or newlines");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

// Field cursor over one parsed line.
class Fields {
 public:
  Fields(std::vector<std::string> f, const std::string& source, std::size_t line)
      : f_(std::move(f)), source_(source), line_(line) {}

  void expect_count(std::size_t n) const {
    if (f_.size() != n) {
      fail("expected " + std::to_string(n) + " fields, found " + std::to_string(f_.size()));
    }
  }
  const std::string& text() { return f_.at(pos_++); }
  RecordId id() {
    const std::string& s = text();
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || errno != 0 || v == 0 || s[0] == '-' || s[0] == '+') {
      fail("bad id '" + s + "'");
    }
    return v;
  }
  double real() {
    const std::string& s = text();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || !std::isfinite(v)) fail("bad number '" + s + "'");
    return v;
  }
  bool flag() {
    const std::string& s = text();
    if (s == "0") return false;
    if (s == "1") return true;
    fail("bad flag '" + s + "'");
  }
  Pose pose() {
    Pose p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) p.rotation(r, c) = real();
    for (int i = 0; i < 3; ++i) p.translation[i] = real();
    return p;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

 private:
  std::vector<std::string> f_;
  std::size_t pos_ = 0;
  const std::string& source_;
  std::size_t line_;
};

Record parse_record(const std::string& line, const std::string& source, std::size_t lineno) {
  Fields f(split_tabs(line), source, lineno);
  const std::string tag = f.text();
  if (tag == "task") {
    f.expect_count(5);
    TaskRecord r;
    r.id = f.id();
    r.object_id = f.text();
    r.network_type = f.text();
    r.split = f.text();
    return r;
  }
  if (tag == "cloud") {
    f.expect_count(5);
    CloudRecord r;
    r.id = f.id();
    r.task_id = f.id();
    r.cloud_file = f.text();
    r.timestamp = f.real();
    return r;
  }
  if (tag == "pose") {
    f.expect_count(16);
    PoseEstRecord r;
    r.id = f.id();
    r.cloud_id = f.id();
    r.pose = f.pose();
    r.score = f.real();
    return r;
  }
  if (tag == "grasp") {
    f.expect_count(16);
    GraspRecord r;
    r.id = f.id();
    r.pose_est_id = f.id();
    r.grasp_in_object_frame = f.pose();
    r.succeeded = f.flag();
    return r;
  }
  if (tag == "inhand") {
    f.expect_count(27);
    InHandRecord r;
    r.id = f.id();
    r.grasp_id = f.id();
    r.measured_pose = f.pose();
    r.expected_pose = f.pose();
    return r;
  }
  if (tag == "insert") {
    f.expect_count(4);
    InsertionRecord r;
    r.id = f.id();
    r.inhand_id = f.id();
    r.succeeded = f.flag();
    return r;
  }
  f.fail("unknown record tag '" + tag + "'");
}

Record quantized(Record r) {
  std::visit(Overloaded{
                 [](TaskRecord& t) {
                   check_text_field(t.object_id, "task object_id");
                   check_text_field(t.network_type, "task network_type");
                   check_text_field(t.split, "task split");
                 },
                 [](CloudRecord& c) {
                   check_text_field(c.cloud_file, "cloud file");
                   c.timestamp = quantize(c.timestamp);
                 },
                 [](PoseEstRecord& p) {
                   p.pose = quantize(p.pose);
                   p.score = quantize(p.score);
                 },
                 [](GraspRecord& g) { g.grasp_in_object_frame = quantize(g.grasp_in_object_frame); },
                 [](InHandRecord& h) {
                   h.measured_pose = quantize(h.measured_pose);
                   h.expected_pose = quantize(h.expected_pose);
                 },
                 [](InsertionRecord&) {},
             },
             r);
  return r;
}

void set_id(Record& r, RecordId id) {
  std::visit([id](auto& rec) { rec.id = id; }, r);
}

}  // namespace

const char* level_tag(Level level) {
  switch (level) {
    case Level::kTask: return "task";
    case Level::kCloud: return "cloud";
    case Level::kPoseEst: return "pose";
    case Level::kGrasp: return "grasp";
    case Level::kInHand: return "inhand";
    case Level::kInsertion: return "insert";
  }
  return "?";
}

Level level_of(const Record& r) { return static_cast<Level>(r.index()); }

RecordId id_of(const Record& r) {
  return std::visit([](const auto& rec) { return rec.id; }, r);
}

std::optional<RecordId> parent_of(const Record& r) {
  return std::visit(Overloaded{
                        [](const TaskRecord&) -> std::optional<RecordId> { return std::nullopt; },
                        [](const CloudRecord& c) -> std::optional<RecordId> { return c.task_id; },
                        [](const PoseEstRecord& p) -> std::optional<RecordId> { return p.cloud_id; },
                        [](const GraspRecord& g) -> std::optional<RecordId> { return g.pose_est_id; },
                        [](const InHandRecord& h) -> std::optional<RecordId> { return h.grasp_id; },
                        [](const InsertionRecord& i) -> std::optional<RecordId> { return i.inhand_id; },
                    },
                    r);
}

double quantize(double v) { return std::strtod(format_real(v).c_str(), nullptr); }

Pose quantize(const Pose& p) {
  Pose q;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) q.rotation(r, c) = quantize(p.rotation(r, c));
  for (int i = 0; i < 3; ++i) q.translation[i] = quantize(p.translation[i]);
  return q;
}

std::string format_pose_fields(const Pose& p, char sep) {
  std::string out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!out.empty()) out += sep;
      out += format_real(p.rotation(r, c));
    }
  }
  for (int i = 0; i < 3; ++i) {
    out += sep;
    out += format_real(p.translation[i]);
  }
  return out;
}

std::string serialize_record(const Record& r) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const TaskRecord& t) {
                   os << "task\t" << t.id << '\t' << t.object_id << '\t' << t.network_type << '\t'
                      << t.split;
                 },
                 [&](const CloudRecord& c) {
                   os << "cloud\t" << c.id << '\t' << c.task_id << '\t' << c.cloud_file << '\t'
                      << format_real(c.timestamp);
                 },
                 [&](const PoseEstRecord& p) {
                   os << "pose\t" << p.id << '\t' << p.cloud_id << '\t'
                      << format_pose_fields(p.pose) << '\t' << format_real(p.score);
                 },
                 [&](const GraspRecord& g) {
                   os << "grasp\t" << g.id << '\t' << g.pose_est_id << '\t'
                      << format_pose_fields(g.grasp_in_object_frame) << '\t'
                      << (g.succeeded ? 1 : 0);
                 },
                 [&](const InHandRecord& h) {
                   os << "inhand\t" << h.id << '\t' << h.grasp_id << '\t'
                      << format_pose_fields(h.measured_pose) << '\t'
                      << format_pose_fields(h.expected_pose);
                 },
                 [&](const InsertionRecord& i) {
                   os << "insert\t" << i.id << '\t' << i.inhand_id << '\t' << (i.succeeded ? 1 : 0);
                 },
             },
             r);
  os << '\n';
  return os.str();
}

EpisodeStore::EpisodeStore() : mutex_(std::make_unique<std::shared_mutex>()) {}

EpisodeStore::~EpisodeStore() {
  if (fd_ >= 0) ::close(fd_);
}

EpisodeStore::EpisodeStore(EpisodeStore&& other) noexcept
    : mutex_(std::move(other.mutex_)),
      records_(std::move(other.records_)),
      index_(std::move(other.index_)),
      children_(std::move(other.children_)),
      next_id_(other.next_id_),
      path_(std::move(other.path_)),
      options_(other.options_),
      fd_(other.fd_) {
  other.fd_ = -1;
  other.mutex_ = std::make_unique<std::shared_mutex>();
}

EpisodeStore& EpisodeStore::operator=(EpisodeStore&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    mutex_ = std::move(other.mutex_);
    records_ = std::move(other.records_);
    index_ = std::move(other.index_);
    children_ = std::move(other.children_);
    next_id_ = other.next_id_;
    path_ = std::move(other.path_);
    options_ = other.options_;
    fd_ = other.fd_;
    other.fd_ = -1;
    other.mutex_ = std::make_unique<std::shared_mutex>();
  }
  return *this;
}

namespace {

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("write failed on " + path.string() + ": " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

// Parses text into store; returns the number of bytes that form complete,
// valid lines (a truncated tail is excluded).
std::size_t parse_into(EpisodeStore& store, const std::string& text, const std::string& source,
                       std::vector<std::string>* warnings) {
  if (text.empty()) return 0;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) {
      if (warnings) {
        warnings->push_back(source + ":" + std::to_string(lineno) +
                            ": truncated final line ignored");
      }
      return pos;
    }
    const std::string line = text.substr(pos, nl - pos);
    if (!header_seen) {
      if (line != kHeader) throw ParseError(source, lineno, "missing 'storev1' header");
      header_seen = true;
    } else {
      Record r = parse_record(line, source, lineno);
      const RecordId declared = id_of(r);
      if (declared != store.size() + 1) {
        throw ParseError(source, lineno,
                         "id " + std::to_string(declared) + " out of sequence");
      }
      try {
        store.append(std::move(r));
      } catch (const IntegrityError& e) {
        throw IntegrityError(source + ":" + std::to_string(lineno) + ": " + e.what());
      } catch (const SchemaError& e) {
        throw SchemaError(source + ":" + std::to_string(lineno) + ": " + e.what());
      } catch (const InvalidArgument& e) {
        throw ParseError(source, lineno, e.what());
      }
    }
    pos = nl + 1;
  }
  return pos;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open store " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

EpisodeStore EpisodeStore::parse(const std::string& text, const std::string& source,
                                 std::vector<std::string>* warnings) {
  EpisodeStore store;
  parse_into(store, text, source, warnings);
  // Loaded values were already at file precision; quantizing on append
  // leaves them bit-identical.
  return store;
}

EpisodeStore EpisodeStore::load(const std::filesystem::path& path,
                                std::vector<std::string>* warnings) {
  return parse(read_file(path), path.string(), warnings);
}

EpisodeStore EpisodeStore::create(const std::filesystem::path& path, StoreOptions options) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw WouldOverwrite("store already exists: " + path.string());
    throw Error("cannot create store " + path.string() + ": " + std::strerror(errno));
  }
  EpisodeStore store;
  store.fd_ = fd;
  store.path_ = path;
  store.options_ = options;
  write_all(fd, std::string(kHeader) + "\n", path);
  if (options.fsync) ::fsync(fd);
  return store;
}

EpisodeStore EpisodeStore::open(const std::filesystem::path& path, StoreOptions options) {
  const std::string text = read_file(path);
  EpisodeStore store;
  const std::size_t valid = parse_into(store, text, path.string(), nullptr);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CLOEXEC);
  if (fd < 0) throw Error("cannot open store " + path.string() + ": " + std::strerror(errno));
  if (valid < text.size() && ::ftruncate(fd, static_cast<off_t>(valid)) != 0) {
    ::close(fd);
    throw Error("cannot drop truncated tail of " + path.string());
  }
  ::lseek(fd, 0, SEEK_END);
  store.fd_ = fd;
  store.path_ = path;
  store.options_ = options;
  if (text.empty()) write_all(fd, std::string(kHeader) + "\n", path);
  return store;
}

void EpisodeStore::check_parent_locked(const Record& record) const {
  const auto parent = parent_of(record);
  if (!parent) return;
  const auto it = index_.find(*parent);
  if (it == index_.end()) {
    throw IntegrityError(std::string(level_tag(level_of(record))) + " references unknown parent " +
                         std::to_string(*parent));
  }
  const Level want = static_cast<Level>(static_cast<int>(level_of(record)) - 1);
  const Level got = level_of(records_[it->second]);
  if (got != want) {
    throw SchemaError(std::string(level_tag(level_of(record))) + " parent " +
                      std::to_string(*parent) + " is a " + level_tag(got) + ", expected " +
                      level_tag(want));
  }
}

void EpisodeStore::insert_locked(Record record) {
  const std::size_t pos = records_.size();
  const RecordId id = id_of(record);
  if (const auto parent = parent_of(record)) children_[*parent].push_back(pos);
  records_.push_back(std::move(record));
  index_.emplace(id, pos);
  next_id_ = id + 1;
}

RecordId EpisodeStore::append(Record record) {
  std::unique_lock lock(*mutex_);
  record = quantized(std::move(record));
  check_parent_locked(record);
  const RecordId id = next_id_;
  set_id(record, id);
  if (fd_ >= 0) {
    write_all(fd_, serialize_record(record), *path_);
    if (options_.fsync) ::fsync(fd_);
  }
  insert_locked(std::move(record));
  return id;
}

std::size_t EpisodeStore::size() const {
  std::shared_lock lock(*mutex_);
  return records_.size();
}

bool EpisodeStore::contains(RecordId id) const {
  std::shared_lock lock(*mutex_);
  return index_.count(id) > 0;
}

const Record& EpisodeStore::at_locked(RecordId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw NotFound("no record with id " + std::to_string(id));
  return records_[it->second];
}

Record EpisodeStore::get(RecordId id) const {
  std::shared_lock lock(*mutex_);
  return at_locked(id);
}

std::vector<Record> EpisodeStore::children(RecordId id) const {
  std::shared_lock lock(*mutex_);
  at_locked(id);
  std::vector<Record> out;
  if (const auto it = children_.find(id); it != children_.end()) {
    for (std::size_t pos : it->second) out.push_back(records_[pos]);
  }
  return out;
}

std::vector<Record> EpisodeStore::records() const {
  std::shared_lock lock(*mutex_);
  return records_;
}

std::vector<TaskRecord> EpisodeStore::tasks() const {
  std::shared_lock lock(*mutex_);
  std::vector<TaskRecord> out;
  for (const Record& r : records_) {
    if (const auto* t = std::get_if<TaskRecord>(&r)) out.push_back(*t);
  }
  return out;
}

std::vector<Record> EpisodeStore::ancestors(RecordId id) const {
  std::shared_lock lock(*mutex_);
  std::vector<Record> chain{at_locked(id)};
  while (const auto parent = parent_of(chain.back())) {
    const auto it = index_.find(*parent);
    if (it == index_.end()) {
      throw IntegrityError("dangling parent " + std::to_string(*parent) + " of record " +
                           std::to_string(id_of(chain.back())));
    }
    chain.push_back(records_[it->second]);
  }
  return chain;
}

Lineage EpisodeStore::lineage(RecordId inhand_id) const {
  const std::vector<Record> chain = ancestors(inhand_id);
  if (level_of(chain.front()) != Level::kInHand) {
    throw SchemaError("record " + std::to_string(inhand_id) + " is a " +
                      level_tag(level_of(chain.front())) + ", expected inhand");
  }
  if (chain.size() != 5) throw IntegrityError("lineage of " + std::to_string(inhand_id) + " is broken");
  return Lineage{std::get<InHandRecord>(chain[0]), std::get<GraspRecord>(chain[1]),
                 std::get<PoseEstRecord>(chain[2]), std::get<CloudRecord>(chain[3]),
                 std::get<TaskRecord>(chain[4])};
}

std::string EpisodeStore::serialize() const {
  std::shared_lock lock(*mutex_);
  std::string out = std::string(kHeader) + "\n";
  for (const Record& r : records_) out += serialize_record(r);
  return out;
}

void EpisodeStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << serialize();
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace dataengine
