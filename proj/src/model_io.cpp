#include "dataengine/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dataengine/errors.hpp"

namespace dataengine {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_model(std::ostream& out, const ObjectModel& model) {
  if (model.id().empty() || model.id().find_first_of(" \t\n") != std::string::npos) {
    throw InvalidArgument("model id must be a single non-empty token");
  }
  out << "model " << model.id() << ' ' << model.points().size() << ' '
      << format_real(model.diameter()) << ' ' << to_string(model.symmetry()) << '\n';
  for (const Vec3& p : model.points()) {
    out << format_real(p.x()) << ' ' << format_real(p.y()) << ' ' << format_real(p.z()) << '\n';
  }
}

void save_model(const std::filesystem::path& path, const ObjectModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_model(out, model);
  if (!out) throw Error("write failed: " + path.string());
}

namespace {

ObjectModel finish_model(std::string id, std::vector<Vec3> pts, double diameter,
                         Symmetry symmetry) {
  ObjectModel::Parts parts;
  parts.id = std::move(id);
  double radius = 0.0, zmin = 0.0, zmax = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    radius = std::max(radius, std::hypot(pts[i].x(), pts[i].y()));
    zmin = i == 0 ? pts[i].z() : std::min(zmin, pts[i].z());
    zmax = i == 0 ? pts[i].z() : std::max(zmax, pts[i].z());
  }
  parts.keypoints = farthest_point_sampling(pts, kDefaultKeypoints);
  parts.surface_cloud.points = std::move(pts);
  parts.diameter_mm = diameter;
  parts.symmetry = symmetry;
  parts.radius_mm = radius;
  parts.height_mm = zmax - zmin;
  parts.stable_rest_height_mm = radius;
  return ObjectModel(std::move(parts));
}

Vec3 parse_xyz(const std::string& line, const std::string& source, std::size_t lineno) {
  std::istringstream ls(line);
  Vec3 p;
  if (!(ls >> p.x() >> p.y() >> p.z()) || !p.allFinite()) {
    throw ParseError(source, lineno, "expected three finite coordinates");
  }
  return p;
}

ObjectModel read_ply(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 1;
  std::size_t n_vertices = 0;
  bool in_vertex = false, ascii = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string kind;
      ls >> kind;
      ascii = kind == "ascii";
    } else if (word == "element") {
      std::string what;
      ls >> what;
      in_vertex = what == "vertex";
      if (in_vertex) ls >> n_vertices;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) throw ParseError(source, lineno, "only ASCII PLY is supported");
  const auto find = [&](const char* name) {
    auto it = std::find(props.begin(), props.end(), name);
    if (it == props.end()) throw ParseError(source, lineno, std::string("missing property ") + name);
    return static_cast<std::size_t>(it - props.begin());
  };
  const std::size_t ix = find("x"), iy = find("y"), iz = find("z");

  std::vector<Vec3> pts;
  pts.reserve(n_vertices);
  while (pts.size() < n_vertices && std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<double> vals(props.size());
    for (double& v : vals) {
      if (!(ls >> v)) throw ParseError(source, lineno, "short vertex row");
    }
    Vec3 p(vals[ix], vals[iy], vals[iz]);
    if (!p.allFinite()) throw ParseError(source, lineno, "non-finite vertex");
    pts.push_back(p);
  }
  if (pts.size() != n_vertices || pts.empty()) {
    throw ParseError(source, lineno, "expected " + std::to_string(n_vertices) + " vertices");
  }
  const double diameter = cloud_diameter(pts);
  std::string id = std::filesystem::path(source).stem().string();
  if (id.empty()) id = "ply";
  return finish_model(std::move(id), std::move(pts), diameter, Symmetry::kNone);
}

}  // namespace

ObjectModel read_model(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty model file");
  if (line.rfind("ply", 0) == 0) return read_ply(in, source);

  std::istringstream hs(line);
  std::string tag, id, symmetry;
  std::size_t n = 0;
  double diameter = 0.0;
  if (!(hs >> tag >> id >> n >> diameter >> symmetry) || tag != "model") {
    throw ParseError(source, 1, "expected 'model <id> <n> <diameter_mm> <symmetry>'");
  }
  Symmetry sym;
  try {
    sym = symmetry_from_string(symmetry);
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 1, e.what());
  }
  std::vector<Vec3> pts;
  pts.reserve(n);
  std::size_t lineno = 1;
  while (pts.size() < n && std::getline(in, line)) {
    ++lineno;
    pts.push_back(parse_xyz(line, source, lineno));
  }
  if (pts.size() != n || n == 0) {
    throw ParseError(source, lineno, "expected " + std::to_string(n) + " points");
  }
  return finish_model(std::move(id), std::move(pts), diameter, sym);
}

ObjectModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path.string());
  return read_model(in, path.string());
}

}  // namespace dataengine
