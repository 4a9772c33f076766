#pragma once

#include <filesystem>
#include <iosfwd>

#include "dataengine/geometry.hpp"

namespace dataengine {

// ASCII point-list format:
//   model <id> <n> <diameter_mm> <symmetry>
//   x y z            (n lines, 9 significant digits)
void write_model(std::ostream& out, const ObjectModel& model);
void save_model(const std::filesystem::path& path, const ObjectModel& model);

// Reads either the point-list format above or a vertex-only ASCII PLY file.
// Keypoints are recomputed by farthest-point sampling; normals are not stored.
ObjectModel read_model(std::istream& in, const std::string& source = "<stream>");
ObjectModel load_model(const std::filesystem::path& path);

// "%.9g" formatting shared by every text format in the project.
std::string format_real(double v);

}  // namespace dataengine
