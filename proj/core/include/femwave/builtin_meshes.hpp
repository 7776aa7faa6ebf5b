#pragma once

#include <string>
#include <vector>

#include "femwave/mesh.hpp"

namespace femwave {

// Names of the bundled example meshes ("square", "lshape").
std::vector<std::string> builtin_mesh_names();

// Mesh-file text of a bundled mesh; throws std::invalid_argument for an
// unknown name.
const std::string& builtin_mesh_text(const std::string& name);

// Loads a bundled mesh by name, or a mesh file when `name_or_path` is not a
// bundled name.
Triangulation resolve_mesh(const std::string& name_or_path);

}  // namespace femwave
