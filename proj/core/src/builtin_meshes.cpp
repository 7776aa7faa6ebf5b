#include "femwave/builtin_meshes.hpp"

#include <sstream>
#include <stdexcept>

namespace femwave {

namespace {

const std::string kSquare = R"(femwave-mesh 1
# Unit square split into two triangles along the main diagonal.
v 0 0
v 1 0
v 1 1
v 0 1
t 0 1 2
t 0 2 3
g 0 1
g 1 2
g 2 3
g 3 0
)";

const std::string kLshape = R"(femwave-mesh 1
# L-shaped domain [0,2]x[0,1] union [0,1]x[1,2]: three fans of four
# triangles around interior points in general position.
v 0 0
v 1 0
v 2 0
v 2 1
v 1 1
v 1 2
v 0 2
v 0 1
v 1/2 5/8
v 3/2 1/2
v 5/8 3/2
t 0 1 8
t 1 4 8
t 4 7 8
t 7 0 8
t 1 2 9
t 2 3 9
t 3 4 9
t 4 1 9
t 7 4 10
t 4 5 10
t 5 6 10
t 6 7 10
g 0 1
g 1 2
g 2 3
g 3 4
g 4 5
g 5 6
g 6 7
g 7 0
)";

}  // namespace

std::vector<std::string> builtin_mesh_names() { return {"square", "lshape"}; }

const std::string& builtin_mesh_text(const std::string& name) {
  if (name == "square") return kSquare;
  if (name == "lshape") return kLshape;
  throw std::invalid_argument("unknown bundled mesh '" + name +
                              "' (available: square, lshape)");
}

Triangulation resolve_mesh(const std::string& name_or_path) {
  for (const auto& n : builtin_mesh_names())
    if (n == name_or_path) {
      std::istringstream in(builtin_mesh_text(name_or_path));
      return load_mesh(in, name_or_path);
    }
  return load_mesh_file(name_or_path);
}

}  // namespace femwave
