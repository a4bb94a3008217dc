#pragma once

#include <filesystem>
#include <vector>

#include "cadloop/mesh.hpp"

namespace cadloop {

/// Loads OBJ, STL (binary or ASCII), or PLY (ASCII) by file extension.
/// Normals are recomputed from winding regardless of what the file stores.
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Writes by extension: .obj, .stl (binary, 32-bit coordinates), .ply (ASCII).
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Oriented point cloud as ASCII PLY with x y z nx ny nz vertex properties.
/// This is the input side of the external-reconstruction subprocess contract.
void save_point_cloud_ply(const std::vector<PointSample>& points,
                          const std::filesystem::path& path);

}  // namespace cadloop
