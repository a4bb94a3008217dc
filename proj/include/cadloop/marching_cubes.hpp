#pragma once

#include <vector>

#include "cadloop/mesh.hpp"

namespace cadloop {

/// Scalar samples on the nodes of a cubic lattice: (cells+1)^3 values,
/// x-fastest, node (i,j,k) at origin + (i,j,k) * cell_size.
struct ScalarGrid {
    int cells = 0;
    Vec3 origin{0.0, 0.0, 0.0};
    double cell_size = 0.0;
    std::vector<double> values;

    size_t node_index(int i, int j, int k) const {
        const size_t n = static_cast<size_t>(cells) + 1;
        return static_cast<size_t>(i) + n * (static_cast<size_t>(j) + n * static_cast<size_t>(k));
    }

    Vec3 node_position(int i, int j, int k) const {
        return {origin.x + i * cell_size, origin.y + j * cell_size, origin.z + k * cell_size};
    }
};

/// Extracts the zero isosurface (inside = value < 0). Vertices are welded
/// exactly by grid-edge key, so shared edges produce shared vertices and the
/// output is watertight wherever the field is. Triangles are wound with
/// outward normals (toward positive values). Returns an empty mesh when the
/// field has no sign change.
TriangleMesh marching_cubes(const ScalarGrid& grid);

}  // namespace cadloop
