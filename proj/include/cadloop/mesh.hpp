#pragma once

#include <cstdint>
#include <vector>

#include "cadloop/geom.hpp"

namespace cadloop {

/// Indexed triangle surface with per-face normals derived from winding.
/// The universal shape carrier for targets, renders, and scans.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<uint32_t, 3>> triangles;
    std::vector<Vec3> face_normals;

    size_t triangle_count() const { return triangles.size(); }
    bool empty() const { return triangles.empty(); }

    Vec3 triangle_vertex(size_t tri, int corner) const {
        return vertices[triangles[tri][corner]];
    }

    double triangle_area(size_t tri) const {
        const Vec3 a = triangle_vertex(tri, 0);
        const Vec3 b = triangle_vertex(tri, 1);
        const Vec3 c = triangle_vertex(tri, 2);
        return 0.5 * length(cross(b - a, c - a));
    }

    double surface_area() const;
    Aabb bounds() const;

    /// Recomputes face_normals from winding. Zero-area faces get a zero normal.
    void recompute_normals();

    /// Throws MalformedGeometry / NonFiniteGeometry when invariants are broken.
    void validate() const;
};

struct PointSample {
    Vec3 position;
    Vec3 normal;
};

enum class FrameTag { unit_cube_01, signed_cube_11, prediction_over_100 };

/// Affine map x' = scale * x + translation, invertible since scale > 0.
struct NormalizationTransform {
    double scale = 1.0;
    Vec3 translation{0.0, 0.0, 0.0};
    FrameTag frame_tag = FrameTag::unit_cube_01;

    Vec3 apply(const Vec3& p) const { return p * scale + translation; }
    Vec3 invert(const Vec3& p) const { return (p - translation) / scale; }
};

std::pair<TriangleMesh, NormalizationTransform> normalize(const TriangleMesh& mesh, FrameTag frame);

TriangleMesh apply_transform(const TriangleMesh& mesh, const NormalizationTransform& t);

/// Boolean inside/outside flags on a cubic grid of resolution^3 cells.
struct OccupancyGrid {
    int resolution = 0;
    Vec3 origin{0.0, 0.0, 0.0};
    double cell_size = 0.0;
    std::vector<uint8_t> cells;  // resolution^3, x-fastest

    size_t index(int ix, int iy, int iz) const {
        return static_cast<size_t>(ix) +
               static_cast<size_t>(resolution) * (static_cast<size_t>(iy) +
               static_cast<size_t>(resolution) * static_cast<size_t>(iz));
    }

    bool inside(int ix, int iy, int iz) const { return cells[index(ix, iy, iz)] != 0; }

    size_t inside_count() const;
    double cell_volume() const { return cell_size * cell_size * cell_size; }
    double volume() const { return static_cast<double>(inside_count()) * cell_volume(); }
};

/// Cubic domain for voxelization; the metric frame default is [0,1]^3.
struct GridDomain {
    Vec3 origin{0.0, 0.0, 0.0};
    double side = 1.0;
};

/// Inside test per cell center by parity of ray crossings, majority-voted over
/// the three axis directions. Input should be approximately watertight.
OccupancyGrid voxelize_occupancy(const TriangleMesh& mesh, int resolution,
                                 const GridDomain& domain = {});

/// Area-weighted uniform surface sampling, deterministic under (mesh, n, seed).
/// Sample normals are the per-face normals of the source triangles.
std::vector<PointSample> sample_surface(const TriangleMesh& mesh, size_t n, uint64_t seed);

/// Undirected edges used by exactly one triangle; 0 for a closed surface.
size_t boundary_edge_count(const TriangleMesh& mesh);

}  // namespace cadloop
