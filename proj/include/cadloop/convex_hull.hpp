#pragma once

#include <cadloop/geom.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace cadloop {

/// Faces index into the original point array; vertices lists each point that
/// is a corner of the hull, ascending.
struct HullResult {
    std::vector<size_t> vertices;
    std::vector<std::array<uint32_t, 3>> faces;
};

/// 3D quickhull. Points within plane-thickness tolerance of the hull are not
/// reported as vertices. Throws DegenerateHull when the input has no four
/// non-coplanar points.
HullResult convex_hull(const std::vector<Vec3>& points);

std::vector<size_t> convex_hull_vertices(const std::vector<Vec3>& points);

}  // namespace cadloop
