#pragma once

#include <cadloop/geom.hpp>
#include <cadloop/mesh.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cadloop {

/// Virtual scanner knobs. Hole counts and radii are ranges sampled per scan;
/// radii are fractions of the bounding-box diagonal.
struct ScanConfig {
    size_t n_points = 100000;
    int n_views = 5;
    double radius_factor = 2.5;  // camera sphere radius, in bounding radii
    int hole_count_min = 1;
    int hole_count_max = 4;
    double hole_radius_min = 0.02;
    double hole_radius_max = 0.08;
    int recon_resolution = 96;
    uint64_t seed = 0;
    /// When non-empty, reconstruction runs this command instead of the
    /// built-in path. "{input}" / "{output}" expand to PLY paths; without
    /// placeholders both paths are appended as arguments.
    std::string recon_command;
};

struct VirtualCamera {
    Vec3 position;
    Vec3 look_at;
};

struct ScanResult {
    std::vector<PointSample> merged_points;
    TriangleMesh scan_mesh;
    std::vector<size_t> per_view_counts;
};

/// n_views cameras on a sphere of radius radius_factor x bounding radius
/// around the AABB centroid. Azimuths equally spaced over 360 degrees with a
/// seeded start angle; elevations alternate +30/-30 degrees, seeded phase.
std::vector<VirtualCamera> camera_trajectory(const Aabb& aabb, const ScanConfig& cfg);

/// Hidden-point-removal visibility: each point is flipped spherically about
/// the camera (radius 100 x the farthest sample distance); points whose flip
/// lands on the convex hull of the flipped set plus the camera are kept, then
/// back-facing points (normal . (camera - p) <= 0) are dropped.
std::vector<PointSample> visible_points(const std::vector<PointSample>& samples,
                                        const VirtualCamera& cam);

/// Signed field reconstruction: per grid node, the signed offset to nearby
/// sample tangent planes, Gaussian-blended over a 2-cell radius (sigma = 1
/// cell), falling back to the nearest sample's plane; meshed by marching
/// cubes. Needs >= 100 oriented points. Smooths sharp edges by construction.
TriangleMesh reconstruct_surface(const std::vector<PointSample>& points, int resolution);

/// External-tool path: writes the oriented cloud as ASCII PLY, runs the
/// command, loads the PLY mesh it wrote. Nonzero exit -> ExternalToolError.
TriangleMesh reconstruct_surface_external(const std::vector<PointSample>& points,
                                          const std::string& command);

/// Removes every triangle whose centroid lies within a seeded surface hole.
/// Identity when the sampled hole count is 0; EmptyAfterHoles if nothing
/// survives. Unreferenced vertices are compacted away.
TriangleMesh punch_holes(const TriangleMesh& mesh, const ScanConfig& cfg);

/// Full pipeline: sample -> per-view visibility -> merge -> reconstruct ->
/// punch holes. Deterministic in (mesh, cfg).
ScanResult simulate_scan(const TriangleMesh& mesh, const ScanConfig& cfg);

}  // namespace cadloop
