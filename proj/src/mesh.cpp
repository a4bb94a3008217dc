#include "cadloop/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "cadloop/error.hpp"

namespace cadloop {

double TriangleMesh::surface_area() const {
    double area = 0.0;
    for (size_t t = 0; t < triangles.size(); ++t) area += triangle_area(t);
    return area;
}

Aabb TriangleMesh::bounds() const {
    Aabb box = Aabb::empty();
    for (const Vec3& v : vertices) box.expand(v);
    return box;
}

void TriangleMesh::recompute_normals() {
    face_normals.resize(triangles.size());
    for (size_t t = 0; t < triangles.size(); ++t) {
        const Vec3 a = triangle_vertex(t, 0);
        const Vec3 b = triangle_vertex(t, 1);
        const Vec3 c = triangle_vertex(t, 2);
        face_normals[t] = normalized(cross(b - a, c - a));
    }
}

void TriangleMesh::validate() const {
    if (triangles.empty())
        throw Error(ErrorCode::malformed_geometry, "mesh has no triangles");
    for (const Vec3& v : vertices) {
        if (!is_finite(v))
            throw Error(ErrorCode::non_finite_geometry, "non-finite vertex coordinate");
    }
    const uint32_t n = static_cast<uint32_t>(vertices.size());
    for (const auto& tri : triangles) {
        if (tri[0] >= n || tri[1] >= n || tri[2] >= n)
            throw Error(ErrorCode::malformed_geometry, "triangle index out of range");
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw Error(ErrorCode::malformed_geometry, "triangle repeats a vertex index");
    }
    if (face_normals.size() != triangles.size())
        throw Error(ErrorCode::malformed_geometry, "face normal count mismatch");
}

std::pair<TriangleMesh, NormalizationTransform> normalize(const TriangleMesh& mesh, FrameTag frame) {
    NormalizationTransform t;
    t.frame_tag = frame;
    if (frame == FrameTag::prediction_over_100) {
        t.scale = 0.01;
        t.translation = {0.0, 0.0, 0.0};
        return {apply_transform(mesh, t), t};
    }

    const Aabb box = mesh.bounds();
    const Vec3 ext = box.extent();
    const double max_extent = std::max({ext.x, ext.y, ext.z});
    if (!(max_extent > 0.0))
        throw Error(ErrorCode::degenerate_extent, "mesh AABB is a point");

    const Vec3 center = box.center();
    if (frame == FrameTag::unit_cube_01) {
        // Longest axis maps onto [0,1] touching both bounds; others centered.
        t.scale = 1.0 / max_extent;
        t.translation = Vec3{0.5, 0.5, 0.5} - center * t.scale;
    } else {  // signed_cube_11
        t.scale = 2.0 / max_extent;
        t.translation = -(center * t.scale);
    }
    return {apply_transform(mesh, t), t};
}

TriangleMesh apply_transform(const TriangleMesh& mesh, const NormalizationTransform& t) {
    TriangleMesh out = mesh;
    for (Vec3& v : out.vertices) v = t.apply(v);
    // scale > 0 is isotropic, so winding and normals are preserved.
    return out;
}

size_t OccupancyGrid::inside_count() const {
    size_t n = 0;
    for (uint8_t c : cells) n += (c != 0);
    return n;
}

namespace {

// Crossing parameters of an axis-aligned line with the mesh, for the line
// through (u, v) in the plane of the two non-axis coordinates. The half-open
// edge rule keeps parity consistent on shared edges of adjacent triangles.
struct AxisRayGrid {
    int axis;                 // ray direction
    int ua, va;               // the other two axes
    int res;
    double origin_u, origin_v, cell;
    std::vector<std::vector<uint32_t>> bins;  // res*res, triangles per (u,v) cell

    AxisRayGrid(const TriangleMesh& mesh, int axis_, int res_, const GridDomain& domain)
        : axis(axis_), ua((axis_ + 1) % 3), va((axis_ + 2) % 3), res(res_) {
        origin_u = domain.origin[ua];
        origin_v = domain.origin[va];
        cell = domain.side / res;
        bins.resize(static_cast<size_t>(res) * res);
        for (uint32_t t = 0; t < mesh.triangle_count(); ++t) {
            double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
            for (int c = 0; c < 3; ++c) {
                const Vec3 p = mesh.triangle_vertex(t, c);
                umin = std::min(umin, p[ua]); umax = std::max(umax, p[ua]);
                vmin = std::min(vmin, p[va]); vmax = std::max(vmax, p[va]);
            }
            const int iu0 = std::clamp(static_cast<int>(std::floor((umin - origin_u) / cell - 0.5)), 0, res - 1);
            const int iu1 = std::clamp(static_cast<int>(std::floor((umax - origin_u) / cell + 0.5)), 0, res - 1);
            const int iv0 = std::clamp(static_cast<int>(std::floor((vmin - origin_v) / cell - 0.5)), 0, res - 1);
            const int iv1 = std::clamp(static_cast<int>(std::floor((vmax - origin_v) / cell + 0.5)), 0, res - 1);
            for (int iv = iv0; iv <= iv1; ++iv)
                for (int iu = iu0; iu <= iu1; ++iu)
                    bins[static_cast<size_t>(iv) * res + iu].push_back(t);
        }
    }

    // Sorted crossing coordinates along `axis` for the ray through cell (iu, iv).
    void crossings(const TriangleMesh& mesh, int iu, int iv, std::vector<double>& out) const {
        out.clear();
        const double u = origin_u + (iu + 0.5) * cell;
        const double v = origin_v + (iv + 0.5) * cell;
        for (uint32_t t : bins[static_cast<size_t>(iv) * res + iu]) {
            const Vec3 p0 = mesh.triangle_vertex(t, 0);
            const Vec3 p1 = mesh.triangle_vertex(t, 1);
            const Vec3 p2 = mesh.triangle_vertex(t, 2);
            double au = p0[ua] - u, av = p0[va] - v;
            double bu = p1[ua] - u, bv = p1[va] - v;
            double cu = p2[ua] - u, cv = p2[va] - v;
            // 2D edge functions of the projected triangle around the origin.
            const double e0 = au * bv - av * bu;
            const double e1 = bu * cv - bv * cu;
            const double e2 = cu * av - cv * au;
            const double area = e0 + e1 + e2;
            if (area == 0.0) continue;  // edge-on projection contributes no crossing
            bool inside;
            if (area > 0.0)
                inside = (e0 > 0.0 || (e0 == 0.0 && edge_owns(au, av, bu, bv))) &&
                         (e1 > 0.0 || (e1 == 0.0 && edge_owns(bu, bv, cu, cv))) &&
                         (e2 > 0.0 || (e2 == 0.0 && edge_owns(cu, cv, au, av)));
            else
                inside = (e0 < 0.0 || (e0 == 0.0 && edge_owns(bu, bv, au, av))) &&
                         (e1 < 0.0 || (e1 == 0.0 && edge_owns(cu, cv, bu, bv))) &&
                         (e2 < 0.0 || (e2 == 0.0 && edge_owns(au, av, cu, cv)));
            if (!inside) continue;
            // Barycentric interpolation of the axis coordinate at (u, v).
            const double w0 = e1 / area, w1 = e2 / area, w2 = e0 / area;
            out.push_back(w0 * p0[axis] + w1 * p1[axis] + w2 * p2[axis]);
        }
        std::sort(out.begin(), out.end());
    }

    // Half-open boundary ownership, the 2D analog of the rasterizer top-left
    // rule: a point exactly on a shared edge is claimed by exactly one of the
    // two incident triangles.
    static bool edge_owns(double ax, double ay, double bx, double by) {
        const double dy = by - ay;
        const double dx = bx - ax;
        return dy < 0.0 || (dy == 0.0 && dx > 0.0);
    }
};

}  // namespace

OccupancyGrid voxelize_occupancy(const TriangleMesh& mesh, int resolution, const GridDomain& domain) {
    for (const Vec3& v : mesh.vertices)
        if (!is_finite(v)) throw Error(ErrorCode::non_finite_geometry, "voxelize: non-finite vertex");

    OccupancyGrid grid;
    grid.resolution = resolution;
    grid.origin = domain.origin;
    grid.cell_size = domain.side / resolution;
    grid.cells.assign(static_cast<size_t>(resolution) * resolution * resolution, 0);

    std::vector<uint8_t> votes(grid.cells.size(), 0);
    std::vector<double> ts;
    for (int axis = 0; axis < 3; ++axis) {
        const AxisRayGrid rays(mesh, axis, resolution, domain);
        const int ua = rays.ua, va = rays.va;
        for (int iv = 0; iv < resolution; ++iv) {
            for (int iu = 0; iu < resolution; ++iu) {
                rays.crossings(mesh, iu, iv, ts);
                if (ts.empty()) continue;
                // Walk cell centers along the axis, flipping parity at crossings.
                size_t k = 0;
                bool in = false;
                for (int ia = 0; ia < resolution; ++ia) {
                    const double coord = domain.origin[axis] + (ia + 0.5) * grid.cell_size;
                    while (k < ts.size() && ts[k] <= coord) {
                        in = !in;
                        ++k;
                    }
                    if (in) {
                        int idx[3];
                        idx[axis] = ia;
                        idx[ua] = iu;
                        idx[va] = iv;
                        ++votes[grid.index(idx[0], idx[1], idx[2])];
                    }
                }
            }
        }
    }
    for (size_t i = 0; i < votes.size(); ++i) grid.cells[i] = votes[i] >= 2 ? 1 : 0;
    return grid;
}

std::vector<PointSample> sample_surface(const TriangleMesh& mesh, size_t n, uint64_t seed) {
    mesh.validate();
    if (n < 1) throw Error(ErrorCode::insufficient_samples, "sample_surface: n must be >= 1");

    std::vector<double> cumulative(mesh.triangle_count());
    double total = 0.0;
    for (size_t t = 0; t < mesh.triangle_count(); ++t) {
        total += mesh.triangle_area(t);
        cumulative[t] = total;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::zero_area_mesh, "total surface area is zero");

    Rng rng(seed);
    std::vector<PointSample> samples;
    samples.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform() * total;
        const size_t t = static_cast<size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
        const size_t tri = std::min(t, mesh.triangle_count() - 1);
        // Square-root trick gives uniform barycentric coordinates.
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        const double wa = 1.0 - r1;
        const double wb = r1 * (1.0 - r2);
        const double wc = r1 * r2;
        const Vec3 p = mesh.triangle_vertex(tri, 0) * wa + mesh.triangle_vertex(tri, 1) * wb +
                       mesh.triangle_vertex(tri, 2) * wc;
        samples.push_back({p, mesh.face_normals[tri]});
    }
    return samples;
}

size_t boundary_edge_count(const TriangleMesh& mesh) {
    std::unordered_map<uint64_t, int> uses;
    for (const auto& tri : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            uint64_t a = tri[e], b = tri[(e + 1) % 3];
            if (a > b) std::swap(a, b);
            ++uses[(a << 32) | b];
        }
    size_t count = 0;
    for (const auto& [edge, n] : uses) count += (n == 1);
    return count;
}

}  // namespace cadloop
