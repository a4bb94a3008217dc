#pragma once

// Shared fixtures plus independent reference implementations used as oracles.
// The oracles are deliberately naive: exhaustive loops and textbook formulas,
// no reuse of the library's spatial indices, so agreement is meaningful.

#include <cadloop/error.hpp>
#include <cadloop/geom.hpp>
#include <cadloop/mesh.hpp>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace testsupport {

using cadloop::TriangleMesh;
using cadloop::Vec3;

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(FIXTURE_DIR) / name;
}

/// Unique per-instance scratch directory, removed on destruction.
class ScratchDir {
public:
    ScratchDir() {
        static std::atomic<unsigned> counter{0};
        root_ = std::filesystem::temp_directory_path() /
                ("cadloop_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(root_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(root_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return root_; }
    std::filesystem::path file(const std::string& name) const { return root_ / name; }

private:
    std::filesystem::path root_;
};

/// Runs f and reports the Error code it threw, or nullopt when it returned.
template <typename Fn>
std::optional<cadloop::ErrorCode> error_code_of(Fn&& f) {
    try {
        f();
    } catch (const cadloop::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

/// Axis-aligned box as 12 triangles with outward winding.
inline TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
    TriangleMesh m;
    m.vertices = {
        {lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z},
        {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z},
    };
    m.triangles = {
        {0, 2, 1}, {0, 3, 2},  // z = lo (normal -z)
        {4, 5, 6}, {4, 6, 7},  // z = hi (normal +z)
        {0, 1, 5}, {0, 5, 4},  // y = lo (normal -y)
        {3, 7, 6}, {3, 6, 2},  // y = hi (normal +y)
        {0, 4, 7}, {0, 7, 3},  // x = lo (normal -x)
        {1, 2, 6}, {1, 6, 5},  // x = hi (normal +x)
    };
    m.recompute_normals();
    return m;
}

/// Watertight lat-long sphere with outward winding.
inline TriangleMesh make_uv_sphere(const Vec3& center, double radius, int stacks = 24,
                                   int slices = 48) {
    TriangleMesh m;
    const double pi = 3.14159265358979323846;
    m.vertices.push_back(center + Vec3{0, 0, radius});   // top pole: index 0
    for (int i = 1; i < stacks; ++i) {
        const double phi = pi * double(i) / double(stacks);  // from +z
        for (int j = 0; j < slices; ++j) {
            const double theta = 2.0 * pi * double(j) / double(slices);
            m.vertices.push_back(center + Vec3{radius * std::sin(phi) * std::cos(theta),
                                               radius * std::sin(phi) * std::sin(theta),
                                               radius * std::cos(phi)});
        }
    }
    m.vertices.push_back(center + Vec3{0, 0, -radius});  // bottom pole
    const auto ring = [&](int i, int j) -> uint32_t {
        return uint32_t(1 + (i - 1) * slices + (j % slices));
    };
    const uint32_t bottom = uint32_t(m.vertices.size() - 1);
    for (int j = 0; j < slices; ++j) {
        m.triangles.push_back({0, ring(1, j), ring(1, j + 1)});
        m.triangles.push_back({bottom, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
    }
    for (int i = 1; i + 1 < stacks; ++i) {
        for (int j = 0; j < slices; ++j) {
            const uint32_t a = ring(i, j), b = ring(i, j + 1);
            const uint32_t c = ring(i + 1, j), d = ring(i + 1, j + 1);
            m.triangles.push_back({a, c, d});
            m.triangles.push_back({a, d, b});
        }
    }
    m.recompute_normals();
    return m;
}

/// O(n*m) chamfer oracle: sum of the two mean squared nearest-neighbor
/// distances, reported x 10^3.
inline double brute_chamfer_x1e3(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    const auto one_side = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double total = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) best = std::min(best, cadloop::length_squared(p - q));
            total += best;
        }
        return total / double(from.size());
    };
    return 1e3 * (one_side(a, b) + one_side(b, a));
}

inline Vec3 closest_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double denom = cadloop::length_squared(ab);
    if (denom == 0.0) return a;
    const double t = std::clamp(cadloop::dot(p - a, ab) / denom, 0.0, 1.0);
    return a + ab * t;
}

/// Independent closest-point-on-triangle: the minimizer is either the plane
/// projection (when its barycentrics are all nonnegative) or a point on one
/// of the three edges; checking all four candidates is exhaustive.
inline Vec3 oracle_closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c) {
    Vec3 best = closest_on_segment(p, a, b);
    double best_d2 = cadloop::length_squared(p - best);
    for (const Vec3& cand : {closest_on_segment(p, b, c), closest_on_segment(p, c, a)}) {
        const double d2 = cadloop::length_squared(p - cand);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = cand;
        }
    }
    const Vec3 n = cadloop::cross(b - a, c - a);
    const double nn = cadloop::length_squared(n);
    if (nn > 0.0) {
        const Vec3 proj = p - n * (cadloop::dot(p - a, n) / nn);
        const double area2 = nn;
        const double u = cadloop::dot(cadloop::cross(c - b, proj - b), n) / area2;
        const double v = cadloop::dot(cadloop::cross(a - c, proj - c), n) / area2;
        const double w = cadloop::dot(cadloop::cross(b - a, proj - a), n) / area2;
        if (u >= 0.0 && v >= 0.0 && w >= 0.0) {
            const double d2 = cadloop::length_squared(p - proj);
            if (d2 < best_d2) best = proj;
        }
    }
    return best;
}

/// Exhaustive nearest surface point over every triangle of the mesh.
inline Vec3 oracle_closest_on_mesh(const Vec3& p, const TriangleMesh& mesh) {
    Vec3 best{0, 0, 0};
    double best_d2 = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < mesh.triangle_count(); ++t) {
        const Vec3 q = oracle_closest_on_triangle(p, mesh.triangle_vertex(t, 0),
                                                  mesh.triangle_vertex(t, 1),
                                                  mesh.triangle_vertex(t, 2));
        const double d2 = cadloop::length_squared(p - q);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = q;
        }
    }
    return best;
}

inline double oracle_distance_to_mesh(const Vec3& p, const TriangleMesh& mesh) {
    return cadloop::length(p - oracle_closest_on_mesh(p, mesh));
}

/// Undirected edges that belong to exactly one triangle. Zero on a watertight
/// mesh; punching holes exposes open rims and makes this positive.
inline size_t boundary_edge_count(const TriangleMesh& mesh) {
    std::map<std::pair<uint32_t, uint32_t>, int> uses;
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const uint32_t a = tri[k], b = tri[(k + 1) % 3];
            ++uses[{std::min(a, b), std::max(a, b)}];
        }
    }
    size_t open = 0;
    for (const auto& [edge, count] : uses)
        if (count == 1) ++open;
    return open;
}

/// Moller-Trumbore ray/triangle intersection; returns the ray parameter t or
/// nullopt. Used by the visibility soundness oracle.
inline std::optional<double> ray_triangle_t(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                            const Vec3& b, const Vec3& c) {
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pvec = cadloop::cross(dir, e2);
    const double det = cadloop::dot(e1, pvec);
    if (std::abs(det) < 1e-12) return std::nullopt;
    const double inv = 1.0 / det;
    const Vec3 tvec = origin - a;
    const double u = cadloop::dot(tvec, pvec) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 qvec = cadloop::cross(tvec, e1);
    const double v = cadloop::dot(dir, qvec) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    return cadloop::dot(e2, qvec) * inv;
}

/// True when some triangle blocks the open segment from `from` to `to`,
/// ignoring hits within `margin` (as a fraction of the segment) of either end.
inline bool oracle_segment_blocked(const Vec3& from, const Vec3& to, const TriangleMesh& mesh,
                                   double margin) {
    const Vec3 dir = to - from;
    for (size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto hit = ray_triangle_t(from, dir, mesh.triangle_vertex(t, 0),
                                        mesh.triangle_vertex(t, 1), mesh.triangle_vertex(t, 2));
        if (hit && *hit > margin && *hit < 1.0 - margin) return true;
    }
    return false;
}

}  // namespace testsupport
