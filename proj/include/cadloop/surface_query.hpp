#pragma once

#include <memory>
#include <vector>

#include "cadloop/mesh.hpp"

namespace cadloop {

/// Exact closest point on a triangle (Ericson, Real-Time Collision Detection).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct NearestHit {
    Vec3 point;
    double distance = 0.0;
    uint32_t triangle = 0;
};

/// Bounding-volume hierarchy over a mesh for exact nearest-surface queries.
/// Build once per mesh; queries are read-only and safe to run concurrently.
class SurfaceIndex {
public:
    explicit SurfaceIndex(const TriangleMesh& mesh);

    NearestHit nearest(const Vec3& query) const;

    const TriangleMesh& mesh() const { return mesh_; }

private:
    struct Node {
        Aabb box;
        int32_t left = -1;    // internal when >= 0
        int32_t right = -1;
        uint32_t first = 0;   // leaf triangle range
        uint32_t count = 0;
    };

    int32_t build(std::vector<uint32_t>& tris, uint32_t begin, uint32_t end);

    TriangleMesh mesh_;
    std::vector<Node> nodes_;
    std::vector<uint32_t> order_;
};

/// Convenience wrapper matching the one-shot operation contract.
inline NearestHit nearest_point_on_surface(const SurfaceIndex& index, const Vec3& query) {
    return index.nearest(query);
}

/// Exact nearest neighbor among a fixed point set (median-split kd-tree).
class PointKdTree {
public:
    explicit PointKdTree(std::vector<Vec3> points);

    /// Index and squared distance of the nearest point to q.
    std::pair<size_t, double> nearest(const Vec3& q) const;

    size_t size() const { return points_.size(); }
    const Vec3& point(size_t i) const { return points_[i]; }

private:
    struct Node {
        int32_t left = -1, right = -1;
        uint32_t first = 0, count = 0;
        int axis = 0;
        double split = 0.0;
    };

    int32_t build(uint32_t begin, uint32_t end, int depth);
    void search(int32_t node, const Vec3& q, size_t& best, double& best_d2) const;

    std::vector<Vec3> points_;
    std::vector<uint32_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace cadloop
