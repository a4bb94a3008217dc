#include "cadloop/surface_query.hpp"

#include <algorithm>
#include <limits>

#include "cadloop/error.hpp"

namespace cadloop {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;

    const double d1 = dot(ab, ap);
    const double d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp);
    const double d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + ab * v;
    }

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp);
    const double d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + ac * w;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return a + ab * v + ac * w;
}

SurfaceIndex::SurfaceIndex(const TriangleMesh& mesh) : mesh_(mesh) {
    mesh_.validate();
    order_.resize(mesh_.triangle_count());
    for (uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * order_.size());
    build(order_, 0, static_cast<uint32_t>(order_.size()));
}

int32_t SurfaceIndex::build(std::vector<uint32_t>& tris, uint32_t begin, uint32_t end) {
    Node node;
    node.box = Aabb::empty();
    for (uint32_t i = begin; i < end; ++i) {
        for (int c = 0; c < 3; ++c) node.box.expand(mesh_.triangle_vertex(tris[i], c));
    }
    const int32_t id = static_cast<int32_t>(nodes_.size());
    nodes_.push_back(node);

    constexpr uint32_t kLeafSize = 4;
    if (end - begin <= kLeafSize) {
        nodes_[id].first = begin;
        nodes_[id].count = end - begin;
        return id;
    }

    const Vec3 ext = node.box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    const uint32_t mid = (begin + end) / 2;
    std::nth_element(tris.begin() + begin, tris.begin() + mid, tris.begin() + end,
                     [&](uint32_t ta, uint32_t tb) {
                         const auto centroid = [&](uint32_t t) {
                             return (mesh_.triangle_vertex(t, 0)[axis] +
                                     mesh_.triangle_vertex(t, 1)[axis] +
                                     mesh_.triangle_vertex(t, 2)[axis]) / 3.0;
                         };
                         return centroid(ta) < centroid(tb);
                     });
    const int32_t left = build(tris, begin, mid);
    const int32_t right = build(tris, mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

NearestHit SurfaceIndex::nearest(const Vec3& query) const {
    NearestHit best;
    best.distance = std::numeric_limits<double>::infinity();
    double best_d2 = std::numeric_limits<double>::infinity();

    // Explicit stack, nearer child first, pruned by box distance.
    int32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const int32_t id = stack[--top];
        const Node& node = nodes_[static_cast<size_t>(id)];
        if (node.box.distance_squared(query) >= best_d2) continue;
        if (node.left < 0) {
            for (uint32_t i = node.first; i < node.first + node.count; ++i) {
                const uint32_t t = order_[i];
                const Vec3 cp = closest_point_on_triangle(query, mesh_.triangle_vertex(t, 0),
                                                          mesh_.triangle_vertex(t, 1),
                                                          mesh_.triangle_vertex(t, 2));
                const double d2 = length_squared(cp - query);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best.point = cp;
                    best.triangle = t;
                }
            }
            continue;
        }
        const double dl = nodes_[static_cast<size_t>(node.left)].box.distance_squared(query);
        const double dr = nodes_[static_cast<size_t>(node.right)].box.distance_squared(query);
        if (dl < dr) {
            if (dr < best_d2) stack[top++] = node.right;
            if (dl < best_d2) stack[top++] = node.left;
        } else {
            if (dl < best_d2) stack[top++] = node.left;
            if (dr < best_d2) stack[top++] = node.right;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

PointKdTree::PointKdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorCode::insufficient_samples, "kd-tree over empty set");
    order_.resize(points_.size());
    for (uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(2 * points_.size() / 8 + 2);
    build(0, static_cast<uint32_t>(points_.size()), 0);
}

int32_t PointKdTree::build(uint32_t begin, uint32_t end, int depth) {
    const int32_t id = static_cast<int32_t>(nodes_.size());
    nodes_.push_back({});

    constexpr uint32_t kLeafSize = 8;
    if (end - begin <= kLeafSize) {
        nodes_[id].first = begin;
        nodes_[id].count = end - begin;
        return id;
    }

    Aabb box = Aabb::empty();
    for (uint32_t i = begin; i < end; ++i) box.expand(points_[order_[i]]);
    const Vec3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;

    const uint32_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](uint32_t a, uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    const int32_t left = build(begin, mid, depth + 1);
    const int32_t right = build(mid, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void PointKdTree::search(int32_t id, const Vec3& q, size_t& best, double& best_d2) const {
    const Node& node = nodes_[static_cast<size_t>(id)];
    if (node.left < 0) {
        for (uint32_t i = node.first; i < node.first + node.count; ++i) {
            const uint32_t p = order_[i];
            const double d2 = length_squared(points_[p] - q);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = p;
            }
        }
        return;
    }
    const double delta = q[node.axis] - node.split;
    const int32_t near = delta < 0.0 ? node.left : node.right;
    const int32_t far = delta < 0.0 ? node.right : node.left;
    search(near, q, best, best_d2);
    if (delta * delta < best_d2) search(far, q, best, best_d2);
}

std::pair<size_t, double> PointKdTree::nearest(const Vec3& q) const {
    size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(0, q, best, best_d2);
    return {best, best_d2};
}

}  // namespace cadloop
