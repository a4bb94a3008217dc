#include <doctest.h>

#include <cadloop/convex_hull.hpp>
#include <cadloop/error.hpp>
#include <cadloop/geom.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "test_support.hpp"

using namespace cadloop;
using testsupport::error_code_of;

namespace {

std::vector<Vec3> cube_corners() {
    return {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
}

size_t unique_undirected_edges(const std::vector<std::array<uint32_t, 3>>& faces) {
    std::set<std::pair<uint32_t, uint32_t>> edges;
    for (const auto& f : faces)
        for (int k = 0; k < 3; ++k) {
            uint32_t a = f[k], b = f[(k + 1) % 3];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    return edges.size();
}

std::set<uint32_t> face_vertex_set(const std::vector<std::array<uint32_t, 3>>& faces) {
    std::set<uint32_t> used;
    for (const auto& f : faces) used.insert(f.begin(), f.end());
    return used;
}

// Every directed edge must appear exactly once with its reverse present:
// a closed, consistently wound surface.
bool edges_match_closed_surface(const std::vector<std::array<uint32_t, 3>>& faces) {
    std::map<std::pair<uint32_t, uint32_t>, int> directed;
    for (const auto& f : faces)
        for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];
    for (const auto& [edge, count] : directed) {
        if (count != 1) return false;
        if (directed.find({edge.second, edge.first}) == directed.end()) return false;
    }
    return true;
}

// All points must sit on the same side of every face plane as the hull
// centroid, within `tol`.
bool contains_all(const std::vector<Vec3>& points, const HullResult& hull, double tol) {
    Vec3 centroid{0, 0, 0};
    for (size_t idx : hull.vertices) centroid = centroid + points[idx];
    centroid = centroid / static_cast<double>(hull.vertices.size());

    for (const auto& f : hull.faces) {
        const Vec3 a = points[f[0]];
        Vec3 n = cross(points[f[1]] - a, points[f[2]] - a);
        const double len = length(n);
        if (len == 0.0) return false;
        n = n / len;
        const double side = dot(centroid - a, n);
        if (std::abs(side) < 1e-12) return false;
        const double sign = side > 0.0 ? 1.0 : -1.0;
        for (const Vec3& p : points)
            if (sign * dot(p - a, n) < -tol) return false;
    }
    return true;
}

std::vector<Vec3> random_cloud(Rng& rng, size_t n) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (size_t i = 0; i < n; ++i)
        pts.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    return pts;
}

}  // namespace

TEST_SUITE_BEGIN("convex_hull");

TEST_CASE("the hull of a cube with interior points is exactly the eight corners") {
    std::vector<Vec3> pts = cube_corners();
    pts.push_back({0.5, 0.5, 0.5});
    pts.push_back({0.25, 0.75, 0.5});
    pts.push_back({0.9, 0.1, 0.2});

    const HullResult hull = convex_hull(pts);
    CHECK(hull.vertices == std::vector<size_t>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(hull.faces.size() == 12);
    CHECK(unique_undirected_edges(hull.faces) == 18);  // V - E + F = 8 - 18 + 12 = 2

    const std::set<uint32_t> used = face_vertex_set(hull.faces);
    CHECK(used.size() == hull.vertices.size());
    for (size_t idx : hull.vertices) CHECK(used.count(static_cast<uint32_t>(idx)) == 1);
}

TEST_CASE("points on facet interiors and edges are not hull vertices") {
    std::vector<Vec3> pts = cube_corners();
    // Face centers and edge midpoints lie on the hull boundary but span no corner.
    pts.push_back({0.5, 0.5, 0.0});
    pts.push_back({0.5, 0.5, 1.0});
    pts.push_back({0.0, 0.5, 0.5});
    pts.push_back({1.0, 0.5, 0.5});
    pts.push_back({0.5, 0.0, 0.5});
    pts.push_back({0.5, 1.0, 0.5});
    pts.push_back({0.5, 0.0, 0.0});
    pts.push_back({0.0, 0.5, 0.0});
    pts.push_back({0.0, 0.0, 0.5});
    pts.push_back({1.0, 1.0, 0.5});

    const HullResult hull = convex_hull(pts);
    CHECK(hull.vertices == std::vector<size_t>{0, 1, 2, 3, 4, 5, 6, 7});
    for (const auto& f : hull.faces)
        for (uint32_t idx : f) CHECK(idx < 8);
}

TEST_CASE("a tetrahedron is its own hull") {
    const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const HullResult hull = convex_hull(pts);
    CHECK(hull.vertices == std::vector<size_t>{0, 1, 2, 3});
    CHECK(hull.faces.size() == 4);
    CHECK(unique_undirected_edges(hull.faces) == 6);
    CHECK(edges_match_closed_surface(hull.faces));
}

TEST_CASE("an octahedron keeps all six extreme points") {
    const std::vector<Vec3> pts{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    const HullResult hull = convex_hull(pts);
    CHECK(hull.vertices.size() == 6);
    CHECK(hull.faces.size() == 8);
    CHECK(unique_undirected_edges(hull.faces) == 12);
}

TEST_CASE("every point of a random cloud lies inside or on the hull") {
    Rng rng(17);
    for (int trial = 0; trial < 6; ++trial) {
        const std::vector<Vec3> pts = random_cloud(rng, 120);
        const HullResult hull = convex_hull(pts);
        CHECK(contains_all(pts, hull, 1e-7));
        CHECK(edges_match_closed_surface(hull.faces));
        // Closed genus-0 surface.
        const long v = static_cast<long>(hull.vertices.size());
        const long e = static_cast<long>(unique_undirected_edges(hull.faces));
        const long f = static_cast<long>(hull.faces.size());
        CHECK(v - e + f == 2);
        // All face corners are reported vertices and vice versa.
        const std::set<uint32_t> used = face_vertex_set(hull.faces);
        CHECK(used.size() == hull.vertices.size());
        CHECK(std::is_sorted(hull.vertices.begin(), hull.vertices.end()));
    }
}

TEST_CASE("points spread over a sphere are all extreme") {
    Rng rng(23);
    std::vector<Vec3> pts;
    while (pts.size() < 30) {
        Vec3 p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const double len = length(p);
        if (len < 0.2) continue;
        pts.push_back(p / len);
    }
    const HullResult hull = convex_hull(pts);
    CHECK(hull.vertices.size() == 30);
    CHECK(contains_all(pts, hull, 1e-7));
}

TEST_CASE("degenerate inputs are rejected") {
    CHECK(error_code_of([] { convex_hull({}); }) == ErrorCode::degenerate_hull);
    CHECK(error_code_of([] { convex_hull({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}); }) ==
          ErrorCode::degenerate_hull);

    std::vector<Vec3> line;
    for (int i = 0; i < 10; ++i) line.push_back({0.1 * i, 0.2 * i, -0.05 * i});
    CHECK(error_code_of([&] { convex_hull(line); }) == ErrorCode::degenerate_hull);

    Rng rng(31);
    std::vector<Vec3> flat;
    for (int i = 0; i < 20; ++i) flat.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.3});
    CHECK(error_code_of([&] { convex_hull(flat); }) == ErrorCode::degenerate_hull);

    const std::vector<Vec3> repeated(6, Vec3{0.4, 0.2, 0.9});
    CHECK(error_code_of([&] { convex_hull(repeated); }) == ErrorCode::degenerate_hull);
}

TEST_CASE("hull computation is deterministic") {
    Rng rng(57);
    const std::vector<Vec3> pts = random_cloud(rng, 200);
    const HullResult a = convex_hull(pts);
    const HullResult b = convex_hull(pts);
    CHECK(a.vertices == b.vertices);
    CHECK(a.faces == b.faces);
}

TEST_CASE("convex_hull_vertices matches the full result") {
    Rng rng(71);
    const std::vector<Vec3> pts = random_cloud(rng, 80);
    CHECK(convex_hull_vertices(pts) == convex_hull(pts).vertices);
}

TEST_SUITE_END();
