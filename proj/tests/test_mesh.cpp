#include <cadloop/error.hpp>
#include <cadloop/geom.hpp>
#include <cadloop/mesh.hpp>
#include <cadloop/mesh_io.hpp>
#include <cadloop/surface_query.hpp>
#include <cadloop/util.hpp>

#include <doctest.h>

#include "test_support.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace cadloop;
using testsupport::ScratchDir;
using testsupport::error_code_of;
using testsupport::make_box;
using testsupport::make_uv_sphere;

TEST_SUITE_BEGIN("mesh");

TEST_CASE("OBJ unit cube loads with 8 vertices and 12 triangles") {
    ScratchDir dir;
    std::ostringstream obj;
    obj << "# unit cube\n";
    const double corners[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                  {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    for (const auto& c : corners) obj << "v " << c[0] << " " << c[1] << " " << c[2] << "\n";
    const int quads[6][4] = {{1, 4, 3, 2}, {5, 6, 7, 8}, {1, 2, 6, 5},
                             {4, 8, 7, 3}, {1, 5, 8, 4}, {2, 3, 7, 6}};
    for (const auto& q : quads) {
        obj << "f " << q[0] << " " << q[1] << " " << q[2] << "\n";
        obj << "f " << q[0] << " " << q[2] << " " << q[3] << "\n";
    }
    const auto path = dir.file("cube.obj");
    write_text_file(path, obj.str());

    const TriangleMesh mesh = load_mesh(path);
    CHECK(mesh.vertices.size() == 8);
    CHECK(mesh.triangle_count() == 12);
    CHECK(mesh.face_normals.size() == 12);
    mesh.validate();
}

TEST_CASE("empty mesh file is rejected") {
    ScratchDir dir;
    const auto path = dir.file("empty.obj");
    write_text_file(path, "");
    CHECK(error_code_of([&] { load_mesh(path); }) == ErrorCode::malformed_geometry);
}

TEST_CASE("missing file and unknown extension report the right errors") {
    ScratchDir dir;
    CHECK(error_code_of([&] { load_mesh(dir.file("nope.obj")); }) == ErrorCode::file_not_found);
    write_text_file(dir.file("mesh.xyz"), "v 0 0 0\n");
    CHECK(error_code_of([&] { load_mesh(dir.file("mesh.xyz")); }) ==
          ErrorCode::unsupported_format);
}

TEST_CASE("ASCII STL tetrahedron: 4 triangles, normals recomputed to unit length") {
    // Hand-authored fixture. Expected normals are derived here from the raw
    // vertex coordinates by cross products, independently of the loader: the
    // file's stored "normal" lines are deliberately wrong and must be ignored.
    const double v[4][3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const int faces[4][3] = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    std::ostringstream stl;
    stl << "solid tetra\n";
    for (const auto& f : faces) {
        stl << "  facet normal 9 9 9\n    outer loop\n";
        for (int k = 0; k < 3; ++k)
            stl << "      vertex " << v[f[k]][0] << " " << v[f[k]][1] << " " << v[f[k]][2]
                << "\n";
        stl << "    endloop\n  endfacet\n";
    }
    stl << "endsolid tetra\n";

    ScratchDir dir;
    const auto path = dir.file("tetra.stl");
    write_text_file(path, stl.str());
    const TriangleMesh mesh = load_mesh(path);
    REQUIRE(mesh.triangle_count() == 4);

    for (size_t t = 0; t < 4; ++t) {
        CHECK(length(mesh.face_normals[t]) == doctest::Approx(1.0).epsilon(1e-6));
        const Vec3 a = mesh.triangle_vertex(t, 0);
        const Vec3 b = mesh.triangle_vertex(t, 1);
        const Vec3 c = mesh.triangle_vertex(t, 2);
        const Vec3 expected = normalized(cross(b - a, c - a));
        CHECK(length(mesh.face_normals[t] - expected) < 1e-9);
    }
}

TEST_CASE("validate rejects non-finite vertices and bad indices") {
    TriangleMesh mesh = make_box({0, 0, 0}, {1, 1, 1});
    mesh.vertices[0].x = std::nan("");
    CHECK(error_code_of([&] { mesh.validate(); }) == ErrorCode::non_finite_geometry);

    TriangleMesh bad = make_box({0, 0, 0}, {1, 1, 1});
    bad.triangles[0][1] = 99;
    CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::malformed_geometry);
}

TEST_CASE("surface sampling: per-face counts on the unit cube stay in binomial range") {
    const TriangleMesh cube = make_box({0, 0, 0}, {1, 1, 1});
    const auto samples = sample_surface(cube, 6000, 7);
    REQUIRE(samples.size() == 6000);

    // Classify by which coordinate sits on a face plane. Barycentric mixing
    // leaves samples within one ulp of the plane, hence the tolerance.
    const auto on = [](double v, double plane) { return std::abs(v - plane) < 1e-9; };
    std::map<std::string, int> face_counts;
    for (const auto& s : samples) {
        const Vec3& p = s.position;
        if (on(p.z, 0.0)) ++face_counts["z0"];
        else if (on(p.z, 1.0)) ++face_counts["z1"];
        else if (on(p.y, 0.0)) ++face_counts["y0"];
        else if (on(p.y, 1.0)) ++face_counts["y1"];
        else if (on(p.x, 0.0)) ++face_counts["x0"];
        else if (on(p.x, 1.0)) ++face_counts["x1"];
    }
    int classified = 0;
    for (const auto& [face, count] : face_counts) {
        CHECK(count > 900);   // 1000 +- 100 per face
        CHECK(count < 1100);
        classified += count;
    }
    CHECK(classified == 6000);
}

TEST_CASE("surface sampling: area-uniform within 4 sigma on unequal triangles") {
    // Two triangles with areas 0.5 and 4.5: expected split 10% / 90%.
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 0, 1}, {8, 0, 1}, {5, 3, 1}};
    mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
    mesh.recompute_normals();

    const size_t n = 20000;
    const auto samples = sample_surface(mesh, n, 3);
    size_t on_small = 0;
    for (const auto& s : samples)
        if (s.position.z == 0.0) ++on_small;
    const double p = 0.1;
    const double sigma = std::sqrt(double(n) * p * (1 - p));
    CHECK(std::abs(double(on_small) - double(n) * p) <= 4.0 * sigma);
}

TEST_CASE("surface sampling: points lie on their triangle and normals match") {
    TriangleMesh tri;
    tri.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
    tri.triangles = {{0, 1, 2}};
    tri.recompute_normals();
    const auto samples = sample_surface(tri, 3, 11);
    REQUIRE(samples.size() == 3);
    for (const auto& s : samples) {
        // Barycentric containment on the z=0 triangle x,y >= 0, x+y <= 2.
        CHECK(s.position.z == 0.0);
        CHECK(s.position.x >= 0.0);
        CHECK(s.position.y >= 0.0);
        CHECK(s.position.x + s.position.y <= 2.0 + 1e-12);
        CHECK(length(s.normal - Vec3{0, 0, 1}) < 1e-12);
    }
}

TEST_CASE("surface sampling is deterministic under (mesh, n, seed)") {
    const TriangleMesh cube = make_box({-1, -1, -1}, {1, 1, 1});
    const auto a = sample_surface(cube, 500, 42);
    const auto b = sample_surface(cube, 500, 42);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].position == b[i].position);
        CHECK(a[i].normal == b[i].normal);
    }
    const auto c = sample_surface(cube, 500, 43);
    bool any_different = false;
    for (size_t i = 0; i < c.size(); ++i) any_different |= !(a[i].position == c[i].position);
    CHECK(any_different);
}

TEST_CASE("sampling a zero-area mesh fails") {
    TriangleMesh degenerate;
    degenerate.vertices = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
    degenerate.triangles = {{0, 1, 2}};
    degenerate.recompute_normals();
    CHECK(error_code_of([&] { sample_surface(degenerate, 10, 0); }) ==
          ErrorCode::zero_area_mesh);
}

TEST_CASE("normalize: 200-unit cube lands exactly in the 1/100 frame") {
    const TriangleMesh cube = make_box({-100, -100, -100}, {100, 100, 100});
    const auto [scaled, t] = normalize(cube, FrameTag::prediction_over_100);
    CHECK(t.frame_tag == FrameTag::prediction_over_100);
    const Aabb box = scaled.bounds();
    CHECK(box.min.x == doctest::Approx(-1.0));
    CHECK(box.max.z == doctest::Approx(1.0));
    // The 1/100 frame is a fixed scale, not a fit: an off-center mesh keeps
    // its offset.
    const TriangleMesh shifted = make_box({0, 0, 0}, {50, 50, 50});
    const auto [s2, t2] = normalize(shifted, FrameTag::prediction_over_100);
    CHECK(s2.bounds().min.x == doctest::Approx(0.0));
    CHECK(s2.bounds().max.x == doctest::Approx(0.5));
}

TEST_CASE("normalize: mesh already filling the unit frame maps to itself") {
    const TriangleMesh cube = make_box({0, 0, 0}, {1, 1, 1});
    const auto [same, t] = normalize(cube, FrameTag::unit_cube_01);
    CHECK(t.scale == doctest::Approx(1.0));
    CHECK(length(t.translation) < 1e-12);
    for (size_t i = 0; i < cube.vertices.size(); ++i)
        CHECK(length(same.vertices[i] - cube.vertices[i]) < 1e-12);
}

TEST_CASE("normalize: elongated box centers its short axes in the unit frame") {
    const TriangleMesh box = make_box({0, 0, 0}, {2, 1, 1});
    const auto [fit, t] = normalize(box, FrameTag::unit_cube_01);
    CHECK(t.scale == doctest::Approx(0.5));
    const Aabb b = fit.bounds();
    CHECK(b.min.x == doctest::Approx(0.0));
    CHECK(b.max.x == doctest::Approx(1.0));
    CHECK(b.min.y == doctest::Approx(0.25));
    CHECK(b.max.y == doctest::Approx(0.75));
    CHECK(b.min.z == doctest::Approx(0.25));
    CHECK(b.max.z == doctest::Approx(0.75));
}

TEST_CASE("normalize then invert reproduces the input within 1e-9") {
    const TriangleMesh mesh = make_uv_sphere({13.0, -54.0, 2.5}, 17.0, 8, 12);
    for (const FrameTag tag :
         {FrameTag::unit_cube_01, FrameTag::signed_cube_11, FrameTag::prediction_over_100}) {
        const auto [out, t] = normalize(mesh, tag);
        CHECK(t.scale > 0.0);
        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            CHECK(length(t.invert(out.vertices[i]) - mesh.vertices[i]) < 1e-9);
            CHECK(length(t.apply(mesh.vertices[i]) - out.vertices[i]) < 1e-12);
        }
    }
}

TEST_CASE("normalize rejects a point-like mesh") {
    TriangleMesh point;
    point.vertices = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
    point.triangles = {{0, 1, 2}};
    point.recompute_normals();
    CHECK(error_code_of([&] { normalize(point, FrameTag::unit_cube_01); }) ==
          ErrorCode::degenerate_extent);
}

TEST_CASE("apply_transform moves vertices and keeps triangle topology") {
    const TriangleMesh cube = make_box({-100, -100, -100}, {100, 100, 100});
    NormalizationTransform t;
    t.scale = 1.0 / 200.0;
    t.translation = {0.5, 0.5, 0.5};
    const TriangleMesh moved = apply_transform(cube, t);
    CHECK(moved.triangles == cube.triangles);
    CHECK(moved.bounds().min.x == doctest::Approx(0.0));
    CHECK(moved.bounds().max.x == doctest::Approx(1.0));
}

TEST_CASE("voxelize: cube filling the unit domain marks every cell inside") {
    // Slightly asymmetric overhang so face diagonals miss all cell centers.
    const TriangleMesh cube = make_box({-0.013, -0.027, -0.041}, {1.017, 1.031, 1.047});
    const OccupancyGrid grid = voxelize_occupancy(cube, 64);
    CHECK(grid.inside_count() == size_t(64) * 64 * 64);
    CHECK(grid.volume() == doctest::Approx(1.0));
}

TEST_CASE("voxelize: mesh outside the domain yields zero occupancy") {
    const TriangleMesh cube = make_box({10, 10, 10}, {11, 11, 11});
    const OccupancyGrid grid = voxelize_occupancy(cube, 32);
    CHECK(grid.inside_count() == 0);
}

TEST_CASE("voxelize: sphere volume within 2% of analytic at resolution 64") {
    const double r = 0.4;
    const TriangleMesh sphere = make_uv_sphere({0.5, 0.5, 0.5}, r, 32, 64);
    const OccupancyGrid grid = voxelize_occupancy(sphere, 64);
    const double analytic = 4.0 / 3.0 * 3.14159265358979323846 * r * r * r;
    CHECK(std::abs(grid.volume() - analytic) / analytic < 0.02);
}

TEST_CASE("voxelize: occupancy error halves or better per doubled resolution") {
    // The reference is each mesh's exact divergence-theorem volume, since the
    // grid converges to the faceted solid, not to the smooth sphere it
    // approximates. Errors oscillate between adjacent resolutions, so the
    // halving ladder is anchored at the coarsest grid and measured as an RMS
    // over four off-center spheres.
    const auto mesh_volume = [](const TriangleMesh& m) {
        double v = 0.0;
        for (size_t t = 0; t < m.triangle_count(); ++t)
            v += dot(m.triangle_vertex(t, 0),
                     cross(m.triangle_vertex(t, 1), m.triangle_vertex(t, 2))) / 6.0;
        return std::abs(v);
    };
    struct Fixture { Vec3 center; double radius; };
    const Fixture fixtures[4] = {{{0.53, 0.49, 0.511}, 0.37},
                                 {{0.47, 0.52, 0.49}, 0.31},
                                 {{0.55, 0.45, 0.52}, 0.28},
                                 {{0.5, 0.54, 0.47}, 0.41}};
    const auto rms_err = [&](int res) {
        double sum2 = 0.0;
        for (const Fixture& f : fixtures) {
            const TriangleMesh sphere = make_uv_sphere(f.center, f.radius, 48, 96);
            const double ref = mesh_volume(sphere);
            const double rel = (voxelize_occupancy(sphere, res).volume() - ref) / ref;
            sum2 += rel * rel;
        }
        return std::sqrt(sum2 / 4.0);
    };
    const double base = rms_err(8);
    double allowance = base;
    for (const int res : {16, 32, 64, 128}) {
        allowance *= 0.5;
        CHECK(rms_err(res) <= allowance);
    }
}

TEST_CASE("boundary_edge_count: closed, punctured, and open meshes") {
    const TriangleMesh cube = make_box({0, 0, 0}, {1, 1, 1});
    CHECK(boundary_edge_count(cube) == 0);

    TriangleMesh punctured = cube;
    punctured.triangles.pop_back();
    punctured.recompute_normals();
    CHECK(boundary_edge_count(punctured) == 3);

    TriangleMesh single;
    single.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    single.triangles = {{0, 1, 2}};
    single.recompute_normals();
    CHECK(boundary_edge_count(single) == 3);
}

TEST_CASE("mesh round trips through OBJ, STL, and PLY") {
    ScratchDir dir;
    const TriangleMesh mesh = make_uv_sphere({3.0, -2.0, 7.0}, 5.0, 6, 8);

    for (const std::string ext : {".obj", ".ply"}) {
        const auto path = dir.file("roundtrip" + ext);
        save_mesh(mesh, path);
        const TriangleMesh back = load_mesh(path);
        REQUIRE(back.vertices.size() == mesh.vertices.size());
        REQUIRE(back.triangles == mesh.triangles);
        for (size_t i = 0; i < mesh.vertices.size(); ++i)
            CHECK(length(back.vertices[i] - mesh.vertices[i]) < 1e-12);
    }

    // Binary STL stores 32-bit floats and dissolves shared vertices.
    const auto stl_path = dir.file("roundtrip.stl");
    save_mesh(mesh, stl_path);
    const TriangleMesh stl_back = load_mesh(stl_path);
    REQUIRE(stl_back.triangle_count() == mesh.triangle_count());
    for (size_t t = 0; t < mesh.triangle_count(); ++t)
        for (int k = 0; k < 3; ++k)
            CHECK(length(stl_back.triangle_vertex(t, k) - mesh.triangle_vertex(t, k)) < 1e-4);
}

TEST_CASE("nearest surface point: analytic cube cases") {
    const TriangleMesh cube = make_box({0, 0, 0}, {1, 1, 1});
    const SurfaceIndex index(cube);

    // Centroid of one z=1 face triangle lies on the surface.
    const Vec3 centroid = (cube.triangle_vertex(2, 0) + cube.triangle_vertex(2, 1) +
                           cube.triangle_vertex(2, 2)) / 3.0;
    CHECK(index.nearest(centroid).distance < 1e-12);

    const NearestHit hit = index.nearest({2.0, 0.5, 0.5});
    CHECK(hit.distance == doctest::Approx(1.0));
    CHECK(length(hit.point - Vec3{1.0, 0.5, 0.5}) < 1e-12);
}

TEST_CASE("nearest surface point matches the exhaustive oracle on a 50-triangle mesh") {
    const TriangleMesh mesh = make_uv_sphere({0.2, -0.1, 0.4}, 1.3, 6, 5);
    REQUIRE(mesh.triangle_count() == 50);
    const SurfaceIndex index(mesh);

    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const Vec3 q{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        const NearestHit hit = index.nearest(q);
        const double oracle = testsupport::oracle_distance_to_mesh(q, mesh);
        CHECK(hit.distance == doctest::Approx(oracle).epsilon(1e-12));
        CHECK(std::abs(length(q - hit.point) - hit.distance) < 1e-12);
    }
}

TEST_CASE("PointKdTree returns the true nearest neighbor") {
    Rng rng(5);
    std::vector<Vec3> points;
    for (int i = 0; i < 300; ++i)
        points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const PointKdTree tree(points);
    REQUIRE(tree.size() == points.size());

    for (int i = 0; i < 100; ++i) {
        const Vec3 q{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
        const auto [idx, d2] = tree.nearest(q);
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : points) best = std::min(best, length_squared(q - p));
        CHECK(d2 == doctest::Approx(best).epsilon(1e-15));
        CHECK(length_squared(q - tree.point(idx)) == doctest::Approx(best).epsilon(1e-15));
    }
}

TEST_SUITE_END();
