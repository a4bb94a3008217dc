#include <doctest.h>

#include <cadloop/error.hpp>
#include <cadloop/mesh.hpp>
#include <cadloop/metrics.hpp>
#include <cadloop/render.hpp>

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "test_support.hpp"

using namespace cadloop;
using testsupport::brute_chamfer_x1e3;
using testsupport::error_code_of;
using testsupport::make_box;
using testsupport::make_uv_sphere;

namespace {

std::vector<Vec3> random_cloud(Rng& rng, size_t n) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (size_t i = 0; i < n; ++i)
        pts.push_back({rng.uniform(-1.5, 2.0), rng.uniform(-1.5, 2.0), rng.uniform(-1.5, 2.0)});
    return pts;
}

std::vector<Vec3> sampled_positions(const TriangleMesh& mesh, size_t n, uint64_t seed) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (const PointSample& s : sample_surface(mesh, n, seed)) pts.push_back(s.position);
    return pts;
}

MetricReport valid_report(double cd, double iou) {
    MetricReport r;
    r.valid = true;
    r.cd_times_1e3 = cd;
    r.iou_percent = iou;
    return r;
}

MetricReport invalid_report(const std::string& reason) {
    MetricReport r;
    r.failure_reason = reason;
    return r;
}

const char* kCubeProgram = "extrude plane=XY z0=0 h=40 { add rect 0 0 40 40 }";

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("two single-point clouds score the sum of both squared gaps") {
    const std::vector<Vec3> a{{0.0, 0.0, 0.0}};
    const std::vector<Vec3> b{{1.0, 0.0, 0.0}};
    CHECK(chamfer_points(a, b) == 2000.0);
    CHECK(brute_chamfer_x1e3(a, b) == 2000.0);
}

TEST_CASE("point chamfer matches the exhaustive oracle on random clouds") {
    Rng rng(41);
    const std::vector<std::pair<size_t, size_t>> shapes{{40, 60}, {200, 200}, {1, 173}, {311, 7}};
    for (const auto& [na, nb] : shapes) {
        const std::vector<Vec3> a = random_cloud(rng, na);
        const std::vector<Vec3> b = random_cloud(rng, nb);
        const double fast = chamfer_points(a, b);
        const double slow = brute_chamfer_x1e3(a, b);
        CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
    }
}

TEST_CASE("point chamfer is symmetric") {
    Rng rng(42);
    const std::vector<Vec3> a = random_cloud(rng, 90);
    const std::vector<Vec3> b = random_cloud(rng, 130);
    CHECK(chamfer_points(a, b) == chamfer_points(b, a));
}

TEST_CASE("point chamfer rejects empty clouds") {
    const std::vector<Vec3> one{{0.0, 0.0, 0.0}};
    CHECK(error_code_of([&] { chamfer_points({}, one); }) == ErrorCode::insufficient_samples);
    CHECK(error_code_of([&] { chamfer_points(one, {}); }) == ErrorCode::insufficient_samples);
}

TEST_CASE("mesh chamfer draws both sample sets with one seed so self-distance is zero") {
    const TriangleMesh box = make_box({0.2, 0.2, 0.2}, {0.8, 0.8, 0.8});
    for (uint64_t seed : {0ull, 3ull, 99ull}) CHECK(chamfer(box, box, 1024, seed) == 0.0);
}

TEST_CASE("mesh chamfer equals point chamfer on the documented sampling") {
    const TriangleMesh a = make_box({0.1, 0.1, 0.1}, {0.6, 0.6, 0.6});
    const TriangleMesh b = make_box({0.3, 0.3, 0.3}, {0.9, 0.9, 0.9});
    const size_t n = 600;
    const uint64_t seed = 11;
    const double via_points =
        brute_chamfer_x1e3(sampled_positions(a, n, seed), sampled_positions(b, n, seed));
    CHECK(chamfer(a, b, n, seed) == doctest::Approx(via_points).epsilon(1e-12));
}

TEST_CASE("a pure offset between congruent triangles scores exactly the squared gap") {
    // Same seed on congruent triangles pairs the samples up, and with all
    // source z equal the translated samples differ by exactly (0,0,0.5), so
    // every nearest-neighbor distance is exactly 0.25.
    TriangleMesh tri;
    tri.vertices = {{0.25, 0.25, 0.25}, {0.75, 0.25, 0.25}, {0.25, 0.75, 0.25}};
    tri.triangles = {{0, 1, 2}};
    tri.recompute_normals();
    const TriangleMesh lifted =
        apply_transform(tri, NormalizationTransform{1.0, {0.0, 0.0, 0.5}, FrameTag::unit_cube_01});
    const double c = chamfer(tri, lifted, 2048, 5);
    CHECK(c == doctest::Approx(500.0).epsilon(1e-12));
    CHECK(c >= 500.0 - 1e-9);
}

TEST_CASE("volumetric IoU of identical geometry is exactly 100") {
    const TriangleMesh box = make_box({0.1, 0.1, 0.1}, {0.9, 0.9, 0.9});
    CHECK(volumetric_iou(box, box, 64) == 100.0);
}

TEST_CASE("volumetric IoU matches the analytic overlap of half-shifted unit boxes") {
    // Boxes [0,1]^3 and [0.5,1.5]^3 in a side-2 grid whose cells align with
    // every box face: intersection 0.125, union 1.875, exactly 20/3 percent.
    const TriangleMesh a = make_box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    const TriangleMesh b = make_box({0.5, 0.5, 0.5}, {1.5, 1.5, 1.5});
    const GridDomain domain{{-0.25, -0.25, -0.25}, 2.0};
    CHECK(volumetric_iou(a, b, 64, domain) == doctest::Approx(20.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("volumetric IoU approaches the analytic cube-sphere ratio as the grid refines") {
    const TriangleMesh cube = make_box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
    const TriangleMesh sphere = make_uv_sphere({0.5, 0.5, 0.5}, 0.5);
    const double analytic = 100.0 * 3.14159265358979323846 / 6.0;
    const double iou16 = volumetric_iou(cube, sphere, 16);
    const double iou64 = volumetric_iou(cube, sphere, 64);
    const double iou256 = volumetric_iou(cube, sphere, 256);
    // The plateau sits slightly under the analytic ratio because the faceted
    // sphere encloses a bit less volume than the smooth one.
    CHECK(std::abs(iou64 - analytic) < 1.0);
    CHECK(std::abs(iou256 - analytic) < std::abs(iou16 - analytic));
    CHECK(std::abs(iou64 - iou256) < 0.5);
}

TEST_CASE("disjoint geometry scores zero and empty shared occupancy raises EmptyUnion") {
    const TriangleMesh lo = make_box({0.0, 0.0, 0.0}, {0.25, 0.25, 0.25});
    const TriangleMesh hi = make_box({0.75, 0.75, 0.75}, {1.0, 1.0, 1.0});
    CHECK(volumetric_iou(lo, hi, 64) == 0.0);

    // Boxes thinner than half a cell straddle no cell center at all.
    const TriangleMesh fleck_a = make_box({0.0, 0.0, 0.0}, {1e-4, 1e-4, 1e-4});
    const TriangleMesh fleck_b = make_box({1.0 - 1e-4, 1.0 - 1e-4, 1.0 - 1e-4}, {1.0, 1.0, 1.0});
    CHECK(error_code_of([&] { volumetric_iou(fleck_a, fleck_b, 64); }) == ErrorCode::empty_union);
}

TEST_CASE("the modeling frame maps onto the unit cube by the fixed affine") {
    const NormalizationTransform t = modeling_to_metric();
    CHECK(t.scale == 0.005);
    CHECK(t.translation.x == 0.5);
    CHECK(t.translation.y == 0.5);
    CHECK(t.translation.z == 0.5);
    CHECK(t.frame_tag == FrameTag::unit_cube_01);

    const Vec3 lo = t.apply({-100.0, -100.0, -100.0});
    CHECK(lo.x == 0.0);
    CHECK(lo.y == 0.0);
    CHECK(lo.z == 0.0);
    const Vec3 hi = t.apply({100.0, 100.0, 100.0});
    CHECK(hi.x == 1.0);
    CHECK(hi.y == 1.0);
    CHECK(hi.z == 1.0);
    const Vec3 mid = t.apply({37.5, -50.0, 12.5});
    CHECK(mid.x == 0.6875);
    CHECK(mid.y == 0.25);
    CHECK(mid.z == 0.5625);
    const Vec3 back = t.invert(mid);
    CHECK(back.x == 37.5);
    CHECK(back.y == -50.0);
    CHECK(back.z == 12.5);
}

TEST_CASE("candidate failures are recorded by name, never thrown") {
    const DslRenderer renderer(32);
    const TriangleMesh target =
        apply_transform(renderer.render(kCubeProgram), modeling_to_metric());

    const MetricReport parse = evaluate_candidate(target, "blob", renderer);
    CHECK_FALSE(parse.valid);
    CHECK(parse.failure_reason == "ParseError");
    CHECK_FALSE(parse.cd_times_1e3.has_value());
    CHECK_FALSE(parse.iou_percent.has_value());

    const MetricReport range = evaluate_candidate(
        target, "extrude plane=XY z0=0 h=500 { add rect 0 0 40 40 }", renderer);
    CHECK_FALSE(range.valid);
    CHECK(range.failure_reason == "RangeError");

    const MetricReport degenerate = evaluate_candidate(
        target,
        "extrude plane=XY z0=0 h=40 { add rect 0 0 40 40 }\n"
        "extrude plane=XY z0=0 h=60 combine=cut { add rect 0 0 60 60 }",
        renderer);
    CHECK_FALSE(degenerate.valid);
    CHECK(degenerate.failure_reason == "DegenerateSolid");

    const MetricReport ok = evaluate_candidate(target, kCubeProgram, renderer);
    CHECK(ok.valid);
    CHECK(ok.failure_reason.empty());
}

TEST_CASE("self-evaluation of a rendered program is perfect") {
    // Rendering is deterministic, so the candidate mesh is bit-identical to
    // the target and the same-seed samples coincide.
    const DslRenderer renderer(128);
    const TriangleMesh target =
        apply_transform(renderer.render(kCubeProgram), modeling_to_metric());
    const MetricReport rep = evaluate_candidate(target, kCubeProgram, renderer);
    CHECK(rep.valid);
    CHECK(rep.failure_reason.empty());
    REQUIRE(rep.cd_times_1e3.has_value());
    REQUIRE(rep.iou_percent.has_value());
    CHECK(*rep.cd_times_1e3 == 0.0);
    CHECK(*rep.iou_percent == 100.0);
}

TEST_CASE("evaluate_mesh scores a modeling-frame render against a metric target") {
    const DslRenderer renderer(64);
    const TriangleMesh target =
        apply_transform(renderer.render(kCubeProgram), modeling_to_metric());

    const MetricReport same = evaluate_mesh(target, renderer.render(kCubeProgram));
    CHECK(same.valid);
    CHECK(*same.cd_times_1e3 == 0.0);
    CHECK(*same.iou_percent == 100.0);

    // Nested cubes of side 40 and 60 in the modeling frame map to sides 0.2
    // and 0.3 in the metric frame: continuous-geometry IoU (2/3)^3 = 29.6%.
    // Coarse renders chamfer the cube edges and the occupancy grid quantizes
    // the faces, so the measured ratio sits below that; the bracket still
    // separates any frame-mapping error by a wide margin.
    const MetricReport bigger = evaluate_mesh(
        target, renderer.render("extrude plane=XY z0=0 h=60 { add rect 0 0 60 60 }"));
    CHECK(bigger.valid);
    CHECK(*bigger.cd_times_1e3 > 0.5);
    CHECK(*bigger.iou_percent > 15.0);
    CHECK(*bigger.iou_percent < 35.0);
}

TEST_CASE("aggregate reports the median, mean IoU, and invalid rate") {
    const AggregateReport mixed = aggregate(
        {valid_report(1.0, 80.0), valid_report(3.0, 60.0), invalid_report("ParseError")});
    CHECK(mixed.total == 3);
    CHECK(mixed.valid_count == 2);
    REQUIRE(mixed.median_cd.has_value());
    CHECK(*mixed.median_cd == 2.0);
    CHECK(*mixed.mean_iou == 70.0);
    CHECK(mixed.invalid_rate_percent == doctest::Approx(100.0 / 3.0).epsilon(1e-12));

    const AggregateReport odd =
        aggregate({valid_report(9.0, 10.0), valid_report(1.0, 20.0), valid_report(5.0, 30.0)});
    CHECK(*odd.median_cd == 5.0);

    const AggregateReport even = aggregate({valid_report(4.0, 0.0), valid_report(1.0, 0.0),
                                            valid_report(3.0, 0.0), valid_report(2.0, 0.0)});
    CHECK(*even.median_cd == 2.5);

    const AggregateReport uniform =
        aggregate({valid_report(7.0, 50.0), valid_report(7.0, 50.0), valid_report(7.0, 50.0)});
    CHECK(*uniform.median_cd == 7.0);
    CHECK(uniform.invalid_rate_percent == 0.0);

    const AggregateReport none =
        aggregate({invalid_report("Timeout"), invalid_report("RangeError")});
    CHECK(none.total == 2);
    CHECK(none.valid_count == 0);
    CHECK_FALSE(none.median_cd.has_value());
    CHECK_FALSE(none.mean_iou.has_value());
    CHECK(none.invalid_rate_percent == 100.0);

    CHECK(error_code_of([] { aggregate({}); }) == ErrorCode::range_error);
}

TEST_CASE("aggregate serializes to json and a fixed-width table") {
    const AggregateReport mixed = aggregate(
        {valid_report(1.0, 80.0), valid_report(3.0, 60.0), invalid_report("ParseError")});
    const nlohmann::json j = nlohmann::json::parse(aggregate_to_json(mixed));
    CHECK(j.at("median_cd_times_1e3").get<double>() == 2.0);
    CHECK(j.at("mean_iou_percent").get<double>() == 70.0);
    CHECK(j.at("invalid_rate_percent").get<double>() ==
          doctest::Approx(100.0 / 3.0).epsilon(1e-12));
    CHECK(j.at("total").get<size_t>() == 3);
    CHECK(j.at("valid").get<size_t>() == 2);

    const nlohmann::json empty = nlohmann::json::parse(
        aggregate_to_json(aggregate({invalid_report("Timeout")})));
    CHECK(empty.at("median_cd_times_1e3").is_null());
    CHECK(empty.at("mean_iou_percent").is_null());

    const std::string table = aggregate_table(mixed);
    CHECK(table.find("CD (x1e3)") != std::string::npos);
    CHECK(table.find("IoU (%)") != std::string::npos);
    CHECK(table.find("IR (%)") != std::string::npos);
    CHECK(table.find("2.000") != std::string::npos);
    CHECK(table.find("70.000") != std::string::npos);
    CHECK(table.find("33.33") != std::string::npos);
}

TEST_SUITE_END();
