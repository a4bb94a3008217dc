#include <cadloop/convex_hull.hpp>
#include <cadloop/error.hpp>
#include <cadloop/marching_cubes.hpp>
#include <cadloop/mesh_io.hpp>
#include <cadloop/scan_sim.hpp>
#include <cadloop/surface_query.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>

namespace cadloop {
namespace {

constexpr double kFlipRadiusFactor = 100.0;  // HPR sphere, in max sample distances
constexpr double kElevation = std::numbers::pi / 6.0;

void validate_config(const ScanConfig& cfg) {
    auto fail = [](const std::string& why) {
        throw Error(ErrorCode::range_error, "scan config: " + why);
    };
    if (cfg.n_points < 1 || cfg.n_views < 1) fail("counts must be >= 1");
    if (!(cfg.radius_factor > 1.0)) fail("radius_factor must exceed 1");
    if (cfg.hole_count_min < 0 || cfg.hole_count_max < cfg.hole_count_min)
        fail("hole count range is inverted");
    if (cfg.hole_count_max > 0 &&
        !(cfg.hole_radius_min > 0.0 && cfg.hole_radius_max <= 0.2 &&
          cfg.hole_radius_min <= cfg.hole_radius_max))
        fail("hole radius fractions must lie in (0, 0.2]");
    if (cfg.recon_resolution < 16 || cfg.recon_resolution > 512)
        fail("recon_resolution must lie in [16, 512]");
}

std::vector<size_t> visible_indices(const std::vector<PointSample>& samples,
                                    const VirtualCamera& cam) {
    if (samples.empty())
        throw Error(ErrorCode::insufficient_samples, "no samples to test for visibility");
    const Vec3 c = cam.position;
    double maxd = 0.0;
    for (const PointSample& s : samples) maxd = std::max(maxd, length(s.position - c));
    if (!(maxd > 0.0))
        throw Error(ErrorCode::degenerate_hull, "all samples coincide with the camera");
    const double R = kFlipRadiusFactor * maxd;

    std::vector<Vec3> flipped;
    flipped.reserve(samples.size() + 1);
    for (const PointSample& s : samples) {
        Vec3 d = s.position - c;
        double len = length(d);
        // A sample exactly at the camera flips onto the camera itself.
        flipped.push_back(len > 0.0 ? s.position + d * (2.0 * (R - len) / len) : c);
    }
    flipped.push_back(c);

    std::vector<char> on_hull(flipped.size(), 0);
    for (size_t idx : convex_hull_vertices(flipped)) on_hull[idx] = 1;

    std::vector<size_t> kept;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (!on_hull[i]) continue;
        if (dot(samples[i].normal, c - samples[i].position) <= 0.0) continue;
        kept.push_back(i);
    }
    return kept;
}

std::string make_temp_stem() {
    static uint64_t state = 0x9e3779b97f4a7c15ull;
    return "cadloop_recon_" + std::to_string(splitmix64(state) % 1000000);
}

}  // namespace

std::vector<VirtualCamera> camera_trajectory(const Aabb& aabb, const ScanConfig& cfg) {
    validate_config(cfg);
    if (!aabb.valid()) throw Error(ErrorCode::degenerate_extent, "invalid AABB");
    const Vec3 center = aabb.center();
    const double bounding_radius = length(aabb.extent()) / 2.0;
    if (!(bounding_radius > 0.0))
        throw Error(ErrorCode::degenerate_extent, "AABB is a single point");
    const double radius = cfg.radius_factor * bounding_radius;

    Rng rng(derive_seed(cfg.seed, 1));
    const double azimuth0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int phase = rng.coin(0.5) ? 1 : 0;

    std::vector<VirtualCamera> cams;
    cams.reserve(cfg.n_views);
    for (int i = 0; i < cfg.n_views; ++i) {
        double azimuth = azimuth0 + 2.0 * std::numbers::pi * i / cfg.n_views;
        double elevation = ((i + phase) % 2 == 0) ? kElevation : -kElevation;
        Vec3 offset{std::cos(elevation) * std::cos(azimuth),
                    std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
        cams.push_back({center + offset * radius, center});
    }
    return cams;
}

std::vector<PointSample> visible_points(const std::vector<PointSample>& samples,
                                        const VirtualCamera& cam) {
    std::vector<PointSample> kept;
    for (size_t i : visible_indices(samples, cam)) kept.push_back(samples[i]);
    return kept;
}

TriangleMesh reconstruct_surface(const std::vector<PointSample>& points, int resolution) {
    if (points.size() < 100)
        throw Error(ErrorCode::insufficient_samples,
                    "reconstruction needs >= 100 oriented points, got " +
                        std::to_string(points.size()));
    if (resolution < 16 || resolution > 512)
        throw Error(ErrorCode::range_error, "reconstruction resolution must lie in [16, 512]");

    Aabb box;
    for (const PointSample& p : points) box.expand(p.position);
    const Vec3 ext = box.extent();
    const double max_extent = std::max({ext.x, ext.y, ext.z});
    if (!(max_extent > 0.0))
        throw Error(ErrorCode::degenerate_extent, "point cloud collapses to a point");

    // 4 cells of margin per side around the longest axis.
    const double cell = max_extent / (resolution - 8);
    const double side = resolution * cell;
    const Vec3 center = box.center();
    const Vec3 origin = center - Vec3{side, side, side} / 2.0;

    // Samples binned at cell granularity for the 2-cell gather radius.
    const int bins = resolution;
    auto bin_of = [&](const Vec3& p) {
        auto clampi = [&](double v) {
            int i = int(std::floor(v));
            return std::min(bins - 1, std::max(0, i));
        };
        return std::array<int, 3>{clampi((p.x - origin.x) / cell), clampi((p.y - origin.y) / cell),
                                  clampi((p.z - origin.z) / cell)};
    };
    std::vector<std::vector<uint32_t>> grid_bins(size_t(bins) * bins * bins);
    auto bin_index = [&](int i, int j, int k) {
        return size_t(i) + size_t(bins) * (size_t(j) + size_t(bins) * size_t(k));
    };
    for (uint32_t i = 0; i < points.size(); ++i) {
        auto b = bin_of(points[i].position);
        grid_bins[bin_index(b[0], b[1], b[2])].push_back(i);
    }

    std::vector<Vec3> positions(points.size());
    for (size_t i = 0; i < points.size(); ++i) positions[i] = points[i].position;
    PointKdTree kd(positions);

    ScalarGrid field;
    field.cells = resolution;
    field.origin = origin;
    field.cell_size = cell;
    const size_t nodes = size_t(resolution + 1);
    field.values.assign(nodes * nodes * nodes, 0.0);

    const double sigma2 = cell * cell;            // sigma = one cell
    const double radius2 = 4.0 * cell * cell;     // gather within two cells
    bool any_neg = false, any_pos = false;
    for (int k = 0; k < resolution + 1; ++k)
        for (int j = 0; j < resolution + 1; ++j)
            for (int i = 0; i < resolution + 1; ++i) {
                const Vec3 x = field.node_position(i, j, k);
                double num = 0.0, den = 0.0;
                for (int dk = -2; dk <= 1; ++dk)
                    for (int dj = -2; dj <= 1; ++dj)
                        for (int di = -2; di <= 1; ++di) {
                            int bi = i + di, bj = j + dj, bk = k + dk;
                            if (bi < 0 || bj < 0 || bk < 0 || bi >= bins || bj >= bins ||
                                bk >= bins)
                                continue;
                            for (uint32_t s : grid_bins[bin_index(bi, bj, bk)]) {
                                const Vec3 d = x - points[s].position;
                                const double d2 = length_squared(d);
                                if (d2 > radius2) continue;
                                const double w = std::exp(-d2 / (2.0 * sigma2));
                                num += w * dot(d, points[s].normal);
                                den += w;
                            }
                        }
                double value;
                if (den > 1e-300) {
                    value = num / den;
                } else {
                    auto [nearest, dist2] = kd.nearest(x);
                    value = dot(x - points[nearest].position, points[nearest].normal);
                }
                field.values[field.node_index(i, j, k)] = value;
                any_neg |= value < 0.0;
                any_pos |= value >= 0.0;
            }

    if (!any_neg || !any_pos)
        throw Error(ErrorCode::reconstruction_failed, "signed field has no zero crossing");
    TriangleMesh mesh = marching_cubes(field);
    if (mesh.triangles.empty())
        throw Error(ErrorCode::reconstruction_failed, "isosurface extraction produced no faces");
    mesh.validate();
    return mesh;
}

TriangleMesh reconstruct_surface_external(const std::vector<PointSample>& points,
                                          const std::string& command) {
    if (points.size() < 100)
        throw Error(ErrorCode::insufficient_samples,
                    "reconstruction needs >= 100 oriented points");
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path();
    const std::string stem = make_temp_stem();
    const fs::path input = dir / (stem + "_in.ply");
    const fs::path output = dir / (stem + "_out.ply");
    save_point_cloud_ply(points, input);

    std::string cmd = command;
    auto substitute = [&](const std::string& key, const std::string& value) {
        bool found = false;
        for (size_t at = cmd.find(key); at != std::string::npos; at = cmd.find(key, at)) {
            cmd.replace(at, key.size(), value);
            at += value.size();
            found = true;
        }
        return found;
    };
    bool has_in = substitute("{input}", input.string());
    bool has_out = substitute("{output}", output.string());
    if (!has_in && !has_out) cmd += " " + input.string() + " " + output.string();

    int status = std::system(cmd.c_str());
    if (status != 0) {
        std::error_code ec;
        fs::remove(input, ec);
        throw Error(ErrorCode::external_tool_error,
                    "reconstruction command exited with status " + std::to_string(status));
    }
    TriangleMesh mesh = load_mesh(output);
    std::error_code ec;
    fs::remove(input, ec);
    fs::remove(output, ec);
    mesh.validate();
    return mesh;
}

TriangleMesh punch_holes(const TriangleMesh& mesh, const ScanConfig& cfg) {
    validate_config(cfg);
    mesh.validate();
    Rng rng(derive_seed(cfg.seed, 3));
    const int count = cfg.hole_count_min == cfg.hole_count_max
                          ? cfg.hole_count_min
                          : int(rng.uniform_int(cfg.hole_count_min, cfg.hole_count_max));
    if (count == 0) return mesh;

    const auto seeds = sample_surface(mesh, size_t(count), derive_seed(cfg.seed, 4));
    const double diag = length(mesh.bounds().extent());
    std::vector<double> radii(seeds.size());
    for (double& r : radii) r = rng.uniform(cfg.hole_radius_min, cfg.hole_radius_max) * diag;

    TriangleMesh out;
    out.vertices = mesh.vertices;
    for (size_t t = 0; t < mesh.triangles.size(); ++t) {
        const Vec3 centroid = (mesh.triangle_vertex(t, 0) + mesh.triangle_vertex(t, 1) +
                               mesh.triangle_vertex(t, 2)) /
                              3.0;
        bool removed = false;
        for (size_t h = 0; h < seeds.size() && !removed; ++h)
            removed = length(centroid - seeds[h].position) <= radii[h];
        if (!removed) out.triangles.push_back(mesh.triangles[t]);
    }
    if (out.triangles.empty())
        throw Error(ErrorCode::empty_after_holes, "every triangle fell inside a hole");

    // Compact away unreferenced vertices.
    std::vector<uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
    std::vector<Vec3> compact;
    for (auto& tri : out.triangles)
        for (uint32_t& v : tri) {
            if (remap[v] == UINT32_MAX) {
                remap[v] = uint32_t(compact.size());
                compact.push_back(out.vertices[v]);
            }
            v = remap[v];
        }
    out.vertices = std::move(compact);
    out.recompute_normals();
    return out;
}

ScanResult simulate_scan(const TriangleMesh& mesh, const ScanConfig& cfg) {
    validate_config(cfg);
    mesh.validate();

    const auto samples = sample_surface(mesh, cfg.n_points, derive_seed(cfg.seed, 0));
    const auto cams = camera_trajectory(mesh.bounds(), cfg);

    ScanResult result;
    std::vector<char> seen(samples.size(), 0);
    for (const VirtualCamera& cam : cams) {
        auto idx = visible_indices(samples, cam);
        result.per_view_counts.push_back(idx.size());
        for (size_t i : idx) seen[i] = 1;
    }
    for (size_t i = 0; i < samples.size(); ++i)
        if (seen[i]) result.merged_points.push_back(samples[i]);

    TriangleMesh recon = cfg.recon_command.empty()
                             ? reconstruct_surface(result.merged_points, cfg.recon_resolution)
                             : reconstruct_surface_external(result.merged_points,
                                                            cfg.recon_command);
    result.scan_mesh = punch_holes(recon, cfg);
    return result;
}

}  // namespace cadloop
