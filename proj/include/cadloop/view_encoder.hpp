#pragma once

#include <cadloop/geom.hpp>
#include <cadloop/mesh.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cadloop {

/// The eight canonical parallel-projection viewpoints.
enum class ViewTag { pos_x, neg_x, pos_y, neg_y, pos_z, neg_z, iso1, iso2 };

std::string view_tag_name(ViewTag tag);

/// Single-channel depth rendering. Row-major from the top-left pixel;
/// intensity 0 = background, otherwise linear in view-axis depth with
/// near = bright. Values stay in [0,1].
struct DepthImage {
    int width = 238;
    int height = 238;
    ViewTag view_tag = ViewTag::pos_x;
    std::vector<double> intensity;

    double& at(int x, int y) { return intensity[size_t(y) * width + x]; }
    double at(int x, int y) const { return intensity[size_t(y) * width + x]; }
};

/// Two-channel composite: G carries the target depth grid, R the prediction
/// grid (all zero when no prediction exists yet). B is identically 0.
struct OverlayImage {
    int width = 0;
    int height = 0;
    std::vector<double> r;
    std::vector<double> g;
};

/// Frozen rendering conventions. The defaults define the canonical encoder;
/// they are configurable only so tests can probe the mapping directly.
struct ViewConfig {
    /// Grid order, row-major over 2 columns x 4 rows.
    std::array<ViewTag, 8> order = {ViewTag::pos_x, ViewTag::neg_x, ViewTag::pos_y,
                                    ViewTag::neg_y, ViewTag::pos_z, ViewTag::neg_z,
                                    ViewTag::iso1,  ViewTag::iso2};
    /// Isometric view directions (unit vectors pointing toward the camera).
    Vec3 iso1_dir = Vec3{1, 1, 1} / std::sqrt(3.0);
    Vec3 iso2_dir = Vec3{-1, -1, 1} / std::sqrt(3.0);
    /// Half-width of the modeling domain; axis views span [-half, +half]
    /// in window and depth.
    double half_extent = 100.0;
    /// Isometric views scale window and depth slab by this factor so the
    /// whole domain cube stays visible along a diagonal.
    double iso_span_factor = std::sqrt(3.0);
    int tile_size = 238;
};

/// Screen basis of one view: right/up span the image plane, dir points from
/// the scene toward the camera. (right, up, dir) is right-handed.
struct ViewBasis {
    Vec3 right;
    Vec3 up;
    Vec3 dir;
    double window_half;  // image spans [-window_half, +window_half] in right/up
    double slab_half;    // depth spans [-slab_half, +slab_half] along dir
};

ViewBasis view_basis(ViewTag tag, const ViewConfig& cfg = {});

/// Software z-buffer parallel projection. Pixel centers sample the window on
/// a regular lattice anchored at the top-left; the frontmost surface wins and
/// its intensity is (t + slab_half) / (2 slab_half) for view-axis coordinate t.
/// Throws OutOfDomain when a vertex leaves the depth slab by more than 1%.
DepthImage render_depth_view(const TriangleMesh& mesh, ViewTag tag, const ViewConfig& cfg = {});

/// Views -Z, +Y, +X are reflected left-to-right; the rest pass through.
/// Applying the reflection twice restores the input.
DepthImage mirror_if_needed(const DepthImage& img);

/// Tiles the eight views row-major per cfg.order into one 476x952 image.
/// Throws MissingView / DuplicateView when the tag multiset is wrong.
DepthImage assemble_grid(const std::vector<DepthImage>& views, const ViewConfig& cfg = {});

/// render -> mirror -> assemble for all eight views of one mesh.
DepthImage render_view_grid(const TriangleMesh& mesh, const ViewConfig& cfg = {});

/// G = target, R = prediction or zero when absent, B = 0.
/// Throws DimensionMismatch when a present prediction disagrees in size.
OverlayImage compose_overlay(const DepthImage& target_grid,
                             const std::optional<DepthImage>& pred_grid = std::nullopt);

/// 8-bit RGB quantization: channel byte = round(i * 255).
std::vector<uint8_t> overlay_rgb8(const OverlayImage& overlay);

void save_overlay_png(const std::filesystem::path& path, const OverlayImage& overlay);

}  // namespace cadloop
