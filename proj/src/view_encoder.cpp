#include <cadloop/error.hpp>
#include <cadloop/image.hpp>
#include <cadloop/view_encoder.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cadloop {
namespace {

constexpr double kSlabSlack = 1.01;  // vertices may leave the depth slab by 1%

struct Projected {
    double px, py, t;  // continuous pixel coords (pixel centers at integers) + depth coord
};

double clamp01(double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); }

}  // namespace

std::string view_tag_name(ViewTag tag) {
    switch (tag) {
        case ViewTag::pos_x: return "+X";
        case ViewTag::neg_x: return "-X";
        case ViewTag::pos_y: return "+Y";
        case ViewTag::neg_y: return "-Y";
        case ViewTag::pos_z: return "+Z";
        case ViewTag::neg_z: return "-Z";
        case ViewTag::iso1: return "ISO1";
        case ViewTag::iso2: return "ISO2";
    }
    return "?";
}

ViewBasis view_basis(ViewTag tag, const ViewConfig& cfg) {
    const double h = cfg.half_extent;
    switch (tag) {
        case ViewTag::pos_x: return {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}, h, h};
        case ViewTag::neg_x: return {{0, -1, 0}, {0, 0, 1}, {-1, 0, 0}, h, h};
        case ViewTag::pos_y: return {{-1, 0, 0}, {0, 0, 1}, {0, 1, 0}, h, h};
        case ViewTag::neg_y: return {{1, 0, 0}, {0, 0, 1}, {0, -1, 0}, h, h};
        case ViewTag::pos_z: return {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, h, h};
        case ViewTag::neg_z: return {{-1, 0, 0}, {0, 1, 0}, {0, 0, -1}, h, h};
        case ViewTag::iso1:
        case ViewTag::iso2: {
            Vec3 dir = normalized(tag == ViewTag::iso1 ? cfg.iso1_dir : cfg.iso2_dir);
            Vec3 right = normalized(cross(Vec3{0, 0, 1}, dir));
            Vec3 up = cross(dir, right);
            double span = h * cfg.iso_span_factor;
            return {right, up, dir, span, span};
        }
    }
    throw Error(ErrorCode::missing_view, "unknown view tag");
}

DepthImage render_depth_view(const TriangleMesh& mesh, ViewTag tag, const ViewConfig& cfg) {
    const ViewBasis basis = view_basis(tag, cfg);
    const int n = cfg.tile_size;
    const double scale = 2.0 * basis.window_half / n;  // world units per pixel

    for (const Vec3& v : mesh.vertices) {
        double t = dot(v, basis.dir);
        if (std::abs(t) > basis.slab_half * kSlabSlack)
            throw Error(ErrorCode::out_of_domain,
                        "vertex depth " + std::to_string(t) + " outside the " +
                            view_tag_name(tag) + " view slab");
    }

    DepthImage img;
    img.width = n;
    img.height = n;
    img.view_tag = tag;
    img.intensity.assign(size_t(n) * n, 0.0);
    std::vector<double> depth(size_t(n) * n, -std::numeric_limits<double>::infinity());

    std::vector<Projected> proj(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        double r = dot(v, basis.right);
        double u = dot(v, basis.up);
        proj[i].px = (r + basis.window_half) / scale - 0.5;
        proj[i].py = (basis.window_half - u) / scale - 0.5;
        proj[i].t = dot(v, basis.dir);
    }

    for (const auto& tri : mesh.triangles) {
        Projected a = proj[tri[0]], b = proj[tri[1]], c = proj[tri[2]];
        double area = (b.px - a.px) * (c.py - a.py) - (b.py - a.py) * (c.px - a.px);
        if (area == 0.0) continue;  // edge-on triangles have no footprint
        if (area < 0.0) {
            std::swap(b, c);
            area = -area;
        }
        int x0 = std::max(0, int(std::ceil(std::min({a.px, b.px, c.px}))));
        int x1 = std::min(n - 1, int(std::floor(std::max({a.px, b.px, c.px}))));
        int y0 = std::max(0, int(std::ceil(std::min({a.py, b.py, c.py}))));
        int y1 = std::min(n - 1, int(std::floor(std::max({a.py, b.py, c.py}))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double w0 = (b.px - a.px) * (y - a.py) - (b.py - a.py) * (x - a.px);
                double w1 = (c.px - b.px) * (y - b.py) - (c.py - b.py) * (x - b.px);
                double w2 = (a.px - c.px) * (y - c.py) - (a.py - c.py) * (x - c.px);
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                double t = (w1 * a.t + w2 * b.t + w0 * c.t) / area;
                size_t idx = size_t(y) * n + x;
                if (t > depth[idx]) {
                    depth[idx] = t;
                    img.intensity[idx] = clamp01((t + basis.slab_half) / (2.0 * basis.slab_half));
                }
            }
        }
    }
    return img;
}

DepthImage mirror_if_needed(const DepthImage& img) {
    bool mirrored = img.view_tag == ViewTag::neg_z || img.view_tag == ViewTag::pos_y ||
                    img.view_tag == ViewTag::pos_x;
    if (!mirrored) return img;
    DepthImage out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(x, y) = img.at(img.width - 1 - x, y);
    return out;
}

DepthImage assemble_grid(const std::vector<DepthImage>& views, const ViewConfig& cfg) {
    const int n = cfg.tile_size;
    std::array<const DepthImage*, 8> slot{};
    for (const DepthImage& v : views) {
        auto it = std::find(cfg.order.begin(), cfg.order.end(), v.view_tag);
        if (it == cfg.order.end())
            throw Error(ErrorCode::duplicate_view, "view tag not in configured order");
        size_t i = size_t(it - cfg.order.begin());
        if (slot[i])
            throw Error(ErrorCode::duplicate_view, "duplicate view " + view_tag_name(v.view_tag));
        if (v.width != n || v.height != n)
            throw Error(ErrorCode::dimension_mismatch, "tile is not " + std::to_string(n) + "^2");
        slot[i] = &v;
    }
    for (size_t i = 0; i < slot.size(); ++i)
        if (!slot[i])
            throw Error(ErrorCode::missing_view, "missing view " + view_tag_name(cfg.order[i]));

    DepthImage grid;
    grid.width = 2 * n;
    grid.height = 4 * n;
    grid.view_tag = cfg.order[0];
    grid.intensity.assign(size_t(grid.width) * grid.height, 0.0);
    for (size_t i = 0; i < slot.size(); ++i) {
        int col = int(i % 2), row = int(i / 2);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) grid.at(col * n + x, row * n + y) = slot[i]->at(x, y);
    }
    return grid;
}

DepthImage render_view_grid(const TriangleMesh& mesh, const ViewConfig& cfg) {
    std::vector<DepthImage> views;
    views.reserve(8);
    for (ViewTag tag : cfg.order) views.push_back(mirror_if_needed(render_depth_view(mesh, tag, cfg)));
    return assemble_grid(views, cfg);
}

OverlayImage compose_overlay(const DepthImage& target_grid,
                             const std::optional<DepthImage>& pred_grid) {
    if (pred_grid &&
        (pred_grid->width != target_grid.width || pred_grid->height != target_grid.height))
        throw Error(ErrorCode::dimension_mismatch, "target and prediction grids differ in size");
    OverlayImage out;
    out.width = target_grid.width;
    out.height = target_grid.height;
    out.g = target_grid.intensity;
    if (pred_grid)
        out.r = pred_grid->intensity;
    else
        out.r.assign(out.g.size(), 0.0);
    return out;
}

std::vector<uint8_t> overlay_rgb8(const OverlayImage& overlay) {
    size_t count = size_t(overlay.width) * overlay.height;
    if (overlay.r.size() != count || overlay.g.size() != count)
        throw Error(ErrorCode::dimension_mismatch, "overlay channel size mismatch");
    std::vector<uint8_t> rgb(count * 3);
    for (size_t i = 0; i < count; ++i) {
        rgb[i * 3 + 0] = uint8_t(std::lround(clamp01(overlay.r[i]) * 255.0));
        rgb[i * 3 + 1] = uint8_t(std::lround(clamp01(overlay.g[i]) * 255.0));
        rgb[i * 3 + 2] = 0;
    }
    return rgb;
}

void save_overlay_png(const std::filesystem::path& path, const OverlayImage& overlay) {
    write_png_rgb8(path, overlay.width, overlay.height, overlay_rgb8(overlay));
}

}  // namespace cadloop
