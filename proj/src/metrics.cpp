#include "cadloop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cadloop/dsl.hpp"
#include "cadloop/error.hpp"
#include "cadloop/surface_query.hpp"
#include "cadloop/util.hpp"

#include <json.hpp>

namespace cadloop {

TriangleMesh DslRenderer::render(const std::string& program) const {
    return dsl::render_mesh(dsl::parse(program), resolution_);
}

namespace {

double mean_squared_nearest(const std::vector<Vec3>& from, const PointKdTree& to) {
    double sum = 0.0;
    for (const Vec3& p : from) sum += to.nearest(p).second;
    return sum / static_cast<double>(from.size());
}

std::vector<Vec3> sample_positions(const TriangleMesh& mesh, size_t n, uint64_t seed) {
    std::vector<Vec3> out;
    out.reserve(n);
    for (const PointSample& s : sample_surface(mesh, n, seed)) out.push_back(s.position);
    return out;
}

}  // namespace

double chamfer_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty())
        throw Error(ErrorCode::insufficient_samples, "chamfer needs non-empty point sets");
    const PointKdTree tree_a(a);
    const PointKdTree tree_b(b);
    return (mean_squared_nearest(a, tree_b) + mean_squared_nearest(b, tree_a)) * 1e3;
}

double chamfer(const TriangleMesh& a, const TriangleMesh& b, size_t n, uint64_t seed) {
    return chamfer_points(sample_positions(a, n, seed), sample_positions(b, n, seed));
}

double volumetric_iou(const TriangleMesh& a, const TriangleMesh& b, int resolution,
                      const GridDomain& domain) {
    const OccupancyGrid occ_a = voxelize_occupancy(a, resolution, domain);
    const OccupancyGrid occ_b = voxelize_occupancy(b, resolution, domain);
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < occ_a.cells.size(); ++i) {
        const bool ia = occ_a.cells[i] != 0;
        const bool ib = occ_b.cells[i] != 0;
        inter += (ia && ib) ? 1 : 0;
        uni += (ia || ib) ? 1 : 0;
    }
    if (uni == 0) throw Error(ErrorCode::empty_union, "neither mesh occupies any grid cell");
    return 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

NormalizationTransform modeling_to_metric() {
    NormalizationTransform t;
    t.scale = 1.0 / 200.0;
    t.translation = Vec3{0.5, 0.5, 0.5};
    t.frame_tag = FrameTag::unit_cube_01;
    return t;
}

MetricReport evaluate_mesh(const TriangleMesh& target_eval, const TriangleMesh& render_model,
                           const EvalConfig& cfg) {
    MetricReport report;
    try {
        const TriangleMesh prediction = apply_transform(render_model, modeling_to_metric());
        report.cd_times_1e3 = chamfer(target_eval, prediction, cfg.cd_points, cfg.seed);
        report.iou_percent = volumetric_iou(target_eval, prediction, cfg.iou_resolution);
        report.valid = true;
    } catch (const Error& e) {
        report = MetricReport{};
        report.failure_reason = error_code_name(e.code());
    }
    return report;
}

MetricReport evaluate_candidate(const TriangleMesh& target_eval, const std::string& program,
                                const Renderer& renderer, const EvalConfig& cfg) {
    TriangleMesh render;
    try {
        render = renderer.render(program);
    } catch (const Error& e) {
        MetricReport report;
        report.failure_reason = error_code_name(e.code());
        return report;
    }
    return evaluate_mesh(target_eval, render, cfg);
}

AggregateReport aggregate(const std::vector<MetricReport>& reports) {
    if (reports.empty())
        throw Error(ErrorCode::range_error, "aggregate needs at least one report");
    AggregateReport out;
    out.total = reports.size();

    std::vector<double> cds;
    double iou_sum = 0.0;
    for (const MetricReport& r : reports) {
        if (!r.valid) continue;
        ++out.valid_count;
        cds.push_back(*r.cd_times_1e3);
        iou_sum += *r.iou_percent;
    }
    out.invalid_rate_percent =
        100.0 * static_cast<double>(out.total - out.valid_count) / static_cast<double>(out.total);

    if (out.valid_count == 0) return out;  // all invalid: CD/IoU stay absent

    std::sort(cds.begin(), cds.end());
    const size_t m = cds.size();
    out.median_cd = (m % 2 == 1) ? cds[m / 2] : 0.5 * (cds[m / 2 - 1] + cds[m / 2]);
    out.mean_iou = iou_sum / static_cast<double>(out.valid_count);
    return out;
}

std::string aggregate_to_json(const AggregateReport& report) {
    nlohmann::json j;
    j["median_cd_times_1e3"] = report.median_cd.has_value() ? nlohmann::json(*report.median_cd)
                                                            : nlohmann::json(nullptr);
    j["mean_iou_percent"] = report.mean_iou.has_value() ? nlohmann::json(*report.mean_iou)
                                                        : nlohmann::json(nullptr);
    j["invalid_rate_percent"] = report.invalid_rate_percent;
    j["total"] = report.total;
    j["valid"] = report.valid_count;
    return j.dump(2);
}

std::string aggregate_table(const AggregateReport& report) {
    const auto cell = [](const std::optional<double>& v) {
        if (!v.has_value()) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", *v);
        return std::string(buf);
    };
    char ir[32];
    std::snprintf(ir, sizeof(ir), "%.2f", report.invalid_rate_percent);

    const std::string cd = cell(report.median_cd);
    const std::string iou = cell(report.mean_iou);
    std::ostringstream out;
    const auto pad = [](const std::string& s, size_t w) {
        return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
    };
    out << "  CD (x1e3)    IoU (%)     IR (%)\n";
    out << pad(cd, 11) << ' ' << pad(iou, 10) << ' ' << pad(ir, 10) << '\n';
    return out.str();
}

}  // namespace cadloop
