#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cadloop/mesh.hpp"
#include "cadloop/render.hpp"

namespace cadloop {

/// Per-candidate scores. Metrics are absent exactly when valid is false.
struct MetricReport {
    bool valid = false;
    std::optional<double> cd_times_1e3;
    std::optional<double> iou_percent;
    std::string failure_reason;  // error name when invalid, empty otherwise
};

struct AggregateReport {
    std::optional<double> median_cd;
    std::optional<double> mean_iou;
    double invalid_rate_percent = 0.0;
    size_t total = 0;
    size_t valid_count = 0;
};

struct EvalConfig {
    size_t cd_points = 8192;
    int iou_resolution = 64;
    uint64_t seed = 0;
};

/// Chamfer distance between point sets: sum of the two mean squared
/// nearest-neighbor distances, reported x 10^3. Exact (spatial index
/// matches brute force).
double chamfer_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Chamfer on n surface samples per mesh, drawn with the same seed so
/// chamfer(a, a) is exactly 0. Meshes are expected in the metric frame [0,1]^3.
double chamfer(const TriangleMesh& a, const TriangleMesh& b, size_t n = 8192, uint64_t seed = 0);

/// Volumetric IoU in percent on a shared resolution^3 occupancy grid over
/// `domain` (default [0,1]^3). Throws EmptyUnion when neither mesh occupies
/// any cell.
double volumetric_iou(const TriangleMesh& a, const TriangleMesh& b, int resolution = 64,
                      const GridDomain& domain = {});

/// Fixed affine map from the modeling domain [-100,100]^3 onto the metric
/// frame [0,1]^3: x -> (x + 100) / 200. Applied to every render before
/// scoring, so candidate translation/scale errors stay visible to the loop.
NormalizationTransform modeling_to_metric();

/// Score one already-rendered modeling-frame mesh against a target in the
/// metric frame. Metric failures yield valid=false with the error name
/// recorded; no exception escapes.
MetricReport evaluate_mesh(const TriangleMesh& target_eval, const TriangleMesh& render_model,
                           const EvalConfig& cfg = {});

/// Parse + render + score one candidate program against a target already in
/// the metric frame. Render or parse failures yield valid=false with the
/// error name recorded; no exception escapes.
MetricReport evaluate_candidate(const TriangleMesh& target_eval, const std::string& program,
                                const Renderer& renderer, const EvalConfig& cfg = {});

/// Median CD and mean IoU over valid reports only; IR = 100 * invalid/total.
/// Even-count median is the midpoint mean. All-invalid input yields IR=100
/// with CD/IoU absent.
AggregateReport aggregate(const std::vector<MetricReport>& reports);

std::string aggregate_to_json(const AggregateReport& report);

/// Aligned plain-text table with columns CD, IoU, IR.
std::string aggregate_table(const AggregateReport& report);

}  // namespace cadloop
