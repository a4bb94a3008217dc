#pragma once

#include <cadloop/mesh.hpp>
#include <cadloop/metrics.hpp>
#include <cadloop/pc_encoder.hpp>
#include <cadloop/render.hpp>
#include <cadloop/view_encoder.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cadloop {

enum class Modality { image, pointcloud, cross_modal };

std::string modality_name(Modality m);
Modality parse_modality(const std::string& name);

/// What the editor sees at one step: the visual overlay and/or the
/// discrepancy cloud, plus the previous program text. prev_program is absent
/// exactly at the first step.
struct Evidence {
    Modality modality = Modality::image;
    std::optional<OverlayImage> overlay;
    std::optional<DiscrepancyCloud> cloud;
    std::optional<std::string> prev_program;
};

/// Previous-step context. render is absent when the previous program produced
/// no geometry; evidence then degrades to the null-prediction form while the
/// text still rides along for the editor to correct.
struct PrevContext {
    std::string program;
    std::optional<TriangleMesh> render;
};

enum class EditorMode { greedy, sample };

/// Per-call routing data handed to the editor alongside the evidence.
struct EditorCall {
    std::string target_id;
    int step = 1;
    int candidate_index = 0;
    EditorMode mode = EditorMode::greedy;
    uint64_t seed = 0;
};

/// The opaque editor: evidence in, program text out. Implementations must not
/// inspect anything beyond their arguments; throwing marks the candidate
/// invalid without consuming render budget.
using EditorFn = std::function<std::string(const Evidence&, const EditorCall&)>;

struct Candidate {
    std::string program;
    MetricReport report;
    int step_born = 0;
    int index_in_step = 0;
};

struct StepTrace {
    int step = 0;
    std::vector<Candidate> candidates;
    std::vector<int> survivor_indices;  // into candidates, pruning order
    bool degraded = false;              // no valid survivor; continued around best-so-far
    std::optional<double> best_cd_after;
};

struct Trace {
    std::vector<StepTrace> steps;
    std::optional<Candidate> best_so_far;
    size_t render_count = 0;  // successful geometry constructions only
    bool stopped_early = false;
};

struct BeamConfig {
    int N = 5;
    int s = 5;
    double stop_threshold = 0.0;  // 0: run the full step budget
    Modality modality = Modality::image;
    uint64_t seed = 0;
    /// Greedy chaining: re-feed the best-so-far instead of the latest program.
    bool refeed_best = false;
    EvalConfig eval;
    std::string target_id = "target";
};

/// Assembles evidence for one step. The target arrives in the modeling frame
/// [-100,100]^3; the image branch renders both view grids there, the point
/// branch fits the target into [-1,1]^3 and maps the render by 1/100.
Evidence build_evidence(const TriangleMesh& target_model,
                        const std::optional<PrevContext>& prev, Modality modality,
                        uint64_t seed);

/// One deterministic editor call per step, chained on the latest program
/// (or best-so-far under refeed_best). Early-stops when the improvement in
/// best-so-far D drops below stop_threshold, first checked after step 2.
Trace greedy_loop(const TriangleMesh& target_model, const EditorFn& editor,
                  const Renderer& renderer, const BeamConfig& cfg);

/// Geometry-guided beam: N sampled candidates at t=1, then N children per
/// survivor; the N lowest-D valid candidates of each step survive, ties by
/// (earlier step, lower candidate index). A step with no valid candidate
/// degrades to width 1 around the best-so-far and is flagged in the trace.
Trace stochastic_beam(const TriangleMesh& target_model, const EditorFn& editor,
                      const Renderer& renderer, const BeamConfig& cfg);

/// Runs the beam with the scan mesh as the only selection signal, then
/// re-scores the selected program against the clean mesh for reporting. The
/// selection stage never receives the clean mesh.
std::pair<Trace, AggregateReport> run_scan_track(const TriangleMesh& clean_model,
                                                 const TriangleMesh& scan_model,
                                                 const EditorFn& editor, const Renderer& renderer,
                                                 const BeamConfig& cfg);

/// Always answers with the fixed program, ignoring evidence.
EditorFn oracle_editor(std::string gt_program);

/// Re-emits the fixed program perturbed at scale magnitude * 0.5^step
/// (relative numeric jitter plus occasional structural edits), so successive
/// steps demonstrably converge. magnitude 0 reproduces the program verbatim.
EditorFn noisy_oracle_editor(std::string gt_program, double magnitude, uint64_t seed);

/// Replays responses from a JSON file keyed "<target_id>|<step>|<candidate>".
/// A missing key throws MissingKey, which the loop records as invalid.
EditorFn scripted_editor(const std::filesystem::path& responses_file);

struct RemoteConfig {
    std::string url;  // e.g. http://127.0.0.1:8080/edit
    double timeout_seconds = 30.0;
    int retries = 2;  // additional attempts after a network failure
};

/// POSTs {target_id, step, modality, overlay_png_base64?, cloud_b64?,
/// prev_program?, mode, seed} and expects 200 {"program": "..."}.
EditorFn remote_editor(const RemoteConfig& cfg);

/// Serialized trace: steps, candidates with scores, survivors, degradation
/// flags, best-so-far, and the render count.
std::string trace_json(const Trace& trace);

}  // namespace cadloop
