#include <cadloop/editor_loop.hpp>

#include <cadloop/dsl.hpp>
#include <cadloop/error.hpp>
#include <cadloop/image.hpp>
#include <cadloop/util.hpp>

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>

namespace cadloop {

namespace {

// Evidence streams are disjoint per (step, parent); 64 slots per step bounds
// the beam width.
constexpr uint64_t kEvidenceStreamBase = 0xE0000;
constexpr int kMaxWidth = 64;

uint64_t evidence_seed(uint64_t seed, int step, size_t parent_index) {
    return derive_seed(seed, kEvidenceStreamBase + uint64_t(step) * 64 + parent_index);
}

uint64_t editor_seed(uint64_t seed, int step, int candidate_index) {
    return derive_seed(derive_seed(seed, uint64_t(step)), uint64_t(candidate_index));
}

void validate_config(const BeamConfig& cfg) {
    if (cfg.N < 1 || cfg.N > kMaxWidth)
        throw Error(ErrorCode::range_error,
                    "beam width must be in [1, " + std::to_string(kMaxWidth) + "]");
    if (cfg.s < 1) throw Error(ErrorCode::range_error, "step budget must be at least 1");
}

struct ChildResult {
    Candidate candidate;
    std::optional<TriangleMesh> mesh;  // present iff the program rendered
};

/// Calls the editor, renders, scores. Editor exceptions and render failures
/// become invalid candidates; only completed renders bump render_count.
ChildResult run_child(const TriangleMesh& target_eval, const Evidence& evidence,
                      const EditorCall& call, const EditorFn& editor, const Renderer& renderer,
                      const EvalConfig& eval, size_t& render_count) {
    ChildResult out;
    out.candidate.step_born = call.step;
    out.candidate.index_in_step = call.candidate_index;
    try {
        out.candidate.program = editor(evidence, call);
    } catch (const Error& e) {
        out.candidate.report.failure_reason = error_code_name(e.code());
        return out;
    } catch (const std::exception&) {
        out.candidate.report.failure_reason = "editor_error";
        return out;
    }
    TriangleMesh mesh;
    try {
        mesh = renderer.render(out.candidate.program);
    } catch (const Error& e) {
        out.candidate.report.failure_reason = error_code_name(e.code());
        return out;
    }
    ++render_count;
    out.candidate.report = evaluate_mesh(target_eval, mesh, eval);
    out.mesh = std::move(mesh);
    return out;
}

/// Valid candidates only: lower D wins, ties to the earlier step, then the
/// lower index within the step.
bool better(const Candidate& a, const Candidate& b) {
    double ca = *a.report.cd_times_1e3;
    double cb = *b.report.cd_times_1e3;
    if (ca != cb) return ca < cb;
    if (a.step_born != b.step_born) return a.step_born < b.step_born;
    return a.index_in_step < b.index_in_step;
}

bool should_stop(int step, const std::optional<double>& prev_best,
                 const std::optional<double>& cur_best, double threshold) {
    if (step < 2 || !prev_best || !cur_best) return false;
    return (*prev_best - *cur_best) < threshold;
}

}  // namespace

std::string modality_name(Modality m) {
    switch (m) {
        case Modality::image: return "image";
        case Modality::pointcloud: return "pointcloud";
        case Modality::cross_modal: return "cross_modal";
    }
    return "image";
}

Modality parse_modality(const std::string& name) {
    if (name == "image") return Modality::image;
    if (name == "pointcloud") return Modality::pointcloud;
    if (name == "cross_modal") return Modality::cross_modal;
    throw Error(ErrorCode::parse_error, "unknown modality: " + name);
}

Evidence build_evidence(const TriangleMesh& target_model, const std::optional<PrevContext>& prev,
                        Modality modality, uint64_t seed) {
    Evidence ev;
    ev.modality = modality;
    if (prev) ev.prev_program = prev->program;
    bool want_image = modality == Modality::image || modality == Modality::cross_modal;
    bool want_cloud = modality == Modality::pointcloud || modality == Modality::cross_modal;
    if (want_image) {
        DepthImage target_grid = render_view_grid(target_model);
        std::optional<DepthImage> pred_grid;
        if (prev && prev->render) pred_grid = render_view_grid(*prev->render);
        ev.overlay = compose_overlay(target_grid, pred_grid);
    }
    if (want_cloud) {
        TriangleMesh target_n = normalize(target_model, FrameTag::signed_cube_11).first;
        if (prev && prev->render) {
            TriangleMesh pred_n = normalize(*prev->render, FrameTag::prediction_over_100).first;
            ev.cloud = build_discrepancy_cloud(target_n, pred_n, seed);
        } else {
            ev.cloud = init_discrepancy_cloud(target_n, seed);
        }
    }
    return ev;
}

Trace greedy_loop(const TriangleMesh& target_model, const EditorFn& editor,
                  const Renderer& renderer, const BeamConfig& cfg) {
    validate_config(cfg);
    Trace trace;
    TriangleMesh target_eval = apply_transform(target_model, modeling_to_metric());
    std::optional<PrevContext> prev;
    std::optional<PrevContext> best_ctx;
    std::optional<double> prev_best_cd;
    for (int t = 1; t <= cfg.s; ++t) {
        Evidence evidence =
            build_evidence(target_model, prev, cfg.modality, evidence_seed(cfg.seed, t, 0));
        EditorCall call{cfg.target_id, t, 0, EditorMode::greedy, editor_seed(cfg.seed, t, 0)};
        ChildResult child =
            run_child(target_eval, evidence, call, editor, renderer, cfg.eval, trace.render_count);

        StepTrace st;
        st.step = t;
        if (child.candidate.report.valid) {
            st.survivor_indices.push_back(0);
            if (!trace.best_so_far || better(child.candidate, *trace.best_so_far)) {
                trace.best_so_far = child.candidate;
                best_ctx = PrevContext{child.candidate.program, child.mesh};
            }
        } else {
            st.degraded = true;
        }
        st.candidates.push_back(child.candidate);
        if (trace.best_so_far) st.best_cd_after = trace.best_so_far->report.cd_times_1e3;
        trace.steps.push_back(std::move(st));

        if (cfg.refeed_best && best_ctx) {
            prev = best_ctx;
        } else {
            prev = PrevContext{std::move(child.candidate.program), std::move(child.mesh)};
        }

        std::optional<double> cur_best =
            trace.best_so_far ? trace.best_so_far->report.cd_times_1e3 : std::nullopt;
        if (should_stop(t, prev_best_cd, cur_best, cfg.stop_threshold)) {
            trace.stopped_early = true;
            break;
        }
        prev_best_cd = cur_best;
    }
    return trace;
}

Trace stochastic_beam(const TriangleMesh& target_model, const EditorFn& editor,
                      const Renderer& renderer, const BeamConfig& cfg) {
    validate_config(cfg);
    Trace trace;
    TriangleMesh target_eval = apply_transform(target_model, modeling_to_metric());
    std::vector<std::optional<PrevContext>> parents{std::nullopt};
    std::optional<PrevContext> best_ctx;
    std::optional<double> prev_best_cd;
    for (int t = 1; t <= cfg.s; ++t) {
        StepTrace st;
        st.step = t;
        std::vector<std::optional<TriangleMesh>> meshes;
        for (size_t pi = 0; pi < parents.size(); ++pi) {
            Evidence evidence = build_evidence(target_model, parents[pi], cfg.modality,
                                               evidence_seed(cfg.seed, t, pi));
            for (int k = 0; k < cfg.N; ++k) {
                int idx = int(pi) * cfg.N + k;
                EditorCall call{cfg.target_id, t, idx, EditorMode::sample,
                                editor_seed(cfg.seed, t, idx)};
                ChildResult child = run_child(target_eval, evidence, call, editor, renderer,
                                              cfg.eval, trace.render_count);
                if (child.candidate.report.valid &&
                    (!trace.best_so_far || better(child.candidate, *trace.best_so_far))) {
                    trace.best_so_far = child.candidate;
                    best_ctx = PrevContext{child.candidate.program, child.mesh};
                }
                st.candidates.push_back(std::move(child.candidate));
                meshes.push_back(std::move(child.mesh));
            }
        }

        std::vector<int> order;
        for (int i = 0; i < int(st.candidates.size()); ++i)
            if (st.candidates[i].report.valid) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double ca = *st.candidates[a].report.cd_times_1e3;
            double cb = *st.candidates[b].report.cd_times_1e3;
            if (ca != cb) return ca < cb;
            return a < b;
        });
        if (int(order.size()) > cfg.N) order.resize(size_t(cfg.N));
        st.survivor_indices = order;

        std::vector<std::optional<PrevContext>> next_parents;
        if (order.empty()) {
            st.degraded = true;
            if (best_ctx) {
                next_parents.emplace_back(best_ctx);
            } else {
                next_parents.emplace_back(PrevContext{st.candidates.back().program, std::nullopt});
            }
        } else {
            for (int i : order)
                next_parents.emplace_back(PrevContext{st.candidates[size_t(i)].program,
                                                      std::move(meshes[size_t(i)])});
        }
        if (trace.best_so_far) st.best_cd_after = trace.best_so_far->report.cd_times_1e3;
        trace.steps.push_back(std::move(st));
        parents = std::move(next_parents);

        std::optional<double> cur_best =
            trace.best_so_far ? trace.best_so_far->report.cd_times_1e3 : std::nullopt;
        if (should_stop(t, prev_best_cd, cur_best, cfg.stop_threshold)) {
            trace.stopped_early = true;
            break;
        }
        prev_best_cd = cur_best;
    }
    return trace;
}

std::pair<Trace, AggregateReport> run_scan_track(const TriangleMesh& clean_model,
                                                 const TriangleMesh& scan_model,
                                                 const EditorFn& editor, const Renderer& renderer,
                                                 const BeamConfig& cfg) {
    // Selection runs entirely against the scan mesh; the clean mesh enters
    // only here, after the loop has already picked its program.
    Trace trace = stochastic_beam(scan_model, editor, renderer, cfg);
    MetricReport report;
    if (trace.best_so_far) {
        TriangleMesh clean_eval = apply_transform(clean_model, modeling_to_metric());
        report = evaluate_candidate(clean_eval, trace.best_so_far->program, renderer, cfg.eval);
    } else {
        report.failure_reason = "no_valid_candidate";
    }
    AggregateReport agg = aggregate({report});
    return {std::move(trace), agg};
}

EditorFn oracle_editor(std::string gt_program) {
    return [gt = std::move(gt_program)](const Evidence&, const EditorCall&) { return gt; };
}

EditorFn noisy_oracle_editor(std::string gt_program, double magnitude, uint64_t seed) {
    dsl::Ast gt_ast = dsl::parse(gt_program);
    return [gt = std::move(gt_program), gt_ast, magnitude, seed](const Evidence&,
                                                                 const EditorCall& call) {
        double scale = magnitude * std::pow(0.5, call.step);
        if (scale == 0.0) return gt;
        uint64_t perturb_seed = seed ^ call.seed ^ uint64_t(call.step);
        return dsl::print(dsl::perturb_program(gt_ast, scale, perturb_seed));
    };
}

EditorFn scripted_editor(const std::filesystem::path& responses_file) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(responses_file));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::corrupt_payload,
                    "scripted responses are not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object())
        throw Error(ErrorCode::corrupt_payload, "scripted responses must be a JSON object");
    auto map = std::make_shared<nlohmann::json>(std::move(doc));
    return [map](const Evidence&, const EditorCall& call) {
        std::string key = call.target_id + "|" + std::to_string(call.step) + "|" +
                          std::to_string(call.candidate_index);
        auto it = map->find(key);
        if (it == map->end() || !it->is_string())
            throw Error(ErrorCode::missing_key, "no scripted response for " + key);
        return it->get<std::string>();
    };
}

EditorFn remote_editor(const RemoteConfig& cfg) {
    return [cfg](const Evidence& ev, const EditorCall& call) {
        std::string base = cfg.url;
        std::string path = "/";
        size_t scheme = base.find("://");
        size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
        size_t slash = base.find('/', host_start);
        if (slash != std::string::npos) {
            path = base.substr(slash);
            base.resize(slash);
        }

        nlohmann::json req{
            {"target_id", call.target_id},
            {"step", call.step},
            {"modality", modality_name(ev.modality)},
            {"mode", call.mode == EditorMode::greedy ? "greedy" : "sample"},
            {"seed", call.seed},
        };
        if (ev.overlay) {
            std::vector<uint8_t> png =
                encode_png_rgb8(ev.overlay->width, ev.overlay->height, overlay_rgb8(*ev.overlay));
            req["overlay_png_base64"] = base64_encode(png);
        }
        if (ev.cloud) req["cloud_b64"] = base64_encode(serialize_cloud(*ev.cloud));
        if (ev.prev_program) req["prev_program"] = *ev.prev_program;
        std::string body = req.dump();

        httplib::Client client(base);
        client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
        client.set_write_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
        for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
            httplib::Result res = client.Post(path, body, "application/json");
            if (!res) continue;  // transport failure: retry
            if (res->status != 200)
                throw Error(ErrorCode::bad_response,
                            "editor endpoint returned status " + std::to_string(res->status));
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception&) {
                throw Error(ErrorCode::bad_response, "response body is not valid JSON");
            }
            if (!doc.is_object() || !doc.contains("program") || !doc["program"].is_string())
                throw Error(ErrorCode::bad_response, "response lacks a program string");
            return doc["program"].get<std::string>();
        }
        throw Error(ErrorCode::timeout, "editor endpoint unreachable after " +
                                            std::to_string(cfg.retries + 1) + " attempts");
    };
}

namespace {

nlohmann::json candidate_json(const Candidate& c) {
    nlohmann::json j{
        {"program", c.program},
        {"valid", c.report.valid},
        {"step_born", c.step_born},
        {"index_in_step", c.index_in_step},
    };
    if (c.report.cd_times_1e3) j["cd_times_1e3"] = *c.report.cd_times_1e3;
    if (c.report.iou_percent) j["iou_percent"] = *c.report.iou_percent;
    if (!c.report.failure_reason.empty()) j["failure_reason"] = c.report.failure_reason;
    return j;
}

}  // namespace

std::string trace_json(const Trace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const StepTrace& st : trace.steps) {
        nlohmann::json cands = nlohmann::json::array();
        for (const Candidate& c : st.candidates) cands.push_back(candidate_json(c));
        nlohmann::json j{
            {"step", st.step},
            {"candidates", std::move(cands)},
            {"survivors", st.survivor_indices},
            {"degraded", st.degraded},
        };
        if (st.best_cd_after) j["best_cd_after"] = *st.best_cd_after;
        steps.push_back(std::move(j));
    }
    nlohmann::json j{
        {"steps", std::move(steps)},
        {"render_count", trace.render_count},
        {"stopped_early", trace.stopped_early},
    };
    if (trace.best_so_far) j["best"] = candidate_json(*trace.best_so_far);
    return j.dump(2);
}

}  // namespace cadloop
