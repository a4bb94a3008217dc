#include <cadloop/dsl.hpp>
#include <cadloop/editor_loop.hpp>
#include <cadloop/error.hpp>
#include <cadloop/image.hpp>
#include <cadloop/mesh_io.hpp>
#include <cadloop/metrics.hpp>
#include <cadloop/rollout_gen.hpp>
#include <cadloop/scan_sim.hpp>
#include <cadloop/util.hpp>
#include <cadloop/view_encoder.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace cadloop;

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

/// Index-addressed work so worker count never changes results. Exceptions in
/// workers are rethrown on the caller thread.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
    workers = std::max(1, workers);
    if (n > 0) workers = std::min(workers, int(std::min<size_t>(n, 256)));
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string file_hash(const fs::path& path) {
    std::vector<uint8_t> bytes = read_binary_file(path);
    return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

void write_manifest(const fs::path& out_dir, nlohmann::json manifest) {
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Resolution order for every setting: built-in default, then config file,
/// then explicit flag. The winning values are echoed to resolved.cfg.
struct RunConfig {
    KeyValueConfig kv;

    void load(const std::optional<std::string>& config_path) {
        if (config_path) kv.load_file(*config_path);
    }
    template <typename T>
    void flag(const std::string& key, const std::optional<T>& value) {
        if (value) kv.set(key, to_string_value(*value));
    }
    void echo(const fs::path& out_dir) const {
        write_text_file(out_dir / "resolved.cfg", kv.serialize());
    }

private:
    static std::string to_string_value(const std::string& v) { return v; }
    static std::string to_string_value(bool v) { return v ? "true" : "false"; }
    static std::string to_string_value(int v) { return std::to_string(v); }
    static std::string to_string_value(int64_t v) { return std::to_string(v); }
    static std::string to_string_value(uint64_t v) { return std::to_string(v); }
    static std::string to_string_value(double v) { return format_number(v); }
};

std::string corpus_id(size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "part_%04zu", index);
    return buf;
}

/// Reads a gen-corpus output directory back into memory via its manifest.
Corpus load_corpus_dir(const fs::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::corrupt_payload, "manifest in " + dir.string() + ": " + e.what());
    }
    if (!manifest.contains("entries") || !manifest["entries"].is_array())
        throw Error(ErrorCode::corrupt_payload, "manifest in " + dir.string() + " has no entries");
    Corpus corpus;
    for (const auto& entry : manifest["entries"]) {
        std::string id = entry.at("id").get<std::string>();
        CorpusEntry ce;
        ce.program = read_text_file(dir / entry.at("program").get<std::string>());
        ce.mesh = load_mesh(dir / entry.at("mesh").get<std::string>());
        corpus[id] = std::move(ce);
    }
    if (corpus.empty())
        throw Error(ErrorCode::corrupt_payload, "manifest in " + dir.string() + " lists no parts");
    return corpus;
}

ScanConfig scan_config_from(const KeyValueConfig& kv) {
    ScanConfig sc;
    sc.n_points = size_t(kv.get_int("scan.points", int64_t(sc.n_points)));
    sc.n_views = int(kv.get_int("scan.views", sc.n_views));
    sc.radius_factor = kv.get_double("scan.radius_factor", sc.radius_factor);
    sc.hole_count_min = int(kv.get_int("scan.holes_min", sc.hole_count_min));
    sc.hole_count_max = int(kv.get_int("scan.holes_max", sc.hole_count_max));
    sc.hole_radius_min = kv.get_double("scan.hole_radius_min", sc.hole_radius_min);
    sc.hole_radius_max = kv.get_double("scan.hole_radius_max", sc.hole_radius_max);
    sc.recon_resolution = int(kv.get_int("scan.resolution", sc.recon_resolution));
    sc.seed = uint64_t(kv.get_int("scan.seed", 0));
    sc.recon_command = kv.get("scan.recon_cmd", "");
    return sc;
}

EvalConfig eval_config_from(const KeyValueConfig& kv) {
    EvalConfig ec;
    ec.cd_points = size_t(kv.get_int("eval.cd_points", int64_t(ec.cd_points)));
    ec.iou_resolution = int(kv.get_int("eval.iou_resolution", ec.iou_resolution));
    ec.seed = uint64_t(kv.get_int("eval.seed", 0));
    return ec;
}

/// Editor factory shared by `loop` and `rollouts`. The oracle and noisy kinds
/// answer with the per-target ground truth, which comes either from --gt or
/// from the corpus entry matching the call's target id.
EditorFn make_editor(const KeyValueConfig& kv, const Corpus* corpus) {
    std::string kind = kv.get("editor.kind", "oracle");
    if (kind == "scripted") {
        std::string responses = kv.get("editor.responses", "");
        if (responses.empty())
            throw Error(ErrorCode::range_error, "scripted editor needs editor.responses");
        return scripted_editor(responses);
    }
    if (kind == "remote") {
        RemoteConfig rc;
        rc.url = kv.get("remote.endpoint", "");
        if (rc.url.empty())
            throw Error(ErrorCode::range_error, "remote editor needs remote.endpoint");
        rc.timeout_seconds = kv.get_double("remote.timeout", rc.timeout_seconds);
        rc.retries = int(kv.get_int("remote.retries", rc.retries));
        return remote_editor(rc);
    }
    if (kind != "oracle" && kind != "noisy")
        throw Error(ErrorCode::range_error, "unknown editor kind: " + kind);

    double magnitude = kind == "noisy" ? kv.get_double("editor.magnitude", 0.3) : 0.0;
    uint64_t editor_seed = uint64_t(kv.get_int("editor.seed", 0));
    std::string gt_path = kv.get("editor.gt", "");
    if (!gt_path.empty()) {
        std::string gt = read_text_file(gt_path);
        return kind == "oracle" ? oracle_editor(gt)
                                : noisy_oracle_editor(gt, magnitude, editor_seed);
    }
    if (corpus == nullptr)
        throw Error(ErrorCode::range_error, kind + " editor needs editor.gt (a program file)");
    // Per-target oracle over the corpus: ground truth looked up by target id.
    auto shared = std::make_shared<Corpus>(*corpus);
    if (kind == "oracle") {
        return [shared](const Evidence&, const EditorCall& call) {
            auto it = shared->find(call.target_id);
            if (it == shared->end())
                throw Error(ErrorCode::missing_ground_truth, call.target_id);
            return it->second.program;
        };
    }
    return [shared, magnitude, editor_seed](const Evidence& ev, const EditorCall& call) {
        auto it = shared->find(call.target_id);
        if (it == shared->end()) throw Error(ErrorCode::missing_ground_truth, call.target_id);
        return noisy_oracle_editor(it->second.program, magnitude, editor_seed)(ev, call);
    };
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_corpus(const RunConfig& run, const fs::path& out_dir) {
    const KeyValueConfig& kv = run.kv;
    size_t count = size_t(kv.get_int("corpus.count", 10));
    int complexity = int(kv.get_int("corpus.complexity", 3));
    uint64_t seed = uint64_t(kv.get_int("corpus.seed", 0));
    int grid = int(kv.get_int("render.grid", 128));
    int workers = int(kv.get_int("run.workers", 1));
    if (count == 0) throw Error(ErrorCode::range_error, "corpus.count must be positive");

    fs::create_directories(out_dir);
    run.echo(out_dir);

    struct Item {
        std::string id, program;
        TriangleMesh mesh;
    };
    std::vector<Item> items(count);
    parallel_for(count, workers, [&](size_t i) {
        dsl::Ast ast = dsl::random_program(derive_seed(seed, i), complexity);
        items[i] = {corpus_id(i), dsl::print(ast), dsl::render_mesh(ast, grid)};
    });

    nlohmann::json entries = nlohmann::json::array();
    for (const Item& item : items) {
        std::string program_file = item.id + ".cadl";
        std::string mesh_file = item.id + ".obj";
        write_text_file(out_dir / program_file, item.program);
        save_mesh(item.mesh, out_dir / mesh_file);
        entries.push_back({{"id", item.id},
                           {"program", program_file},
                           {"mesh", mesh_file},
                           {"program_fnv1a64", file_hash(out_dir / program_file)},
                           {"mesh_fnv1a64", file_hash(out_dir / mesh_file)}});
    }
    write_manifest(out_dir, {{"command", "gen-corpus"},
                             {"count", count},
                             {"seed", seed},
                             {"complexity", complexity},
                             {"grid", grid},
                             {"entries", std::move(entries)}});
    std::cout << "wrote " << count << " parts to " << out_dir.string() << "\n";
    return 0;
}

int cmd_scan(const RunConfig& run, const fs::path& mesh_path, const fs::path& out_dir) {
    TriangleMesh mesh = load_mesh(mesh_path);
    ScanConfig sc = scan_config_from(run.kv);
    fs::create_directories(out_dir);
    run.echo(out_dir);

    ScanResult result = simulate_scan(mesh, sc);
    save_mesh(result.scan_mesh, out_dir / "scan.obj");
    nlohmann::json info{{"input", mesh_path.string()},
                        {"merged_points", result.merged_points.size()},
                        {"per_view_counts", result.per_view_counts},
                        {"scan_vertices", result.scan_mesh.vertices.size()},
                        {"scan_triangles", result.scan_mesh.triangles.size()}};
    write_text_file(out_dir / "scan.json", info.dump(2) + "\n");
    write_manifest(out_dir, {{"command", "scan"},
                             {"scan_obj_fnv1a64", file_hash(out_dir / "scan.obj")},
                             {"scan_json_fnv1a64", file_hash(out_dir / "scan.json")}});
    std::cout << "scan mesh: " << result.scan_mesh.vertices.size() << " vertices, "
              << result.scan_mesh.triangles.size() << " triangles\n";
    return 0;
}

int cmd_eval(const RunConfig& run, const fs::path& targets_dir, const fs::path& programs_dir,
             const std::optional<std::string>& out) {
    const KeyValueConfig& kv = run.kv;
    EvalConfig ec = eval_config_from(kv);
    int grid = int(kv.get_int("render.grid", 128));
    int workers = int(kv.get_int("run.workers", 1));

    auto read_entries = [](const fs::path& dir) {
        nlohmann::json m;
        try {
            m = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::corrupt_payload, "manifest in " + dir.string() + ": " + e.what());
        }
        std::map<std::string, nlohmann::json> by_id;
        for (const auto& entry : m.at("entries")) by_id[entry.at("id").get<std::string>()] = entry;
        return by_id;
    };
    auto targets = read_entries(targets_dir);
    auto programs = read_entries(programs_dir);
    if (targets.empty() || programs.empty())
        throw Error(ErrorCode::manifest_mismatch, "empty manifest");
    if (targets.size() != programs.size())
        throw Error(ErrorCode::manifest_mismatch,
                    "targets list " + std::to_string(targets.size()) + " ids, programs list " +
                        std::to_string(programs.size()));
    std::vector<std::string> ids;
    for (const auto& [id, entry] : targets) {
        if (!programs.count(id))
            throw Error(ErrorCode::manifest_mismatch, "no program entry for target " + id);
        ids.push_back(id);
    }

    DslRenderer renderer(grid);
    std::vector<MetricReport> reports(ids.size());
    parallel_for(ids.size(), workers, [&](size_t i) {
        const std::string& id = ids[i];
        TriangleMesh target =
            load_mesh(targets_dir / targets.at(id).at("mesh").get<std::string>());
        TriangleMesh target_eval = apply_transform(target, modeling_to_metric());
        std::string program =
            read_text_file(programs_dir / programs.at(id).at("program").get<std::string>());
        reports[i] = evaluate_candidate(target_eval, program, renderer, ec);
    });

    AggregateReport agg = aggregate(reports);
    std::cout << aggregate_table(agg);
    if (out) {
        fs::path out_dir(*out);
        fs::create_directories(out_dir);
        run.echo(out_dir);
        write_text_file(out_dir / "report.json", aggregate_to_json(agg) + "\n");
        nlohmann::json per_target = nlohmann::json::array();
        for (size_t i = 0; i < ids.size(); ++i) {
            nlohmann::json j{{"id", ids[i]}, {"valid", reports[i].valid}};
            if (reports[i].cd_times_1e3) j["cd_times_1e3"] = *reports[i].cd_times_1e3;
            if (reports[i].iou_percent) j["iou_percent"] = *reports[i].iou_percent;
            if (!reports[i].failure_reason.empty()) j["failure_reason"] = reports[i].failure_reason;
            per_target.push_back(std::move(j));
        }
        write_text_file(out_dir / "per_target.json", per_target.dump(2) + "\n");
        write_manifest(out_dir, {{"command", "eval"},
                                 {"report_fnv1a64", file_hash(out_dir / "report.json")},
                                 {"per_target_fnv1a64", file_hash(out_dir / "per_target.json")}});
    }
    return 0;
}

int cmd_loop(const RunConfig& run, const fs::path& target_path, const fs::path& out_dir) {
    const KeyValueConfig& kv = run.kv;
    int grid = int(kv.get_int("render.grid", 128));
    DslRenderer renderer(grid);

    BeamConfig cfg;
    cfg.N = int(kv.get_int("loop.n", cfg.N));
    cfg.s = int(kv.get_int("loop.s", cfg.s));
    cfg.stop_threshold = kv.get_double("loop.stop_threshold", cfg.stop_threshold);
    cfg.modality = parse_modality(kv.get("loop.modality", "image"));
    cfg.seed = uint64_t(kv.get_int("loop.seed", 0));
    cfg.refeed_best = kv.get_bool("loop.refeed_best", false);
    cfg.eval = eval_config_from(kv);
    cfg.target_id = kv.get("loop.target_id", "target");

    TriangleMesh clean = load_mesh(target_path);
    EditorFn editor = make_editor(kv, nullptr);
    bool scan_on = kv.get_bool("scan.enabled", false);
    std::string mode = kv.get("loop.mode", "greedy");
    if (mode != "greedy" && mode != "beam")
        throw Error(ErrorCode::range_error, "loop.mode must be greedy or beam");

    fs::create_directories(out_dir);
    run.echo(out_dir);

    Trace trace;
    AggregateReport agg;
    const TriangleMesh* loop_target = &clean;
    TriangleMesh scan_mesh;
    if (scan_on) {
        ScanResult scan = simulate_scan(clean, scan_config_from(kv));
        scan_mesh = std::move(scan.scan_mesh);
        save_mesh(scan_mesh, out_dir / "scan.obj");
        loop_target = &scan_mesh;
        std::tie(trace, agg) = run_scan_track(clean, scan_mesh, editor, renderer, cfg);
    } else {
        trace = mode == "beam" ? stochastic_beam(clean, editor, renderer, cfg)
                               : greedy_loop(clean, editor, renderer, cfg);
        MetricReport best_report;
        if (trace.best_so_far) best_report = trace.best_so_far->report;
        else best_report.failure_reason = "no_valid_candidate";
        agg = aggregate({best_report});
    }

    write_text_file(out_dir / "trace.json", trace_json(trace) + "\n");
    write_text_file(out_dir / "report.json", aggregate_to_json(agg) + "\n");

    // One overlay per step: the loop target against the step's best valid
    // candidate (pure target view when the step had none). Re-renders here do
    // not touch the trace's render budget; the loop has already finished.
    DepthImage target_grid = render_view_grid(*loop_target);
    nlohmann::json overlay_files = nlohmann::json::array();
    for (const StepTrace& st : trace.steps) {
        const Candidate* best = nullptr;
        for (int idx : st.survivor_indices) {
            const Candidate& c = st.candidates[size_t(idx)];
            if (best == nullptr || *c.report.cd_times_1e3 < *best->report.cd_times_1e3) best = &c;
        }
        std::optional<DepthImage> pred_grid;
        if (best) pred_grid = render_view_grid(renderer.render(best->program));
        OverlayImage overlay = compose_overlay(target_grid, pred_grid);
        char name[32];
        std::snprintf(name, sizeof(name), "step_%02d_overlay.png", st.step);
        save_overlay_png(out_dir / name, overlay);
        overlay_files.push_back(name);
    }

    nlohmann::json manifest{{"command", "loop"},
                            {"trace_fnv1a64", file_hash(out_dir / "trace.json")},
                            {"report_fnv1a64", file_hash(out_dir / "report.json")},
                            {"overlays", overlay_files}};
    write_manifest(out_dir, std::move(manifest));

    std::cout << "steps: " << trace.steps.size() << ", renders: " << trace.render_count
              << (trace.stopped_early ? " (stopped early)" : "") << "\n";
    if (trace.best_so_far)
        std::cout << "best: step " << trace.best_so_far->step_born << ", CD x1e3 "
                  << format_number(*trace.best_so_far->report.cd_times_1e3) << "\n";
    else
        std::cout << "best: none (no valid candidate)\n";
    std::cout << aggregate_table(agg);

    // A run where every single call timed out produced nothing to refine;
    // that is an endpoint failure, not a result (artifacts above still land).
    if (!trace.best_so_far) {
        bool any = false, all_timeout = true;
        for (const StepTrace& st : trace.steps)
            for (const Candidate& c : st.candidates) {
                any = true;
                if (c.report.failure_reason != error_code_name(ErrorCode::timeout))
                    all_timeout = false;
            }
        if (any && all_timeout)
            throw Error(ErrorCode::timeout, "editor endpoint unreachable for every call");
    }
    return 0;
}

int cmd_rollouts(const RunConfig& run, const fs::path& corpus_dir, const fs::path& out_dir) {
    const KeyValueConfig& kv = run.kv;
    Stage stage = parse_stage(kv.get("rollout.stage", "A"));
    uint64_t seed = uint64_t(kv.get_int("rollout.seed", 0));
    int grid = int(kv.get_int("render.grid", 128));
    SplitConfig sc;
    sc.d1 = kv.get_double("split.d1", sc.d1);
    sc.d2 = kv.get_double("split.d2", sc.d2);
    sc.d3 = kv.get_double("split.d3", sc.d3);
    sc.seed = uint64_t(kv.get_int("split.seed", 0));

    Corpus corpus = load_corpus_dir(corpus_dir);
    std::vector<std::string> ids;
    for (const auto& [id, entry] : corpus) ids.push_back(id);
    Splits splits = split_corpus(ids, sc);

    fs::create_directories(out_dir);
    run.echo(out_dir);
    EvidenceStore store(out_dir / "evidence");
    DslRenderer renderer(grid);
    EditorFn editor = make_editor(kv, &corpus);

    std::vector<RolloutRecord> records;
    if (stage == Stage::A) {
        records = stage_a_records(splits.d1, corpus, store, seed);
    } else {
        int depth = stage == Stage::B ? 1 : 2;
        const std::vector<std::string>& split_ids = stage == Stage::B ? splits.d2 : splits.d3;
        RolloutSet rollouts_ =
            rollout(editor, split_ids, corpus, renderer, depth, seed, Modality::cross_modal);
        records = stage_mix_records(stage, splits, corpus, rollouts_, store, seed);
    }

    std::string stage_lower(1, char(std::tolower(stage_name(stage)[0])));
    fs::path jsonl = out_dir / ("stage_" + stage_lower + ".jsonl");
    size_t written = write_jsonl(records, jsonl);

    size_t evidence_files = 0;
    for ([[maybe_unused]] const auto& f : fs::directory_iterator(store.root())) ++evidence_files;
    write_manifest(out_dir, {{"command", "rollouts"},
                             {"stage", stage_name(stage)},
                             {"records", written},
                             {"jsonl", jsonl.filename().string()},
                             {"jsonl_fnv1a64", file_hash(jsonl)},
                             {"evidence_files", evidence_files}});
    std::cout << "wrote " << written << " records to " << jsonl.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop CAD reverse engineering: corpus, encoders, scan, loop, rollouts"};
    app.require_subcommand(1);
    int exit_code = 0;

    // Every subcommand: optional --config file, flags override it.
    std::optional<std::string> config_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file (flags win)");
    };

    // gen-corpus ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-corpus", "Generate a procedural program corpus");
    std::optional<int> g_count, g_complexity, g_grid, g_workers;
    std::optional<int64_t> g_seed;
    std::string g_out;
    add_common(gen);
    gen->add_option("--count", g_count, "number of parts");
    gen->add_option("--complexity", g_complexity, "steps per program")->check(CLI::Range(1, 8));
    gen->add_option("--seed", g_seed, "corpus seed");
    gen->add_option("--grid", g_grid, "render grid resolution");
    gen->add_option("--workers", g_workers, "worker threads (never changes outputs)");
    gen->add_option("--out", g_out, "output directory")->required();
    gen->callback([&] {
        RunConfig run;
        run.load(config_path);
        run.flag("corpus.count", g_count);
        run.flag("corpus.complexity", g_complexity);
        run.flag("corpus.seed", g_seed);
        run.flag("render.grid", g_grid);
        run.flag("run.workers", g_workers);
        run.kv.set("out.dir", g_out);
        exit_code = cmd_gen_corpus(run, g_out);
    });

    // scan -------------------------------------------------------------------
    auto* scan = app.add_subcommand("scan", "Simulate a multi-view scan of a mesh");
    std::string s_mesh, s_out;
    std::optional<int> s_points, s_views, s_holes_min, s_holes_max, s_resolution;
    std::optional<double> s_radius_factor, s_hole_rmin, s_hole_rmax;
    std::optional<int64_t> s_seed;
    std::optional<std::string> s_recon_cmd;
    add_common(scan);
    scan->add_option("--mesh", s_mesh, "input mesh (.obj/.stl/.ply)")->required();
    scan->add_option("--out", s_out, "output directory")->required();
    scan->add_option("--points", s_points, "surface samples");
    scan->add_option("--views", s_views, "camera count");
    scan->add_option("--holes-min", s_holes_min, "minimum punched holes");
    scan->add_option("--holes-max", s_holes_max, "maximum punched holes");
    scan->add_option("--hole-radius-min", s_hole_rmin, "hole radius, fraction of diagonal");
    scan->add_option("--hole-radius-max", s_hole_rmax, "hole radius, fraction of diagonal");
    scan->add_option("--resolution", s_resolution, "reconstruction grid");
    scan->add_option("--radius-factor", s_radius_factor, "camera distance factor");
    scan->add_option("--recon-cmd", s_recon_cmd, "external reconstruction command");
    scan->add_option("--seed", s_seed, "scan seed");
    scan->callback([&] {
        RunConfig run;
        run.load(config_path);
        run.flag("scan.points", s_points);
        run.flag("scan.views", s_views);
        run.flag("scan.holes_min", s_holes_min);
        run.flag("scan.holes_max", s_holes_max);
        run.flag("scan.hole_radius_min", s_hole_rmin);
        run.flag("scan.hole_radius_max", s_hole_rmax);
        run.flag("scan.resolution", s_resolution);
        run.flag("scan.radius_factor", s_radius_factor);
        run.flag("scan.recon_cmd", s_recon_cmd);
        run.flag("scan.seed", s_seed);
        run.kv.set("out.dir", s_out);
        exit_code = cmd_scan(run, s_mesh, s_out);
    });

    // eval -------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Score programs against target meshes");
    std::string e_targets, e_programs;
    std::optional<std::string> e_out;
    std::optional<int> e_cd_points, e_iou_res, e_grid, e_workers;
    std::optional<int64_t> e_seed;
    add_common(eval);
    eval->add_option("--targets", e_targets, "directory with target manifest")->required();
    eval->add_option("--programs", e_programs, "directory with program manifest")->required();
    eval->add_option("--out", e_out, "report output directory");
    eval->add_option("--cd-points", e_cd_points, "surface samples per mesh");
    eval->add_option("--iou-res", e_iou_res, "occupancy grid resolution");
    eval->add_option("--grid", e_grid, "render grid resolution");
    eval->add_option("--workers", e_workers, "worker threads (never changes outputs)");
    eval->add_option("--seed", e_seed, "sampling seed");
    eval->callback([&] {
        RunConfig run;
        run.load(config_path);
        run.flag("eval.cd_points", e_cd_points);
        run.flag("eval.iou_resolution", e_iou_res);
        run.flag("render.grid", e_grid);
        run.flag("run.workers", e_workers);
        run.flag("eval.seed", e_seed);
        if (e_out) run.kv.set("out.dir", *e_out);
        exit_code = cmd_eval(run, e_targets, e_programs, e_out);
    });

    // loop -------------------------------------------------------------------
    auto* loop = app.add_subcommand("loop", "Run the closed refinement loop on one target");
    std::string l_target, l_out;
    std::optional<std::string> l_editor, l_mode, l_modality, l_gt, l_responses, l_endpoint,
        l_target_id;
    std::optional<int> l_n, l_s, l_grid, l_retries;
    std::optional<int64_t> l_seed, l_editor_seed;
    std::optional<double> l_stop, l_magnitude, l_timeout;
    std::optional<bool> l_refeed, l_scan;
    std::optional<int> l_cd_points, l_iou_res;
    add_common(loop);
    loop->add_option("--target", l_target, "target mesh file")->required();
    loop->add_option("--out", l_out, "output directory")->required();
    loop->add_option("--editor", l_editor, "oracle|noisy|scripted|remote");
    loop->add_option("--mode", l_mode, "greedy|beam");
    loop->add_option("--modality", l_modality, "image|pointcloud|cross_modal");
    loop->add_option("--gt", l_gt, "ground-truth program file (oracle/noisy)");
    loop->add_option("--magnitude", l_magnitude, "noisy editor scale");
    loop->add_option("--responses", l_responses, "scripted responses JSON");
    loop->add_option("--endpoint", l_endpoint, "remote editor URL");
    loop->add_option("--timeout", l_timeout, "remote timeout seconds");
    loop->add_option("--retries", l_retries, "remote retry count");
    loop->add_option("-N,--width", l_n, "beam width");
    loop->add_option("-s,--steps", l_s, "step budget");
    loop->add_option("--stop-threshold", l_stop, "early-stop improvement threshold");
    loop->add_option("--seed", l_seed, "loop seed");
    loop->add_option("--editor-seed", l_editor_seed, "noisy editor seed");
    loop->add_flag("--refeed-best", [&](int64_t) { l_refeed = true; },
                   "greedy: re-feed best-so-far instead of latest");
    loop->add_flag("--scan", [&](int64_t) { l_scan = true; },
                   "select on a simulated scan, report on the clean mesh");
    loop->add_option("--grid", l_grid, "render grid resolution");
    loop->add_option("--cd-points", l_cd_points, "surface samples per mesh");
    loop->add_option("--iou-res", l_iou_res, "occupancy grid resolution");
    loop->add_option("--target-id", l_target_id, "id passed to the editor");
    loop->callback([&] {
        RunConfig run;
        run.load(config_path);
        run.flag("editor.kind", l_editor);
        run.flag("loop.mode", l_mode);
        run.flag("loop.modality", l_modality);
        run.flag("editor.gt", l_gt);
        run.flag("editor.magnitude", l_magnitude);
        run.flag("editor.responses", l_responses);
        run.flag("remote.endpoint", l_endpoint);
        run.flag("remote.timeout", l_timeout);
        run.flag("remote.retries", l_retries);
        run.flag("loop.n", l_n);
        run.flag("loop.s", l_s);
        run.flag("loop.stop_threshold", l_stop);
        run.flag("loop.seed", l_seed);
        run.flag("editor.seed", l_editor_seed);
        run.flag("loop.refeed_best", l_refeed);
        run.flag("scan.enabled", l_scan);
        run.flag("render.grid", l_grid);
        run.flag("eval.cd_points", l_cd_points);
        run.flag("eval.iou_resolution", l_iou_res);
        run.flag("loop.target_id", l_target_id);
        run.kv.set("out.dir", l_out);
        exit_code = cmd_loop(run, l_target, l_out);
    });

    // rollouts ---------------------------------------------------------------
    auto* rollouts = app.add_subcommand("rollouts", "Emit curriculum training records");
    std::string r_corpus, r_out;
    std::optional<std::string> r_stage, r_editor, r_gt, r_responses, r_endpoint;
    std::optional<double> r_d1, r_d2, r_d3, r_magnitude;
    std::optional<int64_t> r_seed, r_split_seed, r_editor_seed;
    std::optional<int> r_grid;
    add_common(rollouts);
    rollouts->add_option("--corpus", r_corpus, "gen-corpus output directory")->required();
    rollouts->add_option("--out", r_out, "output directory")->required();
    rollouts->add_option("--stage", r_stage, "A|B|C");
    rollouts->add_option("--editor", r_editor, "oracle|noisy|scripted|remote");
    rollouts->add_option("--gt", r_gt, "fixed ground-truth program file");
    rollouts->add_option("--magnitude", r_magnitude, "noisy editor scale");
    rollouts->add_option("--responses", r_responses, "scripted responses JSON");
    rollouts->add_option("--endpoint", r_endpoint, "remote editor URL");
    rollouts->add_option("--d1", r_d1, "first split fraction");
    rollouts->add_option("--d2", r_d2, "second split fraction");
    rollouts->add_option("--d3", r_d3, "third split fraction");
    rollouts->add_option("--seed", r_seed, "rollout seed");
    rollouts->add_option("--split-seed", r_split_seed, "split shuffle seed");
    rollouts->add_option("--editor-seed", r_editor_seed, "noisy editor seed");
    rollouts->add_option("--grid", r_grid, "render grid resolution");
    rollouts->callback([&] {
        RunConfig run;
        run.load(config_path);
        run.flag("rollout.stage", r_stage);
        run.flag("editor.kind", r_editor);
        run.flag("editor.gt", r_gt);
        run.flag("editor.magnitude", r_magnitude);
        run.flag("editor.responses", r_responses);
        run.flag("remote.endpoint", r_endpoint);
        run.flag("split.d1", r_d1);
        run.flag("split.d2", r_d2);
        run.flag("split.d3", r_d3);
        run.flag("rollout.seed", r_seed);
        run.flag("split.seed", r_split_seed);
        run.flag("editor.seed", r_editor_seed);
        run.flag("render.grid", r_grid);
        run.kv.set("out.dir", r_out);
        exit_code = cmd_rollouts(run, r_corpus, r_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::file_not_found ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return exit_code;
}
