#include <cadloop/rollout_gen.hpp>

#include <cadloop/error.hpp>
#include <cadloop/image.hpp>
#include <cadloop/util.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace cadloop {

namespace {

// Mirrors the loop's per-step schedule: one evidence stream per step, one
// editor stream per (step, candidate).
constexpr uint64_t kEvidenceStreamBase = 0xE0000;

uint64_t target_seed(uint64_t run_seed, const std::string& id) {
    return derive_seed(run_seed, fnv1a64(id));
}

uint64_t step_evidence_seed(uint64_t tseed, int t) {
    return derive_seed(tseed, kEvidenceStreamBase + uint64_t(t) * 64);
}

uint64_t step_editor_seed(uint64_t tseed, int t) {
    return derive_seed(derive_seed(tseed, uint64_t(t)), 0);
}

const CorpusEntry& corpus_entry(const Corpus& corpus, const std::string& id) {
    auto it = corpus.find(id);
    if (it == corpus.end())
        throw Error(ErrorCode::missing_ground_truth, "corpus has no entry for " + id);
    return it->second;
}

}  // namespace

Splits split_corpus(std::vector<std::string> ids, const SplitConfig& cfg) {
    if (!(cfg.d1 > 0.0) || !(cfg.d2 > 0.0) || !(cfg.d3 > 0.0))
        throw Error(ErrorCode::range_error, "split fractions must be positive");
    if (std::abs(cfg.d1 + cfg.d2 + cfg.d3 - 1.0) > 1e-9)
        throw Error(ErrorCode::range_error, "split fractions must sum to 1");
    std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size())
        throw Error(ErrorCode::range_error, "corpus ids must be unique");

    Rng rng(cfg.seed);
    for (size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_index(i)]);

    size_t n = ids.size();
    size_t n1 = size_t(std::llround(cfg.d1 * double(n)));
    size_t n2 = size_t(std::llround(cfg.d2 * double(n)));
    if (n1 == 0 || n2 == 0 || n1 + n2 >= n)
        throw Error(ErrorCode::empty_split, "a split fraction yields zero items for " +
                                                std::to_string(n) + " ids");
    Splits out;
    out.d1.assign(ids.begin(), ids.begin() + ptrdiff_t(n1));
    out.d2.assign(ids.begin() + ptrdiff_t(n1), ids.begin() + ptrdiff_t(n1 + n2));
    out.d3.assign(ids.begin() + ptrdiff_t(n1 + n2), ids.end());
    return out;
}

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::A: return "A";
        case Stage::B: return "B";
        case Stage::C: return "C";
    }
    return "A";
}

Stage parse_stage(const std::string& name) {
    if (name == "A" || name == "a") return Stage::A;
    if (name == "B" || name == "b") return Stage::B;
    if (name == "C" || name == "c") return Stage::C;
    throw Error(ErrorCode::parse_error, "unknown stage: " + name);
}

void validate_record(const RolloutRecord& record) {
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::corrupt_payload, "record for " + record.target_id + ": " + why);
    };
    if (record.target_id.empty()) fail("target_id empty");
    if (record.t < 1) fail("t must be >= 1");
    if ((record.t == 1) == record.prev_program.has_value())
        fail("prev_program must be absent exactly at t=1");
    int max_t = record.stage == Stage::A ? 1 : record.stage == Stage::B ? 2 : 3;
    if (record.t > max_t)
        fail(std::string("t=") + std::to_string(record.t) + " exceeds stage " +
             stage_name(record.stage));
    if (record.overlay_ref.empty() || record.cloud_ref.empty()) fail("evidence refs missing");
    if (record.target_program.empty()) fail("target program empty");
}

EvidenceStore::EvidenceStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::string EvidenceStore::put(const std::vector<uint8_t>& bytes, const char* ext) {
    std::string name = to_hex(fnv1a64(bytes.data(), bytes.size())) + ext;
    std::filesystem::path file = root_ / name;
    if (!std::filesystem::exists(file)) write_binary_file(file, bytes);
    return (root_.filename() / name).generic_string();
}

std::pair<std::string, std::string> EvidenceStore::store(const Evidence& evidence) {
    std::pair<std::string, std::string> refs;
    if (evidence.overlay) {
        const OverlayImage& ov = *evidence.overlay;
        refs.first = put(encode_png_rgb8(ov.width, ov.height, overlay_rgb8(ov)), ".png");
    }
    if (evidence.cloud) refs.second = put(serialize_cloud(*evidence.cloud), ".dcld");
    return refs;
}

namespace {

RolloutRecord make_record(const std::string& id, int t, Stage stage, const CorpusEntry& entry,
                          const std::optional<PrevContext>& prev, EvidenceStore& store,
                          uint64_t tseed) {
    Evidence ev =
        build_evidence(entry.mesh, prev, Modality::cross_modal, step_evidence_seed(tseed, t));
    RolloutRecord rec;
    rec.target_id = id;
    rec.t = t;
    rec.stage = stage;
    std::tie(rec.overlay_ref, rec.cloud_ref) = store.store(ev);
    if (prev) rec.prev_program = prev->program;
    rec.target_program = entry.program;
    validate_record(rec);
    return rec;
}

}  // namespace

std::vector<RolloutRecord> stage_a_records(const std::vector<std::string>& d1,
                                           const Corpus& corpus, EvidenceStore& store,
                                           uint64_t seed) {
    std::vector<RolloutRecord> records;
    records.reserve(d1.size());
    for (const std::string& id : d1) {
        const CorpusEntry& entry = corpus_entry(corpus, id);
        records.push_back(
            make_record(id, 1, Stage::A, entry, std::nullopt, store, target_seed(seed, id)));
    }
    return records;
}

RolloutSet rollout(const EditorFn& editor, const std::vector<std::string>& ids,
                   const Corpus& corpus, const Renderer& renderer, int depth, uint64_t seed,
                   Modality modality) {
    if (depth < 1 || depth > 2)
        throw Error(ErrorCode::range_error, "rollout depth must be 1 or 2");
    RolloutSet out;
    for (const std::string& id : ids) {
        const CorpusEntry& entry = corpus_entry(corpus, id);
        uint64_t tseed = target_seed(seed, id);
        std::vector<RolloutStep>& steps = out[id];
        std::optional<PrevContext> prev;
        for (int t = 1; t <= depth; ++t) {
            RolloutStep step;
            try {
                Evidence ev = build_evidence(entry.mesh, prev, modality,
                                             step_evidence_seed(tseed, t));
                EditorCall call{id, t, 0, EditorMode::greedy, step_editor_seed(tseed, t)};
                step.program = editor(ev, call);
            } catch (const std::exception&) {
                break;  // this target's rollout ends here; others are unaffected
            }
            try {
                step.mesh = renderer.render(step.program);
            } catch (const Error&) {
                step.mesh.reset();  // null mesh marker: program kept, render invalid
            }
            prev = PrevContext{step.program, step.mesh};
            steps.push_back(std::move(step));
        }
    }
    return out;
}

std::vector<RolloutRecord> stage_mix_records(Stage stage, const Splits& splits,
                                             const Corpus& corpus, const RolloutSet& rollouts,
                                             EvidenceStore& store, uint64_t seed) {
    if (stage == Stage::A)
        throw Error(ErrorCode::range_error, "stage A records carry no rollout mixture");
    int max_t = stage == Stage::B ? 2 : 3;
    const std::vector<std::string>& ids = stage == Stage::B ? splits.d2 : splits.d3;

    std::vector<RolloutRecord> records;
    records.reserve(ids.size() * size_t(max_t));
    for (const std::string& id : ids) {
        const CorpusEntry& entry = corpus_entry(corpus, id);
        auto rit = rollouts.find(id);
        size_t have = rit == rollouts.end() ? 0 : rit->second.size();
        if (have < size_t(max_t - 1))
            throw Error(ErrorCode::missing_rollout,
                        "need a depth-" + std::to_string(max_t - 1) + " rollout for " + id);
        uint64_t tseed = target_seed(seed, id);
        for (int t = 1; t <= max_t; ++t) {
            std::optional<PrevContext> prev;
            if (t > 1) {
                const RolloutStep& rs = rit->second[size_t(t - 2)];
                prev = PrevContext{rs.program, rs.mesh};
            }
            records.push_back(make_record(id, t, stage, entry, prev, store, tseed));
        }
    }

    // Emission order: uniform shuffle, so a prefix of any length samples t
    // uniformly in expectation.
    Rng rng(derive_seed(seed, 0xE111));
    for (size_t i = records.size(); i > 1; --i)
        std::swap(records[i - 1], records[rng.uniform_index(i)]);
    return records;
}

namespace {

nlohmann::json record_json(const RolloutRecord& rec) {
    nlohmann::json j{
        {"version", "rollout_v1"},
        {"target_id", rec.target_id},
        {"t", rec.t},
        {"stage", stage_name(rec.stage)},
        {"overlay_ref", rec.overlay_ref},
        {"cloud_ref", rec.cloud_ref},
        {"target_program", rec.target_program},
    };
    if (rec.prev_program) j["prev_program"] = *rec.prev_program;
    return j;
}

}  // namespace

size_t write_jsonl(const std::vector<RolloutRecord>& records, const std::filesystem::path& path) {
    std::string out;
    for (const RolloutRecord& rec : records) {
        validate_record(rec);
        out += record_json(rec).dump();
        out += '\n';
    }
    write_text_file(path, out);
    return records.size();
}

std::vector<RolloutRecord> read_jsonl(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::vector<RolloutRecord> records;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::corrupt_payload,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || j.value("version", "") != "rollout_v1")
            throw Error(ErrorCode::corrupt_payload,
                        "line " + std::to_string(line_no) + ": not a rollout_v1 record");
        RolloutRecord rec;
        try {
            rec.target_id = j.at("target_id").get<std::string>();
            rec.t = j.at("t").get<int>();
            rec.stage = parse_stage(j.at("stage").get<std::string>());
            rec.overlay_ref = j.at("overlay_ref").get<std::string>();
            rec.cloud_ref = j.at("cloud_ref").get<std::string>();
            rec.target_program = j.at("target_program").get<std::string>();
            if (j.contains("prev_program")) rec.prev_program = j["prev_program"].get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::corrupt_payload,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
        validate_record(rec);
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace cadloop
