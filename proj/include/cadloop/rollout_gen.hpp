#pragma once

#include <cadloop/editor_loop.hpp>
#include <cadloop/mesh.hpp>
#include <cadloop/render.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cadloop {

/// Ground-truth program plus its target mesh in the modeling frame.
struct CorpusEntry {
    std::string program;
    TriangleMesh mesh;
};

using Corpus = std::map<std::string, CorpusEntry>;

struct SplitConfig {
    double d1 = 0.6;
    double d2 = 0.2;
    double d3 = 0.2;  // fractions must be positive and sum to 1
    uint64_t seed = 0;
};

struct Splits {
    std::vector<std::string> d1, d2, d3;
};

/// Seeded shuffle, then contiguous partition by fractions. The three splits
/// are disjoint and cover the input. Throws EmptySplit when a fraction rounds
/// to zero items and RangeError on bad fractions or duplicate ids.
Splits split_corpus(std::vector<std::string> ids, const SplitConfig& cfg);

enum class Stage { A, B, C };

const char* stage_name(Stage stage);
Stage parse_stage(const std::string& name);

/// One training tuple. The supervision target is always the ground-truth
/// program; rollout outputs appear only as context (prev_program) and in the
/// evidence the refs point at.
struct RolloutRecord {
    std::string target_id;
    int t = 1;
    Stage stage = Stage::A;
    std::string overlay_ref;
    std::string cloud_ref;
    std::optional<std::string> prev_program;  // absent exactly at t=1
    std::string target_program;
};

/// Schema invariants: t >= 1, t=1 iff prev_program absent, stage A => t=1,
/// B => t <= 2, C => t <= 3, refs and target present. Throws CorruptPayload.
void validate_record(const RolloutRecord& record);

/// Content-addressed evidence files under `root`: overlay PNGs and binary
/// discrepancy clouds named by their content hash, so identical evidence
/// collapses to one file. Refs are "<root-dirname>/<hash>.<ext>", resolvable
/// relative to the directory the record file sits in.
class EvidenceStore {
public:
    explicit EvidenceStore(std::filesystem::path root);

    /// Writes whatever the evidence carries; returns {overlay_ref, cloud_ref}
    /// with an empty string for an absent side.
    std::pair<std::string, std::string> store(const Evidence& evidence);

    const std::filesystem::path& root() const { return root_; }

private:
    std::string put(const std::vector<uint8_t>& bytes, const char* ext);

    std::filesystem::path root_;
};

/// One t=1 record per id, evidence built with no prior prediction. Throws
/// MissingGroundTruth for ids absent from the corpus.
std::vector<RolloutRecord> stage_a_records(const std::vector<std::string>& d1,
                                           const Corpus& corpus, EvidenceStore& store,
                                           uint64_t seed = 0);

/// One rollout step: the predicted program and its render, absent when the
/// program failed to produce geometry.
struct RolloutStep {
    std::string program;
    std::optional<TriangleMesh> mesh;
};

using RolloutSet = std::map<std::string, std::vector<RolloutStep>>;

/// Runs the editor greedily for `depth` steps (1 or 2) on each target,
/// rendering every step. A failure inside one target truncates that target's
/// list only; the rest of the batch is unaffected. Per-target seeds derive
/// from the id, so results do not depend on batch order.
RolloutSet rollout(const EditorFn& editor, const std::vector<std::string>& ids,
                   const Corpus& corpus, const Renderer& renderer, int depth, uint64_t seed,
                   Modality modality = Modality::cross_modal);

/// Stage B: t=1 plus t=2 records over the second split; Stage C: t in
/// {1,2,3} over the third. t>1 evidence compares the target against the
/// rollout render (null-prediction form when that render failed), with the
/// rollout program as context. Emission order is a seeded shuffle, so
/// consuming records in order samples t uniformly. Throws MissingRollout when
/// a required rollout step is absent.
std::vector<RolloutRecord> stage_mix_records(Stage stage, const Splits& splits,
                                             const Corpus& corpus, const RolloutSet& rollouts,
                                             EvidenceStore& store, uint64_t seed);

/// One JSON object per line, schema version "rollout_v1". Validates every
/// record, returns the number written.
size_t write_jsonl(const std::vector<RolloutRecord>& records, const std::filesystem::path& path);

/// Round-trip reader; validates every line. Throws CorruptPayload on schema
/// violations.
std::vector<RolloutRecord> read_jsonl(const std::filesystem::path& path);

}  // namespace cadloop
