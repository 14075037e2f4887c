#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forge/body.hpp"
#include "forge/embedding.hpp"

namespace forge {

struct ActionLabelEntry {
    std::string label;       // raw action label text
    std::string motion_ref;  // motion file, relative to the database root
};

// Label database with stage-1 (cross-modal) and stage-2 (textual) embedding
// tables. Immutable after build; queries only encode the query text.
struct MotionIndex {
    std::vector<ActionLabelEntry> entries;
    std::string stage1_encoder_id;
    std::string stage2_encoder_id;
    MatX stage1;  // n x D1
    MatX stage2;  // n x D2

    int size() const { return static_cast<int>(entries.size()); }
};

MotionIndex build_index(std::span<const ActionLabelEntry> entries, const TextEncoder& stage1,
                        const TextEncoder& stage2);

// index.json plus two embedding caches in `dir`.
void save_index(const std::filesystem::path& dir, const MotionIndex& index);
MotionIndex load_index(const std::filesystem::path& dir);

struct ScoredEntry {
    int index = 0;
    double score = 0;
};

// Embedding-level primitives (also the surface the oracle tests drive).
std::vector<ScoredEntry> stage1_match_embedding(const MotionIndex& index, const Embedding& query,
                                                int k);
int stage2_rerank_embedding(const MotionIndex& index, std::span<const ScoredEntry> candidates,
                            const Embedding& query, std::vector<double>* stage2_scores = nullptr);

// Text-level operations; encoders resolved from the registry by the ids the
// index was built with.
std::vector<ScoredEntry> stage1_match(const MotionIndex& index, const EncoderRegistry& registry,
                                      const std::string& query, int k);

struct RetrievalResult {
    int entry_index = 0;
    std::string label;
    std::vector<ScoredEntry> candidates;   // stage-1 order
    std::vector<double> stage2_scores;     // aligned with candidates
};

RetrievalResult retrieve(const MotionIndex& index, const EncoderRegistry& registry,
                         const std::string& query, int k);

// ---------------------------------------------------------------------------
// Motion database

struct MotionDbEntry {
    std::string label;
    std::string motion_file;
    int frames = 0;
    double fps = 30.0;
};

struct MotionSequence {
    std::string label;
    std::vector<PoseParams> poses;  // T frames of (J, 3) axis-angle
    ShapeParams shape;
    double fps = 30.0;
};

class MotionDatabase {
public:
    explicit MotionDatabase(std::filesystem::path root);

    const std::vector<MotionDbEntry>& entries() const { return entries_; }
    const std::filesystem::path& root() const { return root_; }
    std::vector<ActionLabelEntry> label_entries() const;
    // Loads the pose file behind a motion_ref; throws DataError if unresolved.
    MotionSequence load_motion(const std::string& motion_ref) const;

private:
    std::filesystem::path root_;
    std::vector<MotionDbEntry> entries_;
};

// manifest.json listing {label, motion_file, frames, fps}; per-motion binary
// float32 file of (T*J*3) axis-angle values followed by 10 shape coefficients.
void save_motion_db(const std::filesystem::path& root, std::span<const MotionSequence> motions);

// Full pipeline step: two-stage retrieval, then the motion bound to the
// winning label.
struct RetrievedMotion {
    RetrievalResult result;
    MotionSequence motion;
};
RetrievedMotion retrieve_motion(const MotionIndex& index, const MotionDatabase& db,
                                const EncoderRegistry& registry, const std::string& query, int k);

// ---------------------------------------------------------------------------
// Sentence-pair evaluation harness

struct SentencePair {
    std::string sentence_a;
    std::string sentence_b;
    double relatedness = 0;  // in [1, 5]
};
using SentencePairDataset = std::vector<SentencePair>;

// Tab-separated file with a header naming sentence_A, sentence_B and
// relatedness_score columns.
SentencePairDataset load_sentence_pairs_tsv(const std::filesystem::path& path);

enum class RetrievalVariant {
    stage1_only,
    stage2_only,
    stage2_then_stage1,
    stage1_then_stage2,
};
RetrievalVariant parse_variant(const std::string& name);
std::string variant_name(RetrievalVariant variant);

struct PrecisionResult {
    double precision = 0;  // percent
    int hits = 0;
    int pairs = 0;
    int pool_size = 0;
};

// For every pair in the score range, queries sentence_a against the pool of
// distinct sentence_b values; a hit is retrieving exactly the paired
// sentence_b. Embeddings are computed once per distinct sentence.
PrecisionResult eval_precision(const SentencePairDataset& dataset, RetrievalVariant variant,
                               double score_min, double score_max, const TextEncoder& stage1,
                               const TextEncoder& stage2, int k);

}  // namespace forge
