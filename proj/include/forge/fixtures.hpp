#pragma once

#include <filesystem>

#include "forge/retrieval.hpp"

namespace forge {

// Deterministic synthetic data for offline runs and tests.

// Small motion set for the toy body: cyclic joint swings with distinct labels.
std::vector<MotionSequence> make_toy_motions(int joints, std::uint64_t seed = 0);

// Writes a complete demo workspace: body manifest (toy body), motion database
// with manifest.json, and a sentence-pair TSV.
struct ToyWorkspace {
    std::filesystem::path body_manifest;
    std::filesystem::path motion_db;
    std::filesystem::path sentence_pairs;
};
ToyWorkspace write_toy_workspace(const std::filesystem::path& dir, std::uint64_t seed = 0);

// TSV where every sentence is paired with itself (expected precision 100).
void write_duplicate_pairs_tsv(const std::filesystem::path& path, int pairs);

}  // namespace forge
