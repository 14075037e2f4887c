#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "forge/optimize.hpp"
#include "forge/retrieval.hpp"

namespace forge {

// Full run configuration; a JSON config file populates it and every CLI flag
// overrides the corresponding field.
struct RunConfig {
    std::filesystem::path body_manifest;
    std::filesystem::path motion_db;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;

    std::string stage1_encoder = "toy-text";
    std::string stage2_encoder = "toy-text-s2";
    std::string image_encoder = "toy-image";
    int encoder_dimension = 512;
    struct ExtraEncoder {
        std::string kind;  // "precomputed-text" | "toy-text" | "toy-image"
        std::string id;
        std::filesystem::path cache;  // precomputed-text: cache prefix
        std::uint64_t seed = 0;
        int dimension = 512;
    };
    std::vector<ExtraEncoder> extra_encoders;

    int retrieval_k = 3;
    int subdivision_levels = 0;
    OptimizationConfig optimization;
    bool optimization_seeds_set = false;  // config gave explicit seeds
    RenderSettings render;
    std::string export_format = "ply";
    bool ply_binary = true;

    void validate_paths() const;  // body/db must resolve
};

RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& node);

// Derives optimization seeds from the master seed unless the config pinned
// them explicitly.
void finalize_seeds(RunConfig& config);

EncoderRegistry build_registry(const RunConfig& config);

// Embedding cache root: $FORGE_CACHE when set, otherwise empty (no disk cache).
std::filesystem::path forge_cache_root();

void cmd_index(const RunConfig& config, std::ostream& out);
RetrievalResult cmd_retrieve(const RunConfig& config, const std::string& prompt, int k,
                             std::ostream& out);
void cmd_stylize(const RunConfig& config, const std::string& prompt, std::ostream& out);
PrecisionResult cmd_eval_sick(const RunConfig& config, const std::filesystem::path& dataset,
                              const std::string& variant, double score_min, double score_max,
                              std::ostream& out);
void cmd_export(const RunConfig& config, const std::filesystem::path& checkpoint,
                const std::string& motion, const std::string& format, std::ostream& out);
void cmd_preview(const RunConfig& config, const std::filesystem::path& sequence_dir,
                 int turntable_frames, std::ostream& out);

// Parses argv, dispatches, and maps errors to exit codes:
// 0 ok, 2 config error, 3 data error, 4 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace forge
