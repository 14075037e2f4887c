#pragma once

#include <span>
#include <string>
#include <vector>

#include "forge/augment.hpp"
#include "forge/body.hpp"
#include "forge/embedding.hpp"
#include "forge/render.hpp"
#include "forge/style_field.hpp"

namespace forge {

struct OptimizationConfig {
    int iterations = 1500;
    double learning_rate = 5e-4;
    double lr_decay = 0.9;
    int lr_decay_every = 100;
    int n_views = 5;
    int frame_top_k = 3;
    int global_augments_per_view = 1;
    int local_augments_per_view = 1;
    double weight_global = 1.0;
    double weight_local = 1.0;
    double weight_geo = 1.0;
    std::uint64_t param_seed = 0;
    std::uint64_t sampling_seed = 0;
    bool deterministic = false;  // serial kernels, bitwise-reproducible runs
    StyleFieldArch arch;
    int fourier_frequencies = 256;
    double fourier_sigma = 5.0;

    Exec exec() const { return deterministic ? Exec::serial : Exec::parallel; }
    void validate() const;
};

struct LossRecord {
    int iteration = 0;
    double total = 0, global_term = 0, local_term = 0, geo_term = 0;
    double lr = 0;
    double wall_seconds = 0;
    bool skipped = false;
};

struct LossReport {
    std::vector<LossRecord> records;
    int skipped_iterations = 0;
    int skipped_terms = 0;

    double initial_total() const { return records.empty() ? 0.0 : records.front().total; }
    double final_total() const { return records.empty() ? 0.0 : records.back().total; }
};

// CSV columns: iteration,total,global,local,geo,lr.
void write_loss_csv(const std::filesystem::path& path, const LossReport& report);

// Normalized-weight mean of view embeddings; rejects an all-zero weight set
// (every view empty).
Embedding mask_weighted_mean(std::span<const Embedding> embeddings,
                             std::span<const double> weights);

// 1 - cos(mean_embedding, text_embedding), in [0, 2].
double semantic_loss(const Embedding& mean_embedding, const Embedding& text_embedding);
// d(loss)/d(mean_embedding).
Embedding semantic_loss_backward(const Embedding& mean_embedding, const Embedding& text_embedding);

// Scores gray frontal renders of every frame against the prompt and returns
// the top-k frame indices in descending score order (stable ties).
std::vector<int> sample_content_frames(std::span<const Mesh> meshes, const std::string& prompt,
                                       const ImageEncoder& image_encoder,
                                       const TextEncoder& text_encoder, int k,
                                       const RenderSettings& settings,
                                       Exec exec = Exec::parallel);

// Everything fixed across iterations.
struct OptimizationScene {
    const SkinnedBodyModel* body = nullptr;
    MatX3 template_vertices;       // shaped rest pose, input of the style field
    MatX template_features;        // its Fourier features
    std::vector<Mesh> content;     // selected content frames
    std::vector<MatX3> content_normals;
    Embedding text_embedding;
    const ImageEncoder* image_encoder = nullptr;
    RenderSettings render_settings;
    CameraSampleConfig camera_config;
    double weight_global = 1, weight_local = 1, weight_geo = 1;
    Exec exec = Exec::parallel;
};

// One iteration's random draws, frozen so the loss is a deterministic
// function of the parameters (used directly by finite-difference checks).
struct ViewPlan {
    CameraPose pose;
    std::vector<ImageWarp> global_warps;
    std::vector<ImageWarp> local_warps;
    std::vector<ImageWarp> geo_warps;
};
struct FramePlan {
    int content_index;  // into scene.content
    std::vector<ViewPlan> views;
};
struct IterationPlan {
    std::vector<FramePlan> frames;
};

IterationPlan plan_iteration(const OptimizationScene& scene, const OptimizationConfig& config,
                             Rng& rng);

struct IterationResult {
    double total = 0, global_term = 0, local_term = 0, geo_term = 0;
    int evaluated_terms = 0;
    int skipped_terms = 0;
    double weight_sum = 0;  // sum of all mask weights, diagnostic
};

// Forward (and, when grad_flat is non-null, backward) pass of one iteration.
IterationResult evaluate_iteration(const StyleFieldParams& params, const OptimizationScene& scene,
                                   const IterationPlan& plan, Vec* grad_flat);

OptimizationScene build_scene(const SkinnedBodyModel& body, const ShapeParams& shape,
                              std::span<const Mesh> motion, std::span<const int> frame_indices,
                              const std::string& prompt, const ImageEncoder& image_encoder,
                              const TextEncoder& text_encoder, const RenderSettings& settings,
                              const OptimizationConfig& config);

struct OptimizeResult {
    StyleFieldParams params;
    LossReport report;
    std::vector<int> frame_indices;
};

// Core loop over a prepared scene: fresh parameters, per-iteration view and
// augmentation sampling, three-level losses, Adam with step decay. Fills in
// scene.template_features from the initialized Fourier map.
OptimizeResult optimize_scene(const OptimizationConfig& config, OptimizationScene& scene);

// The full text-driven optimization: multi-modal frame sampling, per-iteration
// spatial view sampling, three-level augmented losses, Adam with step decay.
OptimizeResult optimize_dnsf(const OptimizationConfig& config, const SkinnedBodyModel& body,
                             const ShapeParams& shape, std::span<const Mesh> motion,
                             const std::string& prompt, const ImageEncoder& image_encoder,
                             const TextEncoder& text_encoder, const RenderSettings& settings);

struct StylizedMotion {
    StyleAttributes style;     // shared by every frame
    std::vector<Mesh> frames;  // displaced + colored content meshes
};

// One style field evaluation on the template, applied to every frame.
StylizedMotion stylize_motion(const StyleFieldParams& params, const SkinnedBodyModel& body,
                              const ShapeParams& shape, std::span<const Mesh> motion,
                              Exec exec = Exec::parallel);

}  // namespace forge
