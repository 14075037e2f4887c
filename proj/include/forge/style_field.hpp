#pragma once

#include <filesystem>
#include <vector>

#include "forge/mesh.hpp"
#include "forge/rng.hpp"

namespace forge {

// Fixed Gaussian frequency matrix for positional encoding; never trained.
struct FourierFeatureMap {
    MatX frequencies;  // L x 3
    double sigma = 5.0;
    std::uint64_t seed = 0;

    static FourierFeatureMap create(int num_frequencies, double sigma, std::uint64_t seed);
    int num_frequencies() const { return static_cast<int>(frequencies.rows()); }
    int feature_dim() const { return 2 * num_frequencies(); }
};

// Rows are [sin(2 pi B v), cos(2 pi B v)].
MatX fourier_encode(const MatX3& vertices, const FourierFeatureMap& map,
                    Exec exec = Exec::parallel);

struct StyleFieldArch {
    std::vector<int> hidden = {256, 256, 256, 256};  // ReLU trunk widths
};

// MLP mapping encoded template vertices to per-vertex color and displacement.
// All weights live in one flat vector so the optimizer and finite-difference
// probes can address single coordinates.
struct StyleFieldParams {
    StyleFieldArch arch;
    FourierFeatureMap fourier;
    std::uint64_t seed = 0;
    Vec flat;

    struct LayerSpec {
        Eigen::Index weight_offset;
        Eigen::Index bias_offset;
        int in_dim;
        int out_dim;
    };
    std::vector<LayerSpec> layers;  // trunk..., color head, displacement head

    Eigen::Index parameter_count() const { return flat.size(); }
    int trunk_layers() const { return static_cast<int>(arch.hidden.size()); }

    Eigen::Map<const MatX> weight(int layer) const {
        const auto& l = layers[layer];
        return {flat.data() + l.weight_offset, l.in_dim, l.out_dim};
    }
    Eigen::Map<const Vec> bias(int layer) const {
        const auto& l = layers[layer];
        return {flat.data() + l.bias_offset, l.out_dim};
    }
};

// Trunk weights use scaled Gaussian initialization; both heads start at zero,
// so a fresh field outputs color 0.5 and displacement 0 everywhere.
StyleFieldParams init_params(const StyleFieldArch& arch, std::uint64_t seed,
                             int fourier_frequencies = 256, double fourier_sigma = 5.0);

// Colors in [0,1], displacements in [-0.1, 0.1]; bounds hold for every
// parameter setting because the heads are squashed (sigmoid, 0.1*tanh).
struct StyleAttributes {
    MatX3 colors;       // V x 3
    Vec displacements;  // V
};

struct StyleFieldCache {
    MatX features;                    // V x 2L
    std::vector<MatX> activations;    // post-ReLU trunk activations
    StyleAttributes outputs;
};

// Forward pass on the rest-pose template vertices. Deterministic given
// params; `cache` enables style_field_backward; `precomputed_features`
// skips re-encoding a fixed template.
StyleAttributes style_field_forward(const StyleFieldParams& params, const MatX3& template_vertices,
                                    Exec exec = Exec::parallel, StyleFieldCache* cache = nullptr,
                                    const MatX* precomputed_features = nullptr);

// Accumulates d(loss)/d(flat params) given gradients on colors/displacements.
void style_field_backward(const StyleFieldParams& params, const StyleFieldCache& cache,
                          const MatX3& grad_colors, const Vec& grad_displacements, Vec& grad_flat,
                          Exec exec = Exec::parallel);

// Displaces the posed content mesh along its own vertex normals and attaches
// colors. Normals are computed on the posed frame unless supplied.
Mesh apply_style(const Mesh& content_mesh, const StyleAttributes& style,
                 const MatX3* normals = nullptr, Exec exec = Exec::parallel);

// Backprop through apply_style: vertex-position gradients project onto the
// (fixed) normals to reach the displacement; color gradients pass through.
void apply_style_backward(const MatX3& normals, const MatX3& grad_vertices,
                          const MatX3& grad_mesh_colors, MatX3& grad_style_colors,
                          Vec& grad_displacements);

// Single-file checkpoint: magic, JSON header {arch, seeds, fourier sigma/L,
// vertex count}, float32 parameter blob.
void save_checkpoint(const std::filesystem::path& path, const StyleFieldParams& params,
                     Eigen::Index vertex_count);
struct Checkpoint {
    StyleFieldParams params;
    Eigen::Index vertex_count = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace forge
