#pragma once

#include <filesystem>
#include <span>

#include "forge/mesh.hpp"

namespace forge {

// PLY with float vertex positions and, when present, float red/green/blue
// per-vertex color properties (floats keep the round-trip exact at float32).
void write_ply(const std::filesystem::path& path, const Mesh& mesh, bool binary = true);
Mesh read_ply(const std::filesystem::path& path);

// Per-frame PLY files plus sequence.json {format, fps, frames:[{index,file}]}.
void export_sequence_ply(const std::filesystem::path& dir, std::span<const Mesh> frames,
                         double fps, bool binary = true);
std::vector<Mesh> load_sequence(const std::filesystem::path& dir);

// Single glTF 2.0 asset (.gltf + .bin): frame 0 is the base mesh with
// COLOR_0; frames are morph targets driven by a step-interpolated weights
// animation at the given fps.
void export_sequence_gltf(const std::filesystem::path& gltf_path, std::span<const Mesh> frames,
                          double fps);

}  // namespace forge
