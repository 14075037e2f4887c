#pragma once

#include <vector>

#include "forge/image.hpp"
#include "forge/mesh.hpp"
#include "forge/rng.hpp"

namespace forge {

struct CameraPose {
    double azimuth = 0.0;    // radians, 0 looks down -z toward look_at
    double elevation = 0.0;  // radians, positive above the horizon
    double radius = 2.2;
    double fov = M_PI / 3.0;  // vertical field of view
    Vec3 look_at = Vec3::Zero();
};

struct CameraSampleConfig {
    Vec3 look_at = Vec3::Zero();
    double bounding_radius = 1.0;
    double radius_scale = 2.2;
    double fov = M_PI / 3.0;
    double elevation_stddev = 25.0 * M_PI / 180.0;
    double elevation_min = -60.0 * M_PI / 180.0;
    double elevation_max = 60.0 * M_PI / 180.0;
};

// Azimuth uniform on [0, 2pi); elevation Gaussian, redrawn until inside the
// truncation bounds; radius fixed at radius_scale * bounding_radius.
std::vector<CameraPose> sample_camera_poses(int n, Rng& rng, const CameraSampleConfig& config);

// Frontal view (azimuth 0, elevation 0) at the sampling radius.
CameraPose frontal_camera(const CameraSampleConfig& config);

struct RenderSettings {
    int height = 224;
    int width = 224;
    Vec3 background = Vec3::Ones();
    // Edge softness as a fraction of max(height, width); the sigmoid band in
    // pixels is soft_temperature * max(H, W).
    double soft_temperature = 1e-4;
    // Depth falloff of the per-pixel fragment softmax, as a fraction of the
    // camera radius. Small values approach a hard z-buffer while keeping the
    // aggregation smooth in depth (coplanar fragments blend instead of
    // z-fighting).
    double depth_temperature = 5e-3;
    double ambient = 0.3;

    void validate() const;
};

// Soft rasterization: sigmoid-blended edge coverage, per-pixel depth-softmax
// aggregation of fragments against the background, flat Lambertian shading
// with a headlight at the camera, and barycentric vertex colors. Gradients
// flow to vertex positions and colors; render_backward recomputes the same
// fragments, so the two calls see identical geometry.
RenderOutput render(const Mesh& mesh, const CameraPose& pose, const RenderSettings& settings,
                    Exec exec = Exec::parallel);

// Same geometry with all vertex colors replaced by uniform gray 0.5;
// geometry gradients still flow, color gradients vanish.
RenderOutput render_geo(const Mesh& mesh, const CameraPose& pose, const RenderSettings& settings,
                        Exec exec = Exec::parallel);

struct RenderGrad {
    MatX3 vertices;
    MatX3 colors;
};

RenderGrad render_backward(const Mesh& mesh, const CameraPose& pose,
                           const RenderSettings& settings, const Image& grad_rgb,
                           Exec exec = Exec::parallel);
RenderGrad render_geo_backward(const Mesh& mesh, const CameraPose& pose,
                               const RenderSettings& settings, const Image& grad_rgb,
                               Exec exec = Exec::parallel);

// Fraction of pixels whose (soft) mask exceeds 0.5.
double foreground_ratio(const RenderOutput& view);

}  // namespace forge
