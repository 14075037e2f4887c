// Times the serial reference implementations against the OpenMP kernels on
// realistic sizes and prints the speedups.

#include <chrono>
#include <cstdio>
#include <functional>

#include "forge/body.hpp"
#include "forge/optimize.hpp"
#include "forge/render.hpp"
#include "forge/rng.hpp"
#include "forge/style_field.hpp"

using namespace forge;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e9;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-28s %10.2f ms %10.2f ms %8.2fx\n", name, serial * 1e3, parallel * 1e3,
                serial / parallel);
}

}  // namespace

int main() {
    std::printf("threads: %d\n", max_threads());
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    // Body at production scale: subdivide the toy humanoid twice (~3.4k verts).
    SkinnedBodyModel body = subdivide_body(make_toy_body(), 2);
    Rng rng(7);
    PoseParams pose = PoseParams::identity(static_cast<int>(body.joint_count()));
    for (Eigen::Index j = 0; j < pose.rotations.rows(); ++j)
        for (int c = 0; c < 3; ++c) pose.rotations(j, c) = 0.3 * rng.normal();
    ShapeParams shape;

    report("lbs",
           time_best_of(5, [&] { lbs(body, pose, shape, Exec::serial); }),
           time_best_of(5, [&] { lbs(body, pose, shape, Exec::parallel); }));

    const Mesh posed = lbs(body, pose, shape);
    report("vertex_normals",
           time_best_of(5, [&] { vertex_normals(posed, Exec::serial); }),
           time_best_of(5, [&] { vertex_normals(posed, Exec::parallel); }));

    // Style field on the full template.
    StyleFieldParams params = init_params(StyleFieldArch{}, 0);
    const MatX features = fourier_encode(body.template_vertices, params.fourier);
    report("fourier_encode",
           time_best_of(3, [&] { fourier_encode(body.template_vertices, params.fourier, Exec::serial); }),
           time_best_of(3, [&] { fourier_encode(body.template_vertices, params.fourier, Exec::parallel); }));

    StyleFieldCache cache;
    report("style_field_forward",
           time_best_of(3, [&] {
               style_field_forward(params, body.template_vertices, Exec::serial, nullptr, &features);
           }),
           time_best_of(3, [&] {
               style_field_forward(params, body.template_vertices, Exec::parallel, nullptr, &features);
           }));

    style_field_forward(params, body.template_vertices, Exec::parallel, &cache, &features);
    MatX3 grad_colors = MatX3::Constant(body.vertex_count(), 3, 1e-3);
    Vec grad_disp = Vec::Constant(body.vertex_count(), 1e-3);
    Vec grad_flat = Vec::Zero(params.parameter_count());
    report("style_field_backward",
           time_best_of(3, [&] {
               grad_flat.setZero();
               style_field_backward(params, cache, grad_colors, grad_disp, grad_flat, Exec::serial);
           }),
           time_best_of(3, [&] {
               grad_flat.setZero();
               style_field_backward(params, cache, grad_colors, grad_disp, grad_flat, Exec::parallel);
           }));

    // Rasterization at the default resolution.
    Mesh colored = posed;
    colored.colors = MatX3::Constant(posed.vertex_count(), 3, 0.6);
    CameraSampleConfig cam_config;
    const auto bounds = bounding_sphere(colored);
    cam_config.look_at = bounds.center;
    cam_config.bounding_radius = bounds.radius;
    const CameraPose camera = frontal_camera(cam_config);
    RenderSettings settings;

    report("render 224x224",
           time_best_of(3, [&] { render(colored, camera, settings, Exec::serial); }),
           time_best_of(3, [&] { render(colored, camera, settings, Exec::parallel); }));

    Image grad_rgb(settings.height, settings.width);
    for (double& g : grad_rgb.data) g = 1e-4;
    report("render_backward 224x224",
           time_best_of(3, [&] { render_backward(colored, camera, settings, grad_rgb, Exec::serial); }),
           time_best_of(3, [&] { render_backward(colored, camera, settings, grad_rgb, Exec::parallel); }));

    return 0;
}
