#include "forge/optimize.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace forge {

void OptimizationConfig::validate() const {
    if (iterations < 0) throw ConfigError("optimization: iterations must be >= 0");
    if (learning_rate <= 0) throw ConfigError("optimization: learning_rate must be positive");
    if (lr_decay <= 0 || lr_decay > 1) throw ConfigError("optimization: lr_decay must be in (0,1]");
    if (lr_decay_every <= 0) throw ConfigError("optimization: lr_decay_every must be positive");
    if (n_views < 1) throw ConfigError("optimization: n_views must be >= 1");
    if (frame_top_k < 1) throw ConfigError("optimization: frame_top_k must be >= 1");
    if (global_augments_per_view < 0 || local_augments_per_view < 0)
        throw ConfigError("optimization: augment counts must be >= 0");
    if (weight_global < 0 || weight_local < 0 || weight_geo < 0)
        throw ConfigError("optimization: level weights must be >= 0");
    if (fourier_frequencies <= 0) throw ConfigError("optimization: fourier_frequencies must be > 0");
}

void write_loss_csv(const std::filesystem::path& path, const LossReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << "iteration,total,global,local,geo,lr\n";
    char line[256];
    for (const auto& r : report.records) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                      r.total, r.global_term, r.local_term, r.geo_term, r.lr);
        out << line;
    }
}

Embedding mask_weighted_mean(std::span<const Embedding> embeddings,
                             std::span<const double> weights) {
    if (embeddings.empty()) throw std::invalid_argument("mask_weighted_mean: no embeddings");
    if (embeddings.size() != weights.size())
        throw std::invalid_argument("mask_weighted_mean: weight count mismatch");
    double total = 0;
    for (double w : weights) {
        if (w < 0) throw std::invalid_argument("mask_weighted_mean: negative weight");
        total += w;
    }
    if (total <= 1e-8)
        throw std::invalid_argument("mask_weighted_mean: all views empty (weight sum ~ 0)");
    Embedding mean = Embedding::Zero(embeddings[0].size());
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].size() != mean.size())
            throw std::invalid_argument("mask_weighted_mean: embedding dimension mismatch");
        mean += (weights[i] / total) * embeddings[i];
    }
    return mean;
}

double semantic_loss(const Embedding& mean_embedding, const Embedding& text_embedding) {
    return 1.0 - cosine_similarity(mean_embedding, text_embedding);
}

Embedding semantic_loss_backward(const Embedding& mean_embedding, const Embedding& text_embedding) {
    const double gn = mean_embedding.norm();
    const Embedding g_hat = mean_embedding / gn;
    const Embedding t_hat = normalized(text_embedding);
    const double cos = g_hat.dot(t_hat);
    return -(t_hat - cos * g_hat) / gn;
}

namespace {

BoundingSphere combined_bounds(std::span<const Mesh> meshes) {
    if (meshes.empty()) throw std::invalid_argument("combined_bounds: no meshes");
    Vec3 center = Vec3::Zero();
    Eigen::Index total = 0;
    for (const auto& m : meshes) {
        center += m.vertices.colwise().sum().transpose();
        total += m.vertex_count();
    }
    center /= static_cast<double>(total);
    double r2 = 0;
    for (const auto& m : meshes)
        for (Eigen::Index v = 0; v < m.vertex_count(); ++v)
            r2 = std::max(r2, (m.vertices.row(v).transpose() - center).squaredNorm());
    return {center, std::sqrt(r2)};
}

}  // namespace

std::vector<int> sample_content_frames(std::span<const Mesh> meshes, const std::string& prompt,
                                       const ImageEncoder& image_encoder,
                                       const TextEncoder& text_encoder, int k,
                                       const RenderSettings& settings, Exec exec) {
    const int t = static_cast<int>(meshes.size());
    if (t < 1) throw std::invalid_argument("sample_content_frames: empty motion");
    if (k < 1 || k > t)
        throw std::invalid_argument("sample_content_frames: k must be in [1, frame count]");

    CameraSampleConfig cam_config;
    const auto bounds = combined_bounds(meshes);
    cam_config.look_at = bounds.center;
    cam_config.bounding_radius = bounds.radius;
    const CameraPose camera = frontal_camera(cam_config);

    const Embedding text = text_encoder.encode(prompt);
    std::vector<double> scores(t);
    for (int i = 0; i < t; ++i) {
        const RenderOutput view = render_geo(meshes[i], camera, settings, exec);
        scores[i] = cosine_similarity(image_encoder.encode(view.rgb), text);
    }
    return top_k(scores, k).indices;
}

OptimizationScene build_scene(const SkinnedBodyModel& body, const ShapeParams& shape,
                              std::span<const Mesh> motion, std::span<const int> frame_indices,
                              const std::string& prompt, const ImageEncoder& image_encoder,
                              const TextEncoder& text_encoder, const RenderSettings& settings,
                              const OptimizationConfig& config) {
    if (!image_encoder.differentiable())
        throw ConfigError("optimize: image encoder '" + image_encoder.id() +
                          "' is not differentiable");
    if (image_encoder.dimension() != text_encoder.dimension())
        throw ConfigError("optimize: image and text encoder dimensions differ");
    settings.validate();

    OptimizationScene scene;
    scene.body = &body;
    scene.template_vertices = shaped_template(body, shape);
    scene.exec = config.exec();
    scene.text_embedding = text_encoder.encode(prompt);
    scene.image_encoder = &image_encoder;
    scene.render_settings = settings;
    scene.weight_global = config.weight_global;
    scene.weight_local = config.weight_local;
    scene.weight_geo = config.weight_geo;

    for (int idx : frame_indices) {
        if (idx < 0 || idx >= static_cast<int>(motion.size()))
            throw std::invalid_argument("optimize: frame index out of range");
        scene.content.push_back(motion[idx]);
        scene.content_normals.push_back(vertex_normals(motion[idx], scene.exec));
    }

    const auto bounds = combined_bounds(scene.content);
    scene.camera_config.look_at = bounds.center;
    scene.camera_config.bounding_radius = bounds.radius;
    return scene;
}

IterationPlan plan_iteration(const OptimizationScene& scene, const OptimizationConfig& config,
                             Rng& rng) {
    IterationPlan plan;
    const int h = scene.render_settings.height;
    const int w = scene.render_settings.width;
    for (int f = 0; f < static_cast<int>(scene.content.size()); ++f) {
        FramePlan frame;
        frame.content_index = f;
        const auto poses = sample_camera_poses(config.n_views, rng, scene.camera_config);
        for (const auto& pose : poses) {
            ViewPlan view;
            view.pose = pose;
            for (int a = 0; a < config.global_augments_per_view; ++a)
                view.global_warps.push_back(ImageWarp::global_augment(rng, h, w));
            for (int a = 0; a < config.local_augments_per_view; ++a)
                view.local_warps.push_back(ImageWarp::local_augment(rng, h, w));
            for (int a = 0; a < config.local_augments_per_view; ++a)
                view.geo_warps.push_back(ImageWarp::local_augment(rng, h, w));
            frame.views.push_back(std::move(view));
        }
        plan.frames.push_back(std::move(frame));
    }
    return plan;
}

namespace {

struct LevelSample {
    int view = 0;
    const ImageWarp* warp = nullptr;
    RenderOutput warped;
    Embedding embedding;
    double weight = 0;
};

// Evaluates one (frame, level) term; on backward, scatters gradients into the
// per-view rendered-image gradients.
struct LevelOutcome {
    bool evaluated = false;
    double loss = 0;
};

LevelOutcome eval_level(const OptimizationScene& scene, std::vector<LevelSample>& samples,
                        double level_weight, std::vector<Image>* grad_render_rgb,
                        IterationResult& result) {
    LevelOutcome outcome;
    if (samples.empty() || level_weight == 0.0) return outcome;
    double weight_sum = 0;
    for (const auto& s : samples) weight_sum += s.weight;
    if (weight_sum <= 1e-8) {
        ++result.skipped_terms;
        return outcome;
    }

    std::vector<Embedding> embeddings;
    std::vector<double> weights;
    embeddings.reserve(samples.size());
    weights.reserve(samples.size());
    for (auto& s : samples) {
        embeddings.push_back(std::move(s.embedding));
        weights.push_back(s.weight);
    }
    const Embedding mean = mask_weighted_mean(embeddings, weights);
    outcome.loss = level_weight * semantic_loss(mean, scene.text_embedding);
    outcome.evaluated = true;
    ++result.evaluated_terms;

    if (grad_render_rgb) {
        const Embedding grad_mean =
            level_weight * semantic_loss_backward(mean, scene.text_embedding);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const Embedding grad_emb = (weights[i] / weight_sum) * grad_mean;
            Image grad_warped(samples[i].warped.rgb.height, samples[i].warped.rgb.width);
            scene.image_encoder->encode_backward(samples[i].warped.rgb, grad_emb, grad_warped);
            samples[i].warp->backward(grad_warped, (*grad_render_rgb)[samples[i].view]);
        }
    }
    return outcome;
}

}  // namespace

IterationResult evaluate_iteration(const StyleFieldParams& params, const OptimizationScene& scene,
                                   const IterationPlan& plan, Vec* grad_flat) {
    IterationResult result;
    const Exec exec = scene.exec;

    StyleFieldCache cache;
    const StyleAttributes style =
        style_field_forward(params, scene.template_vertices, exec, grad_flat ? &cache : nullptr,
                            &scene.template_features);

    const auto nv = scene.template_vertices.rows();
    MatX3 grad_colors = MatX3::Zero(nv, 3);
    Vec grad_disp = Vec::Zero(nv);

    const bool use_geo = scene.weight_geo > 0.0;
    for (const auto& frame : plan.frames) {
        const Mesh& content = scene.content[frame.content_index];
        const MatX3& normals = scene.content_normals[frame.content_index];
        const Mesh stylized = apply_style(content, style, &normals, exec);

        const int n_views = static_cast<int>(frame.views.size());
        std::vector<RenderOutput> color_renders(n_views);
        std::vector<RenderOutput> geo_renders(use_geo ? n_views : 0);
        for (int v = 0; v < n_views; ++v) {
            color_renders[v] = render(stylized, frame.views[v].pose, scene.render_settings, exec);
            if (use_geo)
                geo_renders[v] =
                    render_geo(stylized, frame.views[v].pose, scene.render_settings, exec);
        }

        auto collect = [&](bool geo, std::vector<ImageWarp> ViewPlan::*warps) {
            std::vector<LevelSample> samples;
            for (int v = 0; v < n_views; ++v) {
                const auto& source = geo ? geo_renders[v] : color_renders[v];
                for (const auto& warp : frame.views[v].*warps) {
                    LevelSample s;
                    s.view = v;
                    s.warp = &warp;
                    s.warped = warp.apply(source);
                    s.weight = foreground_ratio(s.warped);
                    result.weight_sum += s.weight;
                    s.embedding = scene.image_encoder->encode(s.warped.rgb);
                    samples.push_back(std::move(s));
                }
            }
            return samples;
        };

        std::vector<Image> grad_color_rgb, grad_geo_rgb;
        if (grad_flat) {
            grad_color_rgb.assign(n_views, Image(scene.render_settings.height,
                                                 scene.render_settings.width));
            if (use_geo)
                grad_geo_rgb.assign(n_views, Image(scene.render_settings.height,
                                                   scene.render_settings.width));
        }

        auto global_samples = collect(false, &ViewPlan::global_warps);
        auto local_samples = collect(false, &ViewPlan::local_warps);
        const auto global_out = eval_level(scene, global_samples, scene.weight_global,
                                           grad_flat ? &grad_color_rgb : nullptr, result);
        const auto local_out = eval_level(scene, local_samples, scene.weight_local,
                                          grad_flat ? &grad_color_rgb : nullptr, result);
        result.global_term += global_out.loss;
        result.local_term += local_out.loss;

        if (use_geo) {
            auto geo_samples = collect(true, &ViewPlan::geo_warps);
            const auto geo_out = eval_level(scene, geo_samples, scene.weight_geo,
                                            grad_flat ? &grad_geo_rgb : nullptr, result);
            result.geo_term += geo_out.loss;
        }

        if (grad_flat) {
            MatX3 grad_vertices = MatX3::Zero(nv, 3);
            MatX3 grad_mesh_colors = MatX3::Zero(nv, 3);
            for (int v = 0; v < n_views; ++v) {
                bool any = false;
                for (double g : grad_color_rgb[v].data)
                    if (g != 0.0) {
                        any = true;
                        break;
                    }
                if (any) {
                    const RenderGrad rg = render_backward(stylized, frame.views[v].pose,
                                                          scene.render_settings,
                                                          grad_color_rgb[v], exec);
                    grad_vertices += rg.vertices;
                    grad_mesh_colors += rg.colors;
                }
                if (use_geo) {
                    bool any_geo = false;
                    for (double g : grad_geo_rgb[v].data)
                        if (g != 0.0) {
                            any_geo = true;
                            break;
                        }
                    if (any_geo) {
                        const RenderGrad rg = render_geo_backward(stylized, frame.views[v].pose,
                                                                  scene.render_settings,
                                                                  grad_geo_rgb[v], exec);
                        grad_vertices += rg.vertices;
                    }
                }
            }
            apply_style_backward(normals, grad_vertices, grad_mesh_colors, grad_colors, grad_disp);
        }
    }

    result.total = result.global_term + result.local_term + result.geo_term;
    if (grad_flat) style_field_backward(params, cache, grad_colors, grad_disp, *grad_flat, exec);
    return result;
}

namespace {

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Vec m, v;
    int t = 0;

    void step(Vec& params, const Vec& grad, double lr) {
        if (m.size() != params.size()) {
            m = Vec::Zero(params.size());
            v = Vec::Zero(params.size());
        }
        ++t;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 / (1.0 - std::pow(beta1, t));
        const double c2 = 1.0 / (1.0 - std::pow(beta2, t));
        params -= lr * (c1 * m.array() / ((c2 * v.array()).sqrt() + eps)).matrix();
    }
};

}  // namespace

OptimizeResult optimize_scene(const OptimizationConfig& config, OptimizationScene& scene) {
    config.validate();
    OptimizeResult result;
    result.params = init_params(config.arch, config.param_seed, config.fourier_frequencies,
                                config.fourier_sigma);
    scene.template_features =
        fourier_encode(scene.template_vertices, result.params.fourier, config.exec());

    Rng rng(config.sampling_seed);
    Adam adam;
    Vec grad = Vec::Zero(result.params.parameter_count());

    for (int iter = 0; iter < config.iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr =
            config.learning_rate * std::pow(config.lr_decay, iter / config.lr_decay_every);

        const IterationPlan plan = plan_iteration(scene, config, rng);
        grad.setZero();
        const IterationResult it = evaluate_iteration(result.params, scene, plan,
                                                      &grad);
        if (!std::isfinite(it.total))
            throw NumericError("optimize: non-finite loss at iteration " + std::to_string(iter));

        LossRecord record;
        record.iteration = iter;
        record.total = it.total;
        record.global_term = it.global_term;
        record.local_term = it.local_term;
        record.geo_term = it.geo_term;
        record.lr = lr;
        record.skipped = it.evaluated_terms == 0;
        result.report.skipped_terms += it.skipped_terms;

        if (record.skipped) {
            ++result.report.skipped_iterations;
        } else {
            adam.step(result.params.flat, grad, lr);
        }
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.report.records.push_back(record);
    }
    return result;
}

OptimizeResult optimize_dnsf(const OptimizationConfig& config, const SkinnedBodyModel& body,
                             const ShapeParams& shape, std::span<const Mesh> motion,
                             const std::string& prompt, const ImageEncoder& image_encoder,
                             const TextEncoder& text_encoder, const RenderSettings& settings) {
    config.validate();
    if (motion.empty()) throw std::invalid_argument("optimize: empty motion");

    const int k = std::min<int>(config.frame_top_k, static_cast<int>(motion.size()));
    std::vector<int> frame_indices = sample_content_frames(motion, prompt, image_encoder,
                                                           text_encoder, k, settings,
                                                           config.exec());
    OptimizationScene scene = build_scene(body, shape, motion, frame_indices, prompt,
                                          image_encoder, text_encoder, settings, config);
    OptimizeResult result = optimize_scene(config, scene);
    result.frame_indices = std::move(frame_indices);
    return result;
}

StylizedMotion stylize_motion(const StyleFieldParams& params, const SkinnedBodyModel& body,
                              const ShapeParams& shape, std::span<const Mesh> motion, Exec exec) {
    StylizedMotion out;
    const MatX3 tmpl = shaped_template(body, shape);
    out.style = style_field_forward(params, tmpl, exec);
    out.frames.reserve(motion.size());
    for (const auto& frame : motion) out.frames.push_back(apply_style(frame, out.style, nullptr, exec));
    return out;
}

}  // namespace forge
