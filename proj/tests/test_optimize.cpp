#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "forge/fixtures.hpp"
#include "forge/optimize.hpp"

using namespace forge;

namespace {

Embedding unit(int dim, int axis) {
    Embedding e = Embedding::Zero(dim);
    e[axis] = 1.0;
    return e;
}

struct ToyPipeline {
    SkinnedBodyModel body = make_toy_body();
    ToyImageEncoder image_enc{"toy-image", 24, 0};
    ToyTextEncoder text_enc{"toy-text", 24, 0};
    ShapeParams shape;
    std::vector<Mesh> motion;
    RenderSettings settings;
    OptimizationConfig config;

    ToyPipeline() {
        auto motions = make_toy_motions(8);
        std::vector<PoseParams> poses(motions[0].poses.begin(), motions[0].poses.begin() + 4);
        motion = motion_to_meshes(body, poses, shape);
        settings.height = 32;
        settings.width = 32;
        settings.background = Vec3(0, 0, 0);
        config.iterations = 2;
        config.n_views = 2;
        config.frame_top_k = 2;
        config.arch.hidden = {16, 16};
        config.fourier_frequencies = 8;
        config.deterministic = true;
    }
};

}  // namespace

TEST_CASE("mask weighted mean: equal weights give the arithmetic mean") {
    std::vector<Embedding> embeddings{unit(4, 0), unit(4, 1), unit(4, 2)};
    std::vector<double> weights{0.7, 0.7, 0.7};
    const Embedding mean = mask_weighted_mean(embeddings, weights);
    Embedding expected = (embeddings[0] + embeddings[1] + embeddings[2]) / 3.0;
    CHECK((mean - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("mask weighted mean: one-hot weights select a single embedding") {
    std::vector<Embedding> embeddings{unit(4, 0), unit(4, 3)};
    std::vector<double> weights{1.0, 0.0};
    CHECK(mask_weighted_mean(embeddings, weights) == embeddings[0]);
}

TEST_CASE("mask weighted mean: convex combination on basis vectors") {
    std::vector<Embedding> embeddings{unit(4, 0), unit(4, 1)};
    std::vector<double> weights{0.2, 0.8};
    const Embedding mean = mask_weighted_mean(embeddings, weights);
    CHECK(mean[0] == doctest::Approx(0.2));
    CHECK(mean[1] == doctest::Approx(0.8));
    CHECK(mean[2] == 0.0);
}

TEST_CASE("mask weighted mean rejects empty weight sums") {
    std::vector<Embedding> embeddings{unit(4, 0), unit(4, 1)};
    std::vector<double> weights{0.0, 0.0};
    CHECK_THROWS_WITH_AS(mask_weighted_mean(embeddings, weights), doctest::Contains("empty"),
                         std::invalid_argument);
}

TEST_CASE("normalized weights sum to one") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 6);
        std::vector<Embedding> embeddings(n, unit(4, 0));
        std::vector<double> weights(n);
        for (auto& w : weights) w = rng.uniform();
        double total = 0;
        for (double w : weights) total += w;
        if (total <= 1e-8) continue;
        double normalized_sum = 0;
        for (double w : weights) normalized_sum += w / total;
        CHECK(std::abs(normalized_sum - 1.0) < 1e-9);
    }
}

TEST_CASE("semantic loss endpoints and range") {
    const Embedding t = unit(8, 0);
    CHECK(semantic_loss(t, t) == doctest::Approx(0.0));
    CHECK(semantic_loss(Embedding(-t), t) == doctest::Approx(2.0));
    CHECK(semantic_loss(unit(8, 1), t) == doctest::Approx(1.0));

    Rng rng(6);
    for (int trial = 0; trial < 10000; ++trial) {
        Embedding a(8), b(8);
        for (int i = 0; i < 8; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
        }
        const double loss = semantic_loss(a, b);
        CHECK(loss >= 0.0);
        CHECK(loss <= 2.0);
    }
}

TEST_CASE("semantic loss is scale invariant in the text embedding") {
    Rng rng(7);
    Embedding a(16), b(16);
    for (int i = 0; i < 16; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    const double base = semantic_loss(a, b);
    for (double scale : {1e-3, 0.5, 7.0, 1e4})
        CHECK(semantic_loss(a, Embedding(scale * b)) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("semantic loss backward matches finite differences") {
    Rng rng(8);
    Embedding a(12), b(12);
    for (int i = 0; i < 12; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    const Embedding grad = semantic_loss_backward(a, b);
    const double h = 1e-6;
    for (int i = 0; i < 12; ++i) {
        Embedding plus = a, minus = a;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (semantic_loss(plus, b) - semantic_loss(minus, b)) / (2 * h);
        CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("the weighted-mean loss reduces to the plain mean against an oracle") {
    // With full masks (equal weights) the term must equal 1 - cos(mean, t),
    // the unweighted objective, computed here by independent loops.
    Rng rng(9);
    const int n = 5, dim = 16;
    std::vector<Embedding> embeddings;
    for (int j = 0; j < n; ++j) {
        Embedding e(dim);
        for (int i = 0; i < dim; ++i) e[i] = rng.normal();
        embeddings.push_back(e);
    }
    Embedding text(dim);
    for (int i = 0; i < dim; ++i) text[i] = rng.normal();

    const std::vector<double> full(n, 1.0);
    const double loss = semantic_loss(mask_weighted_mean(embeddings, full), text);

    std::vector<double> mean(dim, 0.0);
    for (const auto& e : embeddings)
        for (int i = 0; i < dim; ++i) mean[i] += e[i] / n;
    double dot = 0, nm = 0, nt = 0;
    for (int i = 0; i < dim; ++i) {
        dot += mean[i] * text[i];
        nm += mean[i] * mean[i];
        nt += text[i] * text[i];
    }
    const double oracle = 1.0 - dot / (std::sqrt(nm) * std::sqrt(nt));
    CHECK(loss == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("sample_content_frames trivial cases and oracle") {
    ToyPipeline pipe;
    const std::vector<Mesh> single(pipe.motion.begin(), pipe.motion.begin() + 1);
    CHECK(sample_content_frames(single, "anything", pipe.image_enc, pipe.text_enc, 1,
                                pipe.settings) == std::vector<int>{0});

    const auto all = sample_content_frames(pipe.motion, "a person waving", pipe.image_enc,
                                           pipe.text_enc, static_cast<int>(pipe.motion.size()),
                                           pipe.settings);
    CHECK(all.size() == pipe.motion.size());

    // Brute-force oracle: rescore every frame with the same camera and sort.
    CameraSampleConfig cam_config;
    Vec3 center = Vec3::Zero();
    Eigen::Index total = 0;
    double radius = 0;
    for (const auto& m : pipe.motion) {
        center += m.vertices.colwise().sum().transpose();
        total += m.vertex_count();
    }
    center /= static_cast<double>(total);
    for (const auto& m : pipe.motion)
        for (Eigen::Index v = 0; v < m.vertex_count(); ++v)
            radius = std::max(radius, (m.vertices.row(v).transpose() - center).norm());
    cam_config.look_at = center;
    cam_config.bounding_radius = radius;
    const CameraPose camera = frontal_camera(cam_config);
    const Embedding text = pipe.text_enc.encode("a person waving");
    std::vector<double> scores;
    for (const auto& m : pipe.motion) {
        const RenderOutput view = render_geo(m, camera, pipe.settings);
        scores.push_back(cosine_similarity(pipe.image_enc.encode(view.rgb), text));
    }
    const TopK expected = top_k(scores, static_cast<int>(scores.size()));
    CHECK(all == expected.indices);

    CHECK_THROWS_AS(sample_content_frames(pipe.motion, "x", pipe.image_enc, pipe.text_enc,
                                          static_cast<int>(pipe.motion.size()) + 1,
                                          pipe.settings),
                    std::invalid_argument);
}

TEST_CASE("zero iterations leave the parameters at initialization") {
    ToyPipeline pipe;
    pipe.config.iterations = 0;
    const OptimizeResult result =
        optimize_dnsf(pipe.config, pipe.body, pipe.shape, pipe.motion, "a person waving",
                      pipe.image_enc, pipe.text_enc, pipe.settings);
    CHECK(result.report.records.empty());
    const StyleFieldParams fresh = init_params(pipe.config.arch, pipe.config.param_seed,
                                               pipe.config.fourier_frequencies,
                                               pipe.config.fourier_sigma);
    CHECK(result.params.flat == fresh.flat);
}

TEST_CASE("deterministic runs produce bitwise-identical loss histories") {
    ToyPipeline pipe;
    pipe.config.iterations = 3;
    auto run = [&] {
        return optimize_dnsf(pipe.config, pipe.body, pipe.shape, pipe.motion, "a waving person",
                             pipe.image_enc, pipe.text_enc, pipe.settings);
    };
    const OptimizeResult a = run();
    const OptimizeResult b = run();
    REQUIRE(a.report.records.size() == b.report.records.size());
    for (std::size_t i = 0; i < a.report.records.size(); ++i) {
        CHECK(a.report.records[i].total == b.report.records[i].total);
        CHECK(a.report.records[i].global_term == b.report.records[i].global_term);
        CHECK(a.report.records[i].local_term == b.report.records[i].local_term);
        CHECK(a.report.records[i].geo_term == b.report.records[i].geo_term);
        CHECK(a.report.records[i].lr == b.report.records[i].lr);
    }
    CHECK(a.params.flat == b.params.flat);
}

TEST_CASE("losses decrease over a short deterministic run") {
    ToyPipeline pipe;
    pipe.config.iterations = 30;
    pipe.config.learning_rate = 5e-3;
    const OptimizeResult result =
        optimize_dnsf(pipe.config, pipe.body, pipe.shape, pipe.motion, "a person waving arms",
                      pipe.image_enc, pipe.text_enc, pipe.settings);
    REQUIRE(result.report.records.size() == 30);
    CHECK(result.report.final_total() < result.report.initial_total());
    for (const auto& r : result.report.records) {
        CHECK(std::isfinite(r.total));
        CHECK(r.total == doctest::Approx(r.global_term + r.local_term + r.geo_term));
    }
}

TEST_CASE("an all-empty-view iteration is skipped and counted") {
    ToyPipeline pipe;
    // Adversarial cameras: aim every view at a point far from the body so it
    // covers well under a pixel and every mask weight vanishes.
    const std::vector<int> frames{0, 1};
    OptimizationScene scene =
        build_scene(pipe.body, pipe.shape, pipe.motion, frames, "a distant speck",
                    pipe.image_enc, pipe.text_enc, pipe.settings, pipe.config);
    scene.camera_config.look_at += Vec3(1e4, 0, 0);

    OptimizationConfig config = pipe.config;
    config.iterations = 2;
    const OptimizeResult result = optimize_scene(config, scene);
    CHECK(result.report.skipped_iterations == 2);
    CHECK(result.report.skipped_terms > 0);
    for (const auto& r : result.report.records) CHECK(r.skipped);

    const StyleFieldParams fresh = init_params(config.arch, config.param_seed,
                                               config.fourier_frequencies, config.fourier_sigma);
    CHECK(result.params.flat == fresh.flat);  // no update happened
}

TEST_CASE("stylize_motion shares one style across all frames") {
    ToyPipeline pipe;
    StyleFieldParams params = init_params(pipe.config.arch, 5, pipe.config.fourier_frequencies,
                                          pipe.config.fourier_sigma);
    Rng rng(10);
    for (Eigen::Index i = 0; i < params.flat.size(); ++i) params.flat[i] += 0.1 * rng.normal();

    const StylizedMotion stylized =
        stylize_motion(params, pipe.body, pipe.shape, pipe.motion);
    REQUIRE(stylized.frames.size() == pipe.motion.size());

    // Pose-agnosticism: recomputing the field per frame gives bitwise the
    // same attributes, and every frame carries exactly those colors.
    const MatX3 tmpl = shaped_template(pipe.body, pipe.shape);
    for (std::size_t t = 0; t < stylized.frames.size(); ++t) {
        const StyleAttributes again = style_field_forward(params, tmpl);
        CHECK(again.colors == stylized.style.colors);
        CHECK(again.displacements == stylized.style.displacements);
        CHECK(stylized.frames[t].colors == stylized.style.colors);
    }

    // Frame-wise oracle: apply_style per frame.
    for (std::size_t t = 0; t < pipe.motion.size(); ++t) {
        const Mesh expected = apply_style(pipe.motion[t], stylized.style);
        CHECK(stylized.frames[t].vertices == expected.vertices);
    }
}

TEST_CASE("stylize_motion with a fresh field attaches gray and keeps geometry") {
    ToyPipeline pipe;
    const StyleFieldParams params = init_params(pipe.config.arch, 0,
                                                pipe.config.fourier_frequencies,
                                                pipe.config.fourier_sigma);
    const std::vector<Mesh> single(pipe.motion.begin(), pipe.motion.begin() + 1);
    const StylizedMotion stylized = stylize_motion(params, pipe.body, pipe.shape, single);
    CHECK(stylized.frames[0].vertices == single[0].vertices);  // d = 0
    CHECK((stylized.frames[0].colors.array() == 0.5).all());
}

TEST_CASE("end-to-end gradient matches finite differences on a small scene") {
    ToyPipeline pipe;
    pipe.config.n_views = 2;
    StyleFieldParams params = init_params(pipe.config.arch, 3, pipe.config.fourier_frequencies,
                                          pipe.config.fourier_sigma);
    Rng rng(11);
    for (Eigen::Index i = 0; i < params.flat.size(); ++i) params.flat[i] += 0.05 * rng.normal();

    const std::vector<int> frames{0, 2};
    OptimizationScene scene =
        build_scene(pipe.body, pipe.shape, pipe.motion, frames, "a person waving",
                    pipe.image_enc, pipe.text_enc, pipe.settings, pipe.config);
    scene.template_features = fourier_encode(scene.template_vertices, params.fourier, scene.exec);

    Rng plan_rng(17);
    const IterationPlan plan = plan_iteration(scene, pipe.config, plan_rng);

    Vec grad = Vec::Zero(params.parameter_count());
    const IterationResult base = evaluate_iteration(params, scene, plan, &grad);
    REQUIRE(base.evaluated_terms > 0);

    const double h = 1e-4;
    Rng pick(23);
    int ok = 0, total = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto i = static_cast<Eigen::Index>(pick.next_u64() % params.parameter_count());
        StyleFieldParams plus = params, minus = params;
        plus.flat[i] += h;
        minus.flat[i] -= h;
        const double f_plus = evaluate_iteration(plus, scene, plan, nullptr).total;
        const double f_minus = evaluate_iteration(minus, scene, plan, nullptr).total;
        const double fd = (f_plus - f_minus) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
        if (std::abs(fd - grad[i]) / denom < 1e-3) ++ok;
        ++total;
    }
    CHECK(ok >= total * 9 / 10);
}
