#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "forge/mesh.hpp"
#include "forge/rng.hpp"
#include "forge/style_field.hpp"

using namespace forge;

namespace {

StyleFieldArch small_arch() {
    StyleFieldArch arch;
    arch.hidden = {32, 32};
    return arch;
}

MatX3 random_vertices(int n, Rng& rng) {
    MatX3 verts(n, 3);
    for (Eigen::Index i = 0; i < verts.size(); ++i) verts.data()[i] = rng.normal();
    return verts;
}

}  // namespace

TEST_CASE("fourier encoding of the origin") {
    const auto map = FourierFeatureMap::create(16, 5.0, 0);
    MatX3 verts = MatX3::Zero(1, 3);
    const MatX features = fourier_encode(verts, map);
    REQUIRE(features.cols() == 32);
    for (int l = 0; l < 16; ++l) {
        CHECK(features(0, l) == 0.0);        // sin 0
        CHECK(features(0, 16 + l) == 1.0);   // cos 0
    }
}

TEST_CASE("fourier features are bounded") {
    const auto map = FourierFeatureMap::create(64, 5.0, 1);
    Rng rng(2);
    const MatX features = fourier_encode(random_vertices(50, rng), map);
    CHECK(features.maxCoeff() <= 1.0);
    CHECK(features.minCoeff() >= -1.0);
}

TEST_CASE("fourier quarter period") {
    FourierFeatureMap map;
    map.sigma = 1.0;
    map.frequencies.resize(1, 3);
    map.frequencies << 0.25, 0, 0;  // b.v = 0.25 at v = (1,0,0)
    MatX3 verts(1, 3);
    verts << 1, 0, 0;
    const MatX features = fourier_encode(verts, map);
    CHECK(features(0, 0) == doctest::Approx(1.0).epsilon(1e-12));   // sin(pi/2)
    CHECK(std::abs(features(0, 1)) < 1e-12);                        // cos(pi/2)
}

TEST_CASE("fresh field outputs gray and zero displacement") {
    Rng rng(7);
    const MatX3 verts = random_vertices(20, rng);
    const StyleFieldParams params = init_params(small_arch(), 3, 16, 5.0);
    const StyleAttributes style = style_field_forward(params, verts);
    CHECK((style.colors.array() == 0.5).all());
    CHECK((style.displacements.array() == 0.0).all());
}

TEST_CASE("style bounds hold for random parameters") {
    Rng rng(11);
    const MatX3 verts = random_vertices(40, rng);
    for (int trial = 0; trial < 50; ++trial) {
        StyleFieldParams params = init_params(small_arch(), trial, 16, 5.0);
        for (Eigen::Index i = 0; i < params.flat.size(); ++i) params.flat[i] += 3.0 * rng.normal();
        const StyleAttributes style = style_field_forward(params, verts);
        CHECK(style.colors.minCoeff() >= 0.0);
        CHECK(style.colors.maxCoeff() <= 1.0);
        CHECK(style.displacements.cwiseAbs().maxCoeff() <= 0.1);
    }
}

TEST_CASE("forward is deterministic and pose-agnostic") {
    Rng rng(5);
    const MatX3 verts = random_vertices(30, rng);
    StyleFieldParams params = init_params(small_arch(), 9, 16, 5.0);
    for (Eigen::Index i = 0; i < params.flat.size(); ++i) params.flat[i] += 0.5 * rng.normal();

    const StyleAttributes a = style_field_forward(params, verts);
    const StyleAttributes b = style_field_forward(params, verts);
    CHECK(a.colors == b.colors);  // bitwise
    CHECK(a.displacements == b.displacements);

    const StyleAttributes c = style_field_forward(params, verts, Exec::serial);
    CHECK(a.colors == c.colors);
    CHECK(a.displacements == c.displacements);
}

TEST_CASE("apply_style with zero displacement is the identity on geometry") {
    const Mesh sphere = make_icosphere(1);
    StyleAttributes style;
    style.colors = MatX3::Constant(sphere.vertex_count(), 3, 0.25);
    style.displacements = Vec::Zero(sphere.vertex_count());
    const Mesh out = apply_style(sphere, style);
    CHECK(out.vertices == sphere.vertices);
    CHECK(out.has_colors());
}

TEST_CASE("uniform displacement inflates the icosphere") {
    const Mesh sphere = make_icosphere(3);
    StyleAttributes style;
    style.colors = MatX3::Constant(sphere.vertex_count(), 3, 0.5);
    style.displacements = Vec::Constant(sphere.vertex_count(), 0.1);
    const Mesh out = apply_style(sphere, style);
    for (Eigen::Index v = 0; v < out.vertex_count(); ++v)
        CHECK(out.vertices.row(v).norm() == doctest::Approx(1.1).epsilon(1e-3));
}

TEST_CASE("apply_style matches a frame-wise manual oracle") {
    Rng rng(13);
    const Mesh frame_a = make_icosphere(1);
    Mesh frame_b = frame_a;
    for (Eigen::Index i = 0; i < frame_b.vertices.size(); ++i)
        frame_b.vertices.data()[i] += 0.1 * rng.normal();

    StyleAttributes style;
    style.colors = MatX3::Constant(frame_a.vertex_count(), 3, 0.5);
    style.displacements.resize(frame_a.vertex_count());
    for (Eigen::Index v = 0; v < style.displacements.size(); ++v)
        style.displacements[v] = 0.05 * rng.uniform();

    for (const Mesh& frame : {frame_a, frame_b}) {
        const Mesh styled = apply_style(frame, style);
        const MatX3 normals = vertex_normals(frame);
        for (Eigen::Index v = 0; v < frame.vertex_count(); ++v) {
            const Vec3 expected =
                Vec3(frame.vertices.row(v)) + style.displacements[v] * Vec3(normals.row(v));
            CHECK((Vec3(styled.vertices.row(v)) - expected).norm() < 1e-12);
        }
    }
}

TEST_CASE("apply_style rejects vertex count mismatches") {
    const Mesh sphere = make_icosphere(1);
    StyleAttributes style;
    style.colors = MatX3::Constant(7, 3, 0.5);
    style.displacements = Vec::Zero(7);
    CHECK_THROWS_AS(apply_style(sphere, style), std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(23);
    const MatX3 verts = random_vertices(12, rng);  // small fixture
    StyleFieldParams params = init_params(small_arch(), 2, 8, 3.0);
    for (Eigen::Index i = 0; i < params.flat.size(); ++i) params.flat[i] += 0.3 * rng.normal();

    // Scalar objective: random projection of the outputs.
    MatX3 proj_c(12, 3);
    Vec proj_d(12);
    for (Eigen::Index i = 0; i < proj_c.size(); ++i) proj_c.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < proj_d.size(); ++i) proj_d[i] = rng.normal();
    auto objective = [&](const StyleFieldParams& p) {
        const StyleAttributes s = style_field_forward(p, verts);
        return (s.colors.cwiseProduct(proj_c)).sum() + s.displacements.dot(proj_d);
    };

    StyleFieldCache cache;
    style_field_forward(params, verts, Exec::parallel, &cache);
    Vec grad = Vec::Zero(params.parameter_count());
    style_field_backward(params, cache, proj_c, proj_d, grad);

    Rng pick(31);
    int ok = 0, total = 0;
    const double h = 1e-4;
    for (int trial = 0; trial < 40; ++trial) {
        const auto i = static_cast<Eigen::Index>(pick.next_u64() % params.parameter_count());
        StyleFieldParams plus = params, minus = params;
        plus.flat[i] += h;
        minus.flat[i] -= h;
        const double fd = (objective(plus) - objective(minus)) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
        if (std::abs(fd - grad[i]) / denom < 1e-3) ++ok;
        ++total;
    }
    CHECK(ok >= total * 95 / 100);
}

TEST_CASE("checkpoint round trip restores architecture and parameters") {
    const auto dir = std::filesystem::temp_directory_path() / "forge_tests" / "ckpt";
    std::filesystem::create_directories(dir);
    Rng rng(3);
    StyleFieldParams params = init_params(small_arch(), 77, 16, 4.0);
    for (Eigen::Index i = 0; i < params.flat.size(); ++i) params.flat[i] += 0.2 * rng.normal();

    const auto path = dir / "field.fsf";
    save_checkpoint(path, params, 42);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.vertex_count == 42);
    CHECK(loaded.params.arch.hidden == params.arch.hidden);
    CHECK(loaded.params.fourier.frequencies == params.fourier.frequencies);
    CHECK(loaded.params.parameter_count() == params.parameter_count());
    // Parameters survive at float32 precision.
    for (Eigen::Index i = 0; i < params.flat.size(); ++i)
        CHECK(loaded.params.flat[i] == static_cast<double>(static_cast<float>(params.flat[i])));

    const MatX3 verts = random_vertices(10, rng);
    const StyleAttributes a = style_field_forward(params, verts);
    const StyleAttributes b = style_field_forward(loaded.params, verts);
    CHECK((a.colors - b.colors).cwiseAbs().maxCoeff() < 1e-5);
}
