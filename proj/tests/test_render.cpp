#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "forge/render.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

RenderSettings small_settings() {
    RenderSettings s;
    s.height = 32;
    s.width = 32;
    s.background = Vec3(0, 0, 0);
    return s;
}

// Two-triangle square of side 1 in the z=0 plane, facing +z, uniform color.
Mesh make_quad(const Vec3& color) {
    Mesh m;
    m.vertices.resize(4, 3);
    m.vertices << -0.5, -0.5, 0, 0.5, -0.5, 0, 0.5, 0.5, 0, -0.5, 0.5, 0;
    m.faces.resize(2, 3);
    m.faces << 0, 1, 2, 0, 2, 3;
    m.colors = MatX3(4, 3);
    for (int v = 0; v < 4; ++v) m.colors.row(v) = color;
    return m;
}

CameraPose frontal_at(double radius, const Vec3& look_at = Vec3::Zero()) {
    CameraPose pose;
    pose.radius = radius;
    pose.look_at = look_at;
    return pose;
}

// Random fixture with <= 20 triangles for the gradient contracts.
Mesh gradient_fixture(Rng& rng) {
    Mesh m;
    const int tris = 6;
    m.vertices.resize(tris * 3, 3);
    m.faces.resize(tris, 3);
    m.colors.resize(tris * 3, 3);
    for (int t = 0; t < tris; ++t) {
        const Vec3 center(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3));
        for (int k = 0; k < 3; ++k) {
            const int v = t * 3 + k;
            m.vertices.row(v) = center + 0.35 * Vec3(rng.normal(), rng.normal(), rng.normal());
            for (int c = 0; c < 3; ++c) m.colors(v, c) = rng.uniform(0.2, 0.9);
            m.faces(t, k) = v;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("camera sampling is reproducible and bounded") {
    CameraSampleConfig config;
    Rng rng_a(42), rng_b(42);
    const auto poses_a = sample_camera_poses(5, rng_a, config);
    const auto poses_b = sample_camera_poses(5, rng_b, config);
    REQUIRE(poses_a.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(poses_a[i].azimuth == poses_b[i].azimuth);
        CHECK(poses_a[i].elevation == poses_b[i].elevation);
        CHECK(poses_a[i].radius == doctest::Approx(2.2));
    }
    // Distinct azimuths across draws.
    CHECK(poses_a[0].azimuth != poses_a[1].azimuth);

    Rng rng_c(7);
    for (int i = 0; i < 10000; ++i) {
        const auto pose = sample_camera_poses(1, rng_c, config)[0];
        CHECK(pose.elevation >= config.elevation_min);
        CHECK(pose.elevation <= config.elevation_max);
        CHECK(pose.azimuth >= 0.0);
        CHECK(pose.azimuth < 2.0 * M_PI);
    }
}

TEST_CASE("mesh behind the camera renders empty") {
    Mesh quad = make_quad(Vec3(1, 0, 0));
    const RenderSettings settings = small_settings();
    CameraPose pose = frontal_at(3.0);
    pose.look_at = Vec3(0, 0, 6.0);  // camera at z=9 looking at z=6: quad at z=0 is behind it
    quad.vertices.col(2).array() += 12.0;  // move quad behind the camera
    const RenderOutput out = render(quad, pose, settings);
    for (double m : out.mask) CHECK(m == 0.0);
    for (int y = 0; y < settings.height; ++y)
        for (int x = 0; x < settings.width; ++x)
            for (int c = 0; c < 3; ++c) CHECK(out.rgb.at(y, x, c) == settings.background[c]);
}

TEST_CASE("frontal red triangle covers the analytically projected pixels") {
    Mesh tri;
    tri.vertices.resize(3, 3);
    tri.vertices << -0.5, -0.5, 0, 0.5, -0.5, 0, -0.5, 0.5, 0;  // faces +z
    tri.faces.resize(1, 3);
    tri.faces << 0, 1, 2;
    tri.colors = MatX3(3, 3);
    for (int v = 0; v < 3; ++v) tri.colors.row(v) << 1, 0, 0;

    RenderSettings settings = small_settings();
    const double radius = 2.0;
    const CameraPose pose = frontal_at(radius);
    const RenderOutput out = render(tri, pose, settings);

    // Hand projection: camera at (0,0,2) looking down -z, focal in pixels
    // from the vertical fov, pixel = (cx + f*x/z, cy - f*y/z).
    const double focal = 0.5 * settings.height / std::tan(0.5 * pose.fov);
    const double cx = settings.width / 2.0, cy = settings.height / 2.0;
    Eigen::Vector2d proj[3];
    for (int v = 0; v < 3; ++v)
        proj[v] = {cx + focal * tri.vertices(v, 0) / radius,
                   cy - focal * tri.vertices(v, 1) / radius};
    auto edge_distance = [&](const Eigen::Vector2d& p) {
        double worst = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector2d u = proj[k], v = proj[(k + 1) % 3];
            const Eigen::Vector2d n(v.y() - u.y(), u.x() - v.x());
            worst = std::min(worst, (p - u).dot(n) / n.norm());
        }
        return worst;  // positive inside (clockwise in pixel coords)
    };

    int inside_checked = 0, outside_checked = 0;
    for (int y = 0; y < settings.height; ++y)
        for (int x = 0; x < settings.width; ++x) {
            const double sd = edge_distance({x + 0.5, y + 0.5});
            if (sd > 1.5) {
                // Face normal +z toward the headlight: full shading, pure red.
                CHECK(out.rgb.at(y, x, 0) == doctest::Approx(1.0).epsilon(1e-6));
                CHECK(out.rgb.at(y, x, 1) == doctest::Approx(0.0));
                CHECK(out.mask[y * settings.width + x] == doctest::Approx(1.0).epsilon(1e-6));
                ++inside_checked;
            } else if (sd < -1.5) {
                CHECK(out.rgb.at(y, x, 0) == 0.0);
                CHECK(out.mask[y * settings.width + x] < 0.5);
                ++outside_checked;
            }
        }
    CHECK(inside_checked > 20);
    CHECK(outside_checked > 300);
}

TEST_CASE("render_geo equals render with gray colors and the same mask") {
    Rng rng(3);
    const Mesh fixture = gradient_fixture(rng);
    Mesh gray = fixture;
    gray.colors.setConstant(0.5);
    const RenderSettings settings = small_settings();
    const CameraPose pose = frontal_at(4.0);

    const RenderOutput geo = render_geo(fixture, pose, settings);
    const RenderOutput explicit_gray = render(gray, pose, settings);
    CHECK(geo.rgb.data == explicit_gray.rgb.data);
    CHECK(geo.mask == explicit_gray.mask);

    const RenderOutput colored = render(fixture, pose, settings);
    CHECK(colored.mask == geo.mask);
}

TEST_CASE("rendering is deterministic and parallel matches serial bitwise") {
    Rng rng(5);
    const Mesh fixture = gradient_fixture(rng);
    const RenderSettings settings = small_settings();
    const CameraPose pose = frontal_at(4.0);
    const RenderOutput a = render(fixture, pose, settings, Exec::parallel);
    const RenderOutput b = render(fixture, pose, settings, Exec::parallel);
    const RenderOutput c = render(fixture, pose, settings, Exec::serial);
    CHECK(a.rgb.data == b.rgb.data);
    CHECK(a.rgb.data == c.rgb.data);
    CHECK(a.mask == c.mask);
}

TEST_CASE("camera inside the bounding sphere is rejected") {
    const Mesh quad = make_quad(Vec3(1, 1, 1));
    CHECK_THROWS_WITH_AS(render(quad, frontal_at(0.2), small_settings()),
                         doctest::Contains("bounding sphere"), std::invalid_argument);
}

TEST_CASE("color gradients match finite differences") {
    Rng rng(17);
    Mesh fixture = gradient_fixture(rng);
    const RenderSettings settings = small_settings();
    const CameraPose pose = frontal_at(4.0);

    // Objective: random projection of the image.
    Image proj(settings.height, settings.width);
    for (auto& v : proj.data) v = rng.normal();
    auto objective = [&](const Mesh& m) {
        const RenderOutput out = render(m, pose, settings, Exec::serial);
        double sum = 0;
        for (std::size_t i = 0; i < out.rgb.data.size(); ++i) sum += out.rgb.data[i] * proj.data[i];
        return sum;
    };

    const RenderGrad grad = render_backward(fixture, pose, settings, proj);

    const double h = 1e-4;
    int ok = 0, total = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const auto v = static_cast<Eigen::Index>(rng.next_u64() % fixture.vertex_count());
        const int c = static_cast<int>(rng.next_u64() % 3);
        Mesh plus = fixture, minus = fixture;
        plus.colors(v, c) += h;
        minus.colors(v, c) -= h;
        const double fd = (objective(plus) - objective(minus)) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad.colors(v, c)), 1e-8});
        if (std::abs(fd - grad.colors(v, c)) / denom < 1e-3) ++ok;
        ++total;
    }
    CHECK(ok >= total * 95 / 100);
}

TEST_CASE("vertex position gradients match finite differences") {
    Rng rng(29);
    Mesh fixture = gradient_fixture(rng);
    const RenderSettings settings = small_settings();
    const CameraPose pose = frontal_at(4.0);

    Image proj(settings.height, settings.width);
    for (auto& v : proj.data) v = rng.normal();
    auto objective = [&](const Mesh& m) {
        const RenderOutput out = render(m, pose, settings, Exec::serial);
        double sum = 0;
        for (std::size_t i = 0; i < out.rgb.data.size(); ++i) sum += out.rgb.data[i] * proj.data[i];
        return sum;
    };

    const RenderGrad grad = render_backward(fixture, pose, settings, proj);

    const double h = 1e-5;
    int ok = 0, total = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const auto v = static_cast<Eigen::Index>(rng.next_u64() % fixture.vertex_count());
        const int c = static_cast<int>(rng.next_u64() % 3);
        Mesh plus = fixture, minus = fixture;
        plus.vertices(v, c) += h;
        minus.vertices(v, c) -= h;
        const double fd = (objective(plus) - objective(minus)) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad.vertices(v, c)), 1e-6});
        if (std::abs(fd - grad.vertices(v, c)) / denom < 2e-3) ++ok;
        ++total;
    }
    CHECK(ok >= total * 95 / 100);
}

TEST_CASE("pixels beyond the soft band receive no gradient") {
    const Mesh quad = make_quad(Vec3(0.8, 0.2, 0.2));
    RenderSettings settings = small_settings();
    const CameraPose pose = frontal_at(2.0);
    const RenderOutput out = render(quad, pose, settings);

    // Gradient concentrated on a far-corner pixel where the mask is exactly 0.
    REQUIRE(out.mask[0] == 0.0);
    Image grad_rgb(settings.height, settings.width);
    grad_rgb.at(0, 0, 0) = 1.0;
    const RenderGrad grad = render_backward(quad, pose, settings, grad_rgb);
    CHECK(grad.vertices.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.colors.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("foreground ratio counts thresholded pixels") {
    RenderOutput view;
    view.rgb = Image(16, 16);
    view.mask.assign(256, 1.0);
    CHECK(foreground_ratio(view) == 1.0);
    view.mask.assign(256, 0.0);
    CHECK(foreground_ratio(view) == 0.0);
    for (int i = 0; i < 128; ++i) view.mask[i] = 0.9;
    CHECK(foreground_ratio(view) == 0.5);

    // rgb content is irrelevant
    for (auto& v : view.rgb.data) v = 0.123;
    CHECK(foreground_ratio(view) == 0.5);
}
