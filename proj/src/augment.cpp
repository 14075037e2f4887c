#include "forge/augment.hpp"

#include <cmath>

namespace forge {

namespace {

// Homography sending the four (x, y) source points to the four targets,
// solved by the direct linear transform with h22 fixed at 1.
Mat3 homography_from_points(const Eigen::Vector2d src[4], const Eigen::Vector2d dst[4]) {
    Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double x = src[i].x(), y = src[i].y();
        const double u = dst[i].x(), v = dst[i].y();
        a.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
        b(2 * i) = u;
        a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
        b(2 * i + 1) = v;
    }
    const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
    Mat3 m;
    m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
    return m;
}

struct BilinearSample {
    int x0, y0, x1, y1;
    double wx, wy;  // weight of the x1 / y1 side
};

BilinearSample clamp_sample(double x, double y, int width, int height) {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    BilinearSample s;
    s.x0 = static_cast<int>(std::floor(x));
    s.y0 = static_cast<int>(std::floor(y));
    s.x1 = std::min(s.x0 + 1, width - 1);
    s.y1 = std::min(s.y0 + 1, height - 1);
    s.wx = x - s.x0;
    s.wy = y - s.y0;
    return s;
}

}  // namespace

ImageWarp ImageWarp::identity(int height, int width) {
    ImageWarp warp;
    warp.height_ = height;
    warp.width_ = width;
    return warp;
}

ImageWarp ImageWarp::global_augment(Rng& rng, int height, int width, double corner_jitter) {
    ImageWarp warp;
    warp.height_ = height;
    warp.width_ = width;

    const double side = std::max(height, width);
    const Eigen::Vector2d out_corners[4] = {
        {0.0, 0.0}, {width - 1.0, 0.0}, {width - 1.0, height - 1.0}, {0.0, height - 1.0}};
    Eigen::Vector2d in_corners[4];
    for (int i = 0; i < 4; ++i) {
        const double dx = rng.uniform(-corner_jitter, corner_jitter) * side;
        const double dy = rng.uniform(-corner_jitter, corner_jitter) * side;
        in_corners[i] = out_corners[i] + Eigen::Vector2d(dx, dy);
    }
    warp.out_to_in_ = homography_from_points(out_corners, in_corners);
    return warp;
}

ImageWarp ImageWarp::local_augment(Rng& rng, int height, int width, double min_area,
                                   double corner_jitter) {
    ImageWarp warp;
    warp.height_ = height;
    warp.width_ = width;

    // Square crop: side fraction = sqrt(area fraction).
    const double area = rng.uniform(min_area, 1.0);
    const double frac = std::sqrt(area);
    const double cw = frac * (width - 1);
    const double ch = frac * (height - 1);
    const double ox = rng.uniform(0.0, (width - 1) - cw);
    const double oy = rng.uniform(0.0, (height - 1) - ch);
    warp.crop_area_ = area;

    const Eigen::Vector2d out_corners[4] = {
        {0.0, 0.0}, {width - 1.0, 0.0}, {width - 1.0, height - 1.0}, {0.0, height - 1.0}};
    const Eigen::Vector2d crop_corners[4] = {
        {ox, oy}, {ox + cw, oy}, {ox + cw, oy + ch}, {ox, oy + ch}};
    const Mat3 crop = homography_from_points(out_corners, crop_corners);

    const double side = std::max(height, width);
    Eigen::Vector2d warped_corners[4];
    for (int i = 0; i < 4; ++i) {
        const double dx = rng.uniform(-corner_jitter, corner_jitter) * side;
        const double dy = rng.uniform(-corner_jitter, corner_jitter) * side;
        warped_corners[i] = out_corners[i] + Eigen::Vector2d(dx, dy);
    }
    const Mat3 perspective = homography_from_points(out_corners, warped_corners);

    // Output -> perspective-jittered -> crop rectangle of the input.
    warp.out_to_in_ = crop * perspective;
    return warp;
}

Eigen::Vector2d ImageWarp::map(double x, double y) const {
    const Vec3 h = out_to_in_ * Vec3(x, y, 1.0);
    return {h.x() / h.z(), h.y() / h.z()};
}

Image ImageWarp::apply(const Image& input) const {
    if (input.height != height_ || input.width != width_)
        throw std::invalid_argument("ImageWarp: image size does not match warp");
    Image out(height_, width_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const auto q = map(x, y);
            const auto s = clamp_sample(q.x(), q.y(), width_, height_);
            for (int c = 0; c < 3; ++c) {
                const double v00 = input.at(s.y0, s.x0, c), v01 = input.at(s.y0, s.x1, c);
                const double v10 = input.at(s.y1, s.x0, c), v11 = input.at(s.y1, s.x1, c);
                out.at(y, x, c) = (1 - s.wy) * ((1 - s.wx) * v00 + s.wx * v01) +
                                  s.wy * ((1 - s.wx) * v10 + s.wx * v11);
            }
        }
    return out;
}

RenderOutput ImageWarp::apply(const RenderOutput& input) const {
    RenderOutput out;
    out.rgb = apply(input.rgb);
    out.mask.assign(static_cast<std::size_t>(height_) * width_, 0.0);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const auto q = map(x, y);
            const auto s = clamp_sample(q.x(), q.y(), width_, height_);
            auto m = [&](int yy, int xx) { return input.mask[static_cast<std::size_t>(yy) * width_ + xx]; };
            out.mask[static_cast<std::size_t>(y) * width_ + x] =
                (1 - s.wy) * ((1 - s.wx) * m(s.y0, s.x0) + s.wx * m(s.y0, s.x1)) +
                s.wy * ((1 - s.wx) * m(s.y1, s.x0) + s.wx * m(s.y1, s.x1));
        }
    return out;
}

void ImageWarp::backward(const Image& grad_output, Image& grad_input) const {
    if (grad_output.height != height_ || grad_output.width != width_)
        throw std::invalid_argument("ImageWarp backward: gradient size mismatch");
    if (grad_input.height != height_ || grad_input.width != width_)
        grad_input = Image(height_, width_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
            const auto q = map(x, y);
            const auto s = clamp_sample(q.x(), q.y(), width_, height_);
            for (int c = 0; c < 3; ++c) {
                const double g = grad_output.at(y, x, c);
                if (g == 0.0) continue;
                grad_input.at(s.y0, s.x0, c) += (1 - s.wy) * (1 - s.wx) * g;
                grad_input.at(s.y0, s.x1, c) += (1 - s.wy) * s.wx * g;
                grad_input.at(s.y1, s.x0, c) += s.wy * (1 - s.wx) * g;
                grad_input.at(s.y1, s.x1, c) += s.wy * s.wx * g;
            }
        }
}

RenderOutput augment_global(const RenderOutput& image, Rng& rng) {
    return ImageWarp::global_augment(rng, image.height(), image.width()).apply(image);
}

RenderOutput augment_local(const RenderOutput& image, Rng& rng) {
    return ImageWarp::local_augment(rng, image.height(), image.width()).apply(image);
}

}  // namespace forge
