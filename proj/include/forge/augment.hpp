#pragma once

#include "forge/image.hpp"
#include "forge/rng.hpp"

namespace forge {

// Differentiable resampling warp: a homography maps each output pixel to
// input coordinates, sampled bilinearly with clamp-to-edge, so gradients pass
// through to input pixels. The random parameters are drawn once at
// construction, making forward and backward consistent.
class ImageWarp {
public:
    // Random perspective only: output corners map to input corners jittered by
    // up to `corner_jitter` * side. No crop.
    static ImageWarp global_augment(Rng& rng, int height, int width,
                                    double corner_jitter = 0.15);

    // Random square crop with area fraction in [min_area, 1], resized to the
    // full resolution, then the same perspective jitter.
    static ImageWarp local_augment(Rng& rng, int height, int width, double min_area = 0.1,
                                   double corner_jitter = 0.15);

    static ImageWarp identity(int height, int width);

    // Warps rgb and mask with the same sampling.
    RenderOutput apply(const RenderOutput& input) const;
    Image apply(const Image& input) const;

    // Scatter d(loss)/d(output rgb) back into d(loss)/d(input rgb).
    void backward(const Image& grad_output, Image& grad_input) const;

    // Area fraction of the crop ([min_area, 1]; 1 for global warps).
    double crop_area_fraction() const { return crop_area_; }

private:
    int height_ = 0, width_ = 0;
    Mat3 out_to_in_ = Mat3::Identity();
    double crop_area_ = 1.0;

    Eigen::Vector2d map(double x, double y) const;
};

// Spec-level wrappers: one fresh random warp applied to a rendered view.
RenderOutput augment_global(const RenderOutput& image, Rng& rng);
RenderOutput augment_local(const RenderOutput& image, Rng& rng);

}  // namespace forge
