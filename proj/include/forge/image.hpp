#pragma once

#include <filesystem>
#include <vector>

#include "forge/common.hpp"

namespace forge {

// Dense RGB image, values nominally in [0,1], row-major, row 0 at the top.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> data;  // height * width * 3

    Image() = default;
    Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0.0) {}

    static Image constant(int h, int w, const Vec3& color) {
        Image img(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
        return img;
    }

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

// Rendered view: RGB plus soft foreground coverage in [0,1].
struct RenderOutput {
    Image rgb;
    std::vector<double> mask;  // height * width

    int height() const { return rgb.height; }
    int width() const { return rgb.width; }
    double mask_at(int y, int x) const { return mask[static_cast<std::size_t>(y) * rgb.width + x]; }
};

// 8-bit RGB PNG via zlib.
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace forge
