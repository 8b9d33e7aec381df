#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nighttrack/errors.hpp"
#include "nighttrack/tensor.hpp"

namespace nighttrack {

// RGB image, values in [0,1], interleaved row-major. Pixel values written to
// disk are 8-bit, so generated frames are quantized to the k/255 grid up
// front to make file round trips exact.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;  // size 3*width*height

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(3 * w * h), 0.0) {}

    double& at(int x, int y, int c) { return rgb[static_cast<size_t>((y * width + x) * 3 + c)]; }
    double at(int x, int y, int c) const { return rgb[static_cast<size_t>((y * width + x) * 3 + c)]; }

    std::array<double, 3> channel_means() const;
};

// Snap every value to the 8-bit grid (round(v*255)/255, clipped).
void quantize8(Image& img);

// Binary PPM (P6), 8-bit.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

// {3,H,W} channel-first tensor for model input.
Tensor to_tensor(const Image& img);

}  // namespace nighttrack
