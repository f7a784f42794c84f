#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatcap/tensor.hpp"

namespace splatcap {

// 8-bit interleaved image (RGB or grayscale)
struct Image8 {
    int width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int y, int x, int c) const {
        return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
};

void write_png(const Image8& img, const std::string& path);
Image8 read_png(const std::string& path);

// [0,1] float image {H,W,C} -> 8-bit with round-to-nearest
Image8 quantize_to_8bit(const Tensor& img);
// 8-bit -> float {H,W,C} in [0,1]
Tensor to_float(const Image8& img);

}  // namespace splatcap
