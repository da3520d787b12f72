#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/types.h>

namespace vrstc {

// 8-bit RGB image, row-major, channels interleaved.
struct Image8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::uint8_t at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

Image8 make_image(int height, int width);

void write_png(const std::filesystem::path& path, const Image8& image);
Image8 read_png(const std::filesystem::path& path);

// uint8 [0,255] <-> float (3,H,W) in [-1,1]. The round trip is exact.
torch::Tensor image_to_tensor(const Image8& image);
Image8 tensor_to_image(const torch::Tensor& pixels);

} // namespace vrstc
