#include "vrstc/png_io.hpp"

#include <png.h>

#include <cstring>

#include "vrstc/error.hpp"

namespace vrstc {

Image8 make_image(int height, int width) {
    Image8 image;
    image.height = height;
    image.width = width;
    image.data.assign(static_cast<std::size_t>(height) * width * 3, 0);
    return image;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.data.data(), 0, nullptr)) {
        std::string message = png.message;
        png_image_free(&png);
        throw Error(ErrorKind::io, "cannot write " + path.string() + ": " + message);
    }
}

Image8 read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw Error(ErrorKind::io, "cannot read " + path.string() + ": " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    Image8 image = make_image(static_cast<int>(png.height), static_cast<int>(png.width));
    if (!png_image_finish_read(&png, nullptr, image.data.data(), 0, nullptr)) {
        std::string message = png.message;
        png_image_free(&png);
        throw Error(ErrorKind::io, "cannot decode " + path.string() + ": " + message);
    }
    return image;
}

torch::Tensor image_to_tensor(const Image8& image) {
    auto bytes = torch::from_blob(const_cast<std::uint8_t*>(image.data.data()),
                                  {image.height, image.width, 3}, torch::kUInt8);
    return bytes.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

Image8 tensor_to_image(const torch::Tensor& pixels) {
    if (pixels.dim() != 3 || pixels.size(0) != 3) {
        throw Error(ErrorKind::shape, "expected a (3,H,W) tensor");
    }
    auto bytes = pixels.detach()
                     .to(torch::kFloat32)
                     .add(1.0)
                     .mul(127.5)
                     .round()
                     .clamp(0, 255)
                     .to(torch::kUInt8)
                     .permute({1, 2, 0})
                     .contiguous();
    Image8 image = make_image(static_cast<int>(pixels.size(1)), static_cast<int>(pixels.size(2)));
    std::memcpy(image.data.data(), bytes.data_ptr<std::uint8_t>(), image.data.size());
    return image;
}

} // namespace vrstc
