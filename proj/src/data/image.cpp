// SPDX-License-Identifier: Apache-2.0
#include "data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/error.hpp"

namespace tfk {

Image read_png(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw IoError("cannot read image '" + path + "': " + png.message);
    }
    png.format = PNG_FORMAT_RGB;
    Image img;
    img.height = png.height;
    img.width = png.width;
    img.pixels.resize(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode image '" + path + "': " + msg);
    }
    return img;
}

void write_png(const std::string& path, const Image& image) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
        throw IoError("cannot write image '" + path + "': " + png.message);
    }
}

Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
    if (src.height == height && src.width == width) return src;
    if (src.height == 0 || src.width == 0) throw DataError("cannot resize an empty image");
    Image out;
    out.height = height;
    out.width = width;
    out.pixels.resize(height * width * 3);
    const double sy = double(src.height) / double(height);
    const double sx = double(src.width) / double(width);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((double(y) + 0.5) * sy - 0.5, 0.0, double(src.height - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - double(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((double(x) + 0.5) * sx - 0.5, 0.0, double(src.width - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - double(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = (1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
                const double bot = (1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
                out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp((1 - wy) * top + wy * bot, 0.0, 255.0)));
            }
        }
    }
    return out;
}

void write_pgm(const std::string& path, std::size_t height, std::size_t width, const std::vector<std::uint8_t>& gray) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace tfk
