// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tfk {

/// Interleaved 8-bit RGB, row-major.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
};

/// Decodes any PNG libpng understands into RGB8; IoError if unreadable.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

/// Bilinear resize with half-pixel centers; identity when sizes match.
Image resize_bilinear(const Image& src, std::size_t height, std::size_t width);

/// 8-bit grayscale PGM (binary P5).
void write_pgm(const std::string& path, std::size_t height, std::size_t width, const std::vector<std::uint8_t>& gray);

}  // namespace tfk
