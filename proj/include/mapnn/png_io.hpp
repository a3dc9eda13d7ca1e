#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mapnn/ct_sim.hpp"

namespace mapnn::io {

/// Single-channel PNG pixels, row-major, widened to 16 bits.
struct GrayImage {
    Index rows = 0;
    Index cols = 0;
    int bit_depth = 16;  // 8 or 16
    std::vector<std::uint16_t> pixels;
};

/// Raw stored value of a 16-bit slice: HU + 1024.
inline constexpr double kHuOffset = 1024.0;

std::string encode_png(const GrayImage& img);
/// Throws FormatError for data that is not a grayscale PNG.
GrayImage decode_png(const std::string& bytes);

void write_png(const std::filesystem::path& path, const GrayImage& img);
/// Throws FileNotFound when the path does not exist.
GrayImage read_png(const std::filesystem::path& path);

/// round(HU + 1024) clamped to [0, 65535].
GrayImage hu_to_png16(const ct::Image& hu);
/// raw - 1024. Throws FormatError unless the image is 16-bit.
ct::Image png16_to_hu(const GrayImage& img);

/// 8-bit display rendering of values in [0, 1]: round(255 x).
GrayImage display_png8(const ct::Image& unit);

}  // namespace mapnn::io
