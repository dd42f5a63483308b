#pragma once

#include "vpcd/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vpcd::io {

/// [0, 1] -> 8-bit with round-half-even; values are clamped first.
std::uint8_t to_byte(double v);
double from_byte(std::uint8_t b);

/// Writes an 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

/// Encodes a binary mask as alternating run lengths, starting with zeros,
/// in row-major order.
std::vector<int> encode_rle(const Plane& mask);
Plane decode_rle(const std::vector<int>& runs, int height, int width);

/// Hex CRC-32 of a file's bytes.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace vpcd::io
