#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "geobridge/raster.hpp"

namespace geobridge {

/// Decodes a PNG or JPEG byte stream (sniffed from the signature). Alpha is
/// composited onto black; 16-bit PNG samples are reduced to 8 bits.
/// Throws DecodeError on anything else or on a malformed stream.
RgbImage decode_image(std::span<const std::uint8_t> bytes);

/// Lossless 8-bit RGB PNG encoding.
std::vector<std::uint8_t> encode_png(const RgbImage& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

RgbImage load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const RgbImage& img);

}  // namespace geobridge
