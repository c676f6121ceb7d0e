#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "geobridge/embedding.hpp"

namespace geobridge {

/// GBEM embedding file, little-endian throughout:
///   "GBEM" | version u8 (=1) | view tag u8 | count u64 | D u32 |
///   count x (id u64 | D x binary32)
inline constexpr std::uint8_t kGbemVersion = 1;
inline constexpr std::size_t kGbemHeaderSize = 4 + 1 + 1 + 8 + 4;

/// Values are narrowed to binary32 on write.
std::vector<std::uint8_t> encode_gbem(const EmbeddingBatch& batch);

/// Throws FormatError naming the offending field or record on bad magic,
/// unknown version or view, truncation, trailing bytes, duplicate ids, or
/// rows that are not unit-norm.
EmbeddingBatch decode_gbem(std::span<const std::uint8_t> bytes);

void write_gbem(const std::filesystem::path& path, const EmbeddingBatch& batch);
EmbeddingBatch read_gbem(const std::filesystem::path& path);

}  // namespace geobridge
