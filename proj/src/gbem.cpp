#include "geobridge/gbem.hpp"

#include <bit>
#include <cstring>
#include <string>
#include <unordered_set>

#include "geobridge/error.hpp"
#include "geobridge/image_io.hpp"

namespace geobridge {
namespace {

constexpr char kMagic[4] = {'G', 'B', 'E', 'M'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_gbem(const EmbeddingBatch& batch) {
  const auto d = static_cast<std::uint32_t>(batch.dim());
  std::vector<std::uint8_t> out;
  out.reserve(kGbemHeaderSize + batch.size() * (8 + 4 * static_cast<std::size_t>(d)));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kGbemVersion);
  out.push_back(static_cast<std::uint8_t>(batch.view()));
  put_le<std::uint64_t>(out, batch.size());
  put_le<std::uint32_t>(out, d);
  const auto& m = batch.matrix();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    put_le<std::uint64_t>(out, batch.ids()[i]);
    for (std::uint32_t j = 0; j < d; ++j) {
      const auto f = static_cast<float>(m(static_cast<Eigen::Index>(i), j));
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

EmbeddingBatch decode_gbem(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kGbemHeaderSize) {
    throw Error(Errc::FormatError, "GBEM header truncated (" + std::to_string(bytes.size()) +
                                       " bytes)");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::FormatError, "bad magic: expected \"GBEM\"");
  }
  if (bytes[4] != kGbemVersion) {
    throw Error(Errc::FormatError, "unsupported GBEM version " + std::to_string(bytes[4]));
  }
  if (bytes[5] > static_cast<std::uint8_t>(View::Text)) {
    throw Error(Errc::FormatError, "unknown view tag " + std::to_string(bytes[5]));
  }
  const auto view = static_cast<View>(bytes[5]);
  const auto count = get_le<std::uint64_t>(bytes.data() + 6);
  const auto d = get_le<std::uint32_t>(bytes.data() + 14);
  if (d == 0) throw Error(Errc::FormatError, "embedding dimension is 0");

  const std::uint64_t record = 8 + 4 * static_cast<std::uint64_t>(d);
  const std::uint64_t body = bytes.size() - kGbemHeaderSize;
  if (count > body / record || count * record != body) {
    throw Error(Errc::FormatError, "body is " + std::to_string(body) + " bytes but header declares " +
                                       std::to_string(count) + " records of " +
                                       std::to_string(record) + " bytes");
  }

  std::vector<std::uint64_t> ids(count);
  Matrix rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  std::unordered_set<std::uint64_t> seen;
  const std::uint8_t* p = bytes.data() + kGbemHeaderSize;
  for (std::uint64_t i = 0; i < count; ++i, p += record) {
    ids[i] = get_le<std::uint64_t>(p);
    if (!seen.insert(ids[i]).second) {
      throw Error(Errc::FormatError, "record " + std::to_string(i) + ": duplicate id " +
                                         std::to_string(ids[i]));
    }
    for (std::uint32_t j = 0; j < d; ++j) {
      rows(static_cast<Eigen::Index>(i), j) =
          std::bit_cast<float>(get_le<std::uint32_t>(p + 8 + 4 * j));
    }
    const double norm = rows.row(static_cast<Eigen::Index>(i)).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
      throw Error(Errc::FormatError, "record " + std::to_string(i) + " (id " +
                                         std::to_string(ids[i]) + ") has norm " +
                                         std::to_string(norm) + ", expected unit norm");
    }
  }
  return EmbeddingBatch(view, std::move(ids), std::move(rows));
}

void write_gbem(const std::filesystem::path& path, const EmbeddingBatch& batch) {
  write_file_bytes(path, encode_gbem(batch));
}

EmbeddingBatch read_gbem(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_gbem(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.detail());
  }
}

}  // namespace geobridge
