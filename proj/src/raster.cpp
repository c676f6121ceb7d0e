#include "geobridge/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "geobridge/error.hpp"

namespace geobridge {
namespace {

__extension__ using Wide = unsigned __int128;
__extension__ using SignedWide = __int128;

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(Errc::InvalidArgument,
                "image dimensions must be >= 1, got " + std::to_string(width) +
                    "x" + std::to_string(height));
  }
}

void check_rect(int width, int height, const PixelRect& r) {
  const bool inside = r.width >= 1 && r.height >= 1 && r.col0 >= 0 &&
                      r.row0 >= 0 && r.col0 <= width - r.width &&
                      r.row0 <= height - r.height;
  if (!inside) {
    throw Error(Errc::OutOfBounds,
                "window (" + std::to_string(r.col0) + "," +
                    std::to_string(r.row0) + ") " + std::to_string(r.width) +
                    "x" + std::to_string(r.height) + " exceeds image " +
                    std::to_string(width) + "x" + std::to_string(height));
  }
}

void require_min_size(const GrayImage& g, int min_side, const char* what) {
  if (g.width() < min_side || g.height() < min_side) {
    throw Error(Errc::ImageTooSmall,
                std::string(what) + " needs at least " +
                    std::to_string(min_side) + "x" + std::to_string(min_side) +
                    " pixels, got " + std::to_string(g.width()) + "x" +
                    std::to_string(g.height()));
  }
}

std::array<std::size_t, 256> histogram(const GrayImage& g) {
  std::array<std::size_t, 256> h{};
  for (const auto v : g.data()) ++h[v];
  return h;
}

// Population variance from exact integer moments.
double variance_from_moments(Wide n, Wide sum, Wide sum_sq) {
  if (n == 0) return 0.0;
  const Wide num = n * sum_sq - sum * sum;
  return static_cast<double>(static_cast<long double>(num) /
                             (static_cast<long double>(n) * n));
}

}  // namespace

RgbImage::RgbImage(int width, int height)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(3 * static_cast<std::size_t>(width) * height, 0);
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), data_(std::move(rgb)) {
  check_dims(width, height);
  if (data_.size() != 3 * static_cast<std::size_t>(width) * height) {
    throw Error(Errc::InvalidArgument,
                "RGB buffer length " + std::to_string(data_.size()) +
                    " does not match 3*" + std::to_string(width) + "*" +
                    std::to_string(height));
  }
}

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> values)
    : width_(width), height_(height), data_(std::move(values)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(Errc::InvalidArgument,
                "gray buffer length " + std::to_string(data_.size()) +
                    " does not match " + std::to_string(width) + "*" +
                    std::to_string(height));
  }
}

GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const unsigned r = src[3 * i];
    const unsigned g = src[3 * i + 1];
    const unsigned b = src[3 * i + 2];
    // Weights sum to 1000, so the result never exceeds 255.
    dst[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

RgbImage crop(const RgbImage& img, const PixelWindow& w) {
  return crop(img, PixelRect{w.col0, w.row0, w.size, w.size});
}

RgbImage crop(const RgbImage& img, const PixelRect& r) {
  check_rect(img.width(), img.height(), r);
  std::vector<std::uint8_t> out(3 * static_cast<std::size_t>(r.width) * r.height);
  const std::size_t row_bytes = 3 * static_cast<std::size_t>(r.width);
  for (int y = 0; y < r.height; ++y) {
    const std::uint8_t* src = img.pixel(r.col0, r.row0 + y);
    std::copy(src, src + row_bytes, out.begin() + y * row_bytes);
  }
  return RgbImage(r.width, r.height, std::move(out));
}

GrayImage crop(const GrayImage& img, const PixelRect& r) {
  check_rect(img.width(), img.height(), r);
  GrayImage out(r.width, r.height);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) out.at(x, y) = img.at(r.col0 + x, r.row0 + y);
  }
  return out;
}

std::vector<PixelWindow> sliding_windows(int width, int height, int size,
                                         int stride) {
  check_dims(width, height);
  if (stride < 1) {
    throw Error(Errc::InvalidArgument,
                "stride must be >= 1, got " + std::to_string(stride));
  }
  if (size < 1 || size > std::min(width, height)) {
    throw Error(Errc::WindowTooLarge,
                "window " + std::to_string(size) + " does not fit a " +
                    std::to_string(width) + "x" + std::to_string(height) +
                    " image");
  }
  std::vector<PixelWindow> windows;
  for (int row = 0; row + size <= height; row += stride) {
    for (int col = 0; col + size <= width; col += stride) {
      windows.push_back({col, row, size});
    }
  }
  return windows;
}

double laplacian_variance(const GrayImage& g) {
  require_min_size(g, 3, "laplacian_variance");
  Wide n = 0;
  SignedWide sum = 0;
  Wide sum_sq = 0;
  for (int y = 1; y + 1 < g.height(); ++y) {
    for (int x = 1; x + 1 < g.width(); ++x) {
      const int response = 4 * g.at(x, y) - g.at(x - 1, y) - g.at(x + 1, y) -
                           g.at(x, y - 1) - g.at(x, y + 1);
      ++n;
      sum += response;
      sum_sq += static_cast<Wide>(response * response);
    }
  }
  const SignedWide num = static_cast<SignedWide>(n * sum_sq) - sum * sum;
  return static_cast<double>(static_cast<long double>(num) /
                             (static_cast<long double>(n) * n));
}

double pixel_variance(const GrayImage& g) {
  Wide sum = 0;
  Wide sum_sq = 0;
  for (const auto v : g.data()) {
    sum += v;
    sum_sq += static_cast<Wide>(v) * v;
  }
  return variance_from_moments(g.size(), sum, sum_sq);
}

int percentile(const GrayImage& g, double p) {
  if (!(p >= 0.0 && p <= 100.0)) {
    throw Error(Errc::InvalidArgument,
                "percentile must lie in [0, 100], got " + std::to_string(p));
  }
  const auto hist = histogram(g);
  const std::size_t n = g.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::size_t seen = 0;
  for (int v = 0; v < 256; ++v) {
    seen += hist[v];
    if (seen >= rank) return v;
  }
  return 255;
}

int contrast_range(const GrayImage& g, double p_low, double p_high) {
  if (!(p_low >= 0.0 && p_low < p_high && p_high <= 100.0)) {
    throw Error(Errc::InvalidArgument,
                "percentiles must satisfy 0 <= low < high <= 100");
  }
  return percentile(g, p_high) - percentile(g, p_low);
}

double histogram_entropy(const GrayImage& g) {
  const auto hist = histogram(g);
  const double n = static_cast<double>(g.size());
  double h = 0.0;
  for (const auto count : hist) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

SaturationRatios saturated_ratio(const GrayImage& g) {
  const auto hist = histogram(g);
  const double n = static_cast<double>(g.size());
  return {static_cast<double>(hist[0]) / n, static_cast<double>(hist[255]) / n};
}

double block_mean_variance_ratio(const GrayImage& g, int block) {
  if (block < 1) {
    throw Error(Errc::InvalidArgument,
                "block must be >= 1, got " + std::to_string(block));
  }
  require_min_size(g, block, "block_mean_variance_ratio");
  const double global = pixel_variance(g);
  if (global == 0.0) return 0.0;

  const int tiles_x = g.width() / block;
  const int tiles_y = g.height() / block;
  const double per_tile = static_cast<double>(block) * block;
  long double sum = 0.0L;
  long double sum_sq = 0.0L;
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      std::uint64_t acc = 0;
      for (int y = ty * block; y < (ty + 1) * block; ++y) {
        for (int x = tx * block; x < (tx + 1) * block; ++x) acc += g.at(x, y);
      }
      const long double mean = static_cast<long double>(acc) / per_tile;
      sum += mean;
      sum_sq += mean * mean;
    }
  }
  const long double count = static_cast<long double>(tiles_x) * tiles_y;
  const long double mean = sum / count;
  const long double var = std::max(0.0L, sum_sq / count - mean * mean);
  return static_cast<double>(var / global);
}

GrayImage box_blur(const GrayImage& g, int radius) {
  if (radius < 0) {
    throw Error(Errc::InvalidArgument, "blur radius must be >= 0");
  }
  const int k = 2 * radius + 1;
  require_min_size(g, k, "box_blur");
  const int w = g.width();
  const int h = g.height();
  // Summed-area table with a zero first row/column.
  std::vector<std::uint64_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto at = [&](int x, int y) -> std::uint64_t& {
    return sat[static_cast<std::size_t>(y) * (w + 1) + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      at(x + 1, y + 1) = g.at(x, y) + at(x, y + 1) + at(x + 1, y) - at(x, y);
    }
  }
  const std::uint64_t area = static_cast<std::uint64_t>(k) * k;
  GrayImage out(w - 2 * radius, h - 2 * radius);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const std::uint64_t s = at(x + k, y + k) - at(x, y + k) - at(x + k, y) + at(x, y);
      out.at(x, y) = static_cast<std::uint8_t>((2 * s + area) / (2 * area));
    }
  }
  return out;
}

}  // namespace geobridge
