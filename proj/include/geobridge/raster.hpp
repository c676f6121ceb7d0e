#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace geobridge {

/// Row-major 8-bit RGB raster.
class RgbImage {
 public:
  RgbImage() = default;
  /// Zero-filled image; width and height must be >= 1.
  RgbImage(int width, int height);
  RgbImage(int width, int height, std::vector<std::uint8_t> rgb);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  const std::uint8_t* pixel(int col, int row) const {
    return data_.data() + 3 * (static_cast<std::size_t>(row) * width_ + col);
  }
  std::uint8_t* pixel(int col, int row) {
    return data_.data() + 3 * (static_cast<std::size_t>(row) * width_ + col);
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Row-major 8-bit luminance raster.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  std::uint8_t at(int col, int row) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::uint8_t& at(int col, int row) {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Square window; top-left at (col0, row0).
struct PixelWindow {
  int col0 = 0;
  int row0 = 0;
  int size = 0;

  friend bool operator==(const PixelWindow&, const PixelWindow&) = default;
};

/// General axis-aligned pixel rectangle.
struct PixelRect {
  int col0 = 0;
  int row0 = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Rec. 601 luma, rounded half up.
GrayImage to_grayscale(const RgbImage& img);

/// Throws OutOfBounds when the window is not fully inside `img`.
RgbImage crop(const RgbImage& img, const PixelWindow& w);
RgbImage crop(const RgbImage& img, const PixelRect& r);
GrayImage crop(const GrayImage& img, const PixelRect& r);

/// Every window of `size` whose top-left sits on the stride lattice and fits
/// inside a width x height image, in row-major order.
std::vector<PixelWindow> sliding_windows(int width, int height, int size,
                                         int stride);

/// Population variance of the 4-neighbour Laplacian over interior pixels.
double laplacian_variance(const GrayImage& g);

double pixel_variance(const GrayImage& g);

/// Nearest-rank percentile of the luminance values, p in [0, 100].
int percentile(const GrayImage& g, double p);

/// percentile(p_high) - percentile(p_low).
int contrast_range(const GrayImage& g, double p_low, double p_high);

/// Shannon entropy (bits) of the 256-bin histogram.
double histogram_entropy(const GrayImage& g);

struct SaturationRatios {
  double black = 0.0;
  double white = 0.0;
};
SaturationRatios saturated_ratio(const GrayImage& g);

/// Variance of non-overlapping block means over the global pixel variance.
/// Partial edge tiles are dropped. Zero when the image is constant.
double block_mean_variance_ratio(const GrayImage& g, int block);

/// Mean filter with a (2r+1)x(2r+1) kernel evaluated only where the kernel
/// fits ("valid" mode), so the output is (w-2r)x(h-2r). Rounds half up.
GrayImage box_blur(const GrayImage& g, int radius);

}  // namespace geobridge
