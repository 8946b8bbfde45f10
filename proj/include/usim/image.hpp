// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "usim/error.hpp"

namespace usim {

/// Row-major 2-D raster. `GrayImage` is the double-valued instantiation every
/// metric and tracker operates on; pyramid subbands use the complex one.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    detail::require(width > 0 && height > 0, ErrorKind::invalid_argument,
                    "grid dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    detail::require(width > 0 && height > 0, ErrorKind::invalid_argument,
                    "grid dimensions must be positive");
    detail::require(data_.size() == static_cast<std::size_t>(width) * height,
                    ErrorKind::invalid_argument,
                    "grid data length must equal width * height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  /// Edge-replicated access; coordinates outside the grid clamp to the border.
  const T& clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Grid<double>;
using ComplexGrid = Grid<std::complex<double>>;

struct Landmark {
  double x = 0.0;  // column
  double y = 0.0;  // row

  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct Roi {
  Landmark center;
  int half_width = 0;
  int half_height = 0;

  int width() const noexcept { return 2 * half_width + 1; }
  int height() const noexcept { return 2 * half_height + 1; }
};

/// Frame-sized ROI centered on the image, for full-frame comparisons.
/// Even dimensions cannot be covered by an odd window, so the last row or
/// column is dropped in that case.
inline Roi full_frame_roi(int width, int height) {
  return Roi{{static_cast<double>((width - 1) / 2), static_cast<double>((height - 1) / 2)},
             (width - 1) / 2, (height - 1) / 2};
}

inline void validate(const GrayImage& image) {
  detail::require(!image.empty(), ErrorKind::invalid_argument, "empty image");
  for (double v : image.pixels())
    detail::require(std::isfinite(v), ErrorKind::invalid_argument,
                    "image contains non-finite values");
}

inline void require_same_shape(const GrayImage& a, const GrayImage& b) {
  if (!a.same_shape(b))
    throw Error(ErrorKind::dimension_mismatch,
                "image dimensions differ: " + std::to_string(a.width()) + "x" +
                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                    "x" + std::to_string(b.height()));
}

/// Half-away-from-zero rounding, the only rounding rule used for pixel grids.
inline int round_to_grid(double v) { return static_cast<int>(std::lround(v)); }

/// (2*half_width+1) x (2*half_height+1) window centered at the rounded ROI
/// center. Out-of-frame samples replicate the nearest edge pixel.
inline GrayImage crop(const GrayImage& image, const Roi& roi) {
  detail::require(roi.half_width >= 0 && roi.half_height >= 0,
                  ErrorKind::invalid_argument, "ROI half sizes must be non-negative");
  const int cx = round_to_grid(roi.center.x);
  const int cy = round_to_grid(roi.center.y);
  GrayImage out(roi.width(), roi.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      out(x, y) = image.clamped(cx - roi.half_width + x, cy - roi.half_height + y);
  return out;
}

/// Integer translation: out(x, y) = image(x - dx, y - dy), edge-replicated.
inline GrayImage shift(const GrayImage& image, int dx, int dy) {
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) out(x, y) = image.clamped(x - dx, y - dy);
  return out;
}

/// Normalized 1-D Gaussian sampled at integer offsets from the center tap.
inline std::vector<double> gaussian_kernel(int size, double sigma) {
  detail::require(size > 0 && size % 2 == 1, ErrorKind::invalid_argument,
                  "Gaussian window size must be odd and positive");
  detail::require(sigma > 0.0, ErrorKind::invalid_argument, "Gaussian sigma must be positive");
  const int half = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size));
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[static_cast<std::size_t>(i + half)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i + half)];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Isotropic 2-D Gaussian weights, normalized to sum to one.
inline GrayImage gaussian_window(int size, double sigma) {
  detail::require(size > 0 && size % 2 == 1, ErrorKind::invalid_argument,
                  "Gaussian window size must be odd and positive");
  detail::require(sigma > 0.0, ErrorKind::invalid_argument, "Gaussian sigma must be positive");
  const int half = size / 2;
  GrayImage w(size, size);
  double sum = 0.0;
  for (int y = -half; y <= half; ++y)
    for (int x = -half; x <= half; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      w(x + half, y + half) = v;
      sum += v;
    }
  for (double& v : w.data()) v /= sum;
  return w;
}

/// Separable correlation over the fully-overlapping ("valid") region.
/// Output is (W - k + 1) x (H - k + 1).
inline GrayImage filter_valid(const GrayImage& image, std::span<const double> kernel) {
  const int k = static_cast<int>(kernel.size());
  detail::require(image.width() >= k && image.height() >= k, ErrorKind::image_too_small,
                  "image smaller than filter window");
  const int ow = image.width() - k + 1;
  const int oh = image.height() - k + 1;
  GrayImage rows(ow, image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += kernel[static_cast<std::size_t>(i)] * image(x + i, y);
      rows(x, y) = acc;
    }
  GrayImage out(ow, oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += kernel[static_cast<std::size_t>(i)] * rows(x, y + i);
      out(x, y) = acc;
    }
  return out;
}

/// Separable correlation with edge replication; output has the input's size.
inline GrayImage filter_same(const GrayImage& image, std::span<const double> kernel) {
  const int half = static_cast<int>(kernel.size()) / 2;
  GrayImage rows(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i)
        acc += kernel[static_cast<std::size_t>(i + half)] * image.clamped(x + i, y);
      rows(x, y) = acc;
    }
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i)
        acc += kernel[static_cast<std::size_t>(i + half)] * rows.clamped(x, y + i);
      out(x, y) = acc;
    }
  return out;
}

inline GrayImage gaussian_blur(const GrayImage& image, double sigma) {
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  return filter_same(image, gaussian_kernel(2 * half + 1, sigma));
}

/// Binomial [1 4 6 4 1]/16 low-pass, then keep even rows and columns.
/// Output dimensions are ceil(dim / 2).
inline GrayImage downsample2(const GrayImage& image) {
  detail::require(image.width() >= 2 && image.height() >= 2, ErrorKind::image_too_small,
                  "downsample2 needs at least 2x2 pixels");
  static constexpr double kBinomial[] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const GrayImage smooth = filter_same(image, kBinomial);
  GrayImage out((image.width() + 1) / 2, (image.height() + 1) / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(x, y) = smooth(2 * x, 2 * y);
  return out;
}

}  // namespace usim
