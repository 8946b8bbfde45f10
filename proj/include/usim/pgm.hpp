// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "usim/error.hpp"
#include "usim/image.hpp"

namespace usim {
namespace detail {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments, then reads one unsigned decimal field.
  long next_field() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw Error(ErrorKind::malformed_header, "PGM header ended early");
    if (!std::isdigit(bytes_[pos_]))
      throw Error(ErrorKind::malformed_header, "non-numeric field in PGM header");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw Error(ErrorKind::malformed_header, "PGM field overflow");
      ++pos_;
    }
    return value;
  }

  // The raster of a binary PGM begins after exactly one whitespace byte.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw Error(ErrorKind::malformed_header, "missing whitespace before PGM raster");
    return pos_ + 1;
  }

  std::size_t position() const { return pos_; }
  void seek(std::size_t pos) { pos_ = pos; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Reads binary (P5) or ASCII (P2) PGM. Intensities are rescaled linearly so
/// that maxval maps to 255.
inline GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());

  if (bytes.size() < 2 || bytes[0] != 'P' || !std::isdigit(bytes[1]))
    throw Error(ErrorKind::malformed_header, "missing PGM magic number in " + path.string());
  const char kind = static_cast<char>(bytes[1]);
  if (kind != '2' && kind != '5')
    throw Error(ErrorKind::unsupported_format,
                std::string("unsupported magic number P") + kind + " in " + path.string());

  detail::PgmHeaderReader reader(bytes);
  reader.seek(2);
  const long width = reader.next_field();
  const long height = reader.next_field();
  const long maxval = reader.next_field();
  if (width <= 0 || height <= 0) throw Error(ErrorKind::malformed_header, "non-positive PGM size");
  if (maxval <= 0 || maxval > 65535)
    throw Error(ErrorKind::malformed_header, "PGM maxval outside 1..65535");

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const double scale = 255.0 / static_cast<double>(maxval);
  std::vector<double> data(count);

  auto store = [&](std::size_t i, long raw) {
    if (raw > maxval) throw Error(ErrorKind::malformed_header, "PGM sample exceeds maxval");
    data[i] = maxval == 255 ? static_cast<double>(raw) : static_cast<double>(raw) * scale;
  };

  if (kind == '5') {
    const std::size_t offset = reader.raster_offset();
    const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
    if (bytes.size() < offset + count * bytes_per_sample)
      throw Error(ErrorKind::truncated_data, "PGM raster truncated in " + path.string());
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t p = offset + i * bytes_per_sample;
      const long raw = bytes_per_sample == 1 ? bytes[p] : (bytes[p] << 8) | bytes[p + 1];
      store(i, raw);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      long raw = 0;
      try {
        raw = reader.next_field();
      } catch (const Error&) {
        throw Error(ErrorKind::truncated_data, "PGM raster truncated in " + path.string());
      }
      store(i, raw);
    }
  }
  return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

/// Writes binary P5 with maxval 255; values are rounded half away from zero
/// and clamped to [0, 255].
inline void save_pgm(const GrayImage& image, const std::filesystem::path& path) {
  validate(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> raster(image.size());
  std::transform(image.pixels().begin(), image.pixels().end(), raster.begin(), [](double v) {
    return static_cast<unsigned char>(std::clamp(std::round(v), 0.0, 255.0));
  });
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

}  // namespace usim
