// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "usim/error.hpp"

namespace usim {

/// Neumaier-compensated accumulator. Result is independent of summation
/// order to well below 1e-9 for the series sizes used here.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      carry_ += (sum_ - t) + v;
    else
      carry_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  CompensatedSum s;
  for (double v : xs) s.add(v);
  return s.value();
}

inline double mean(std::span<const double> xs) {
  detail::require(!xs.empty(), ErrorKind::invalid_argument, "mean of empty series");
  return compensated_sum(xs) / static_cast<double>(xs.size());
}

/// Population standard deviation (divides by N).
inline double population_std(std::span<const double> xs) {
  const double m = mean(xs);
  CompensatedSum s;
  for (double v : xs) s.add((v - m) * (v - m));
  return std::sqrt(s.value() / static_cast<double>(xs.size()));
}

/// Sample Pearson correlation, two-pass with compensated sums.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), ErrorKind::length_mismatch,
                  "pearson: series lengths differ");
  detail::require(x.size() >= 3, ErrorKind::invalid_argument, "pearson needs at least 3 samples");
  const double mx = mean(x);
  const double my = mean(y);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  if (sxx.value() <= 0.0 || syy.value() <= 0.0)
    throw Error(ErrorKind::constant_series, "pearson: constant series");
  const double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
  return std::clamp(r, -1.0, 1.0);
}

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), ErrorKind::length_mismatch,
                  "spearman: series lengths differ");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

/// Min-max rescaling onto [0, 1]. +inf entries (PSNR of identical frames)
/// are first replaced by the largest finite value.
inline std::vector<double> normalize_series(std::span<const double> values) {
  if (values.size() < 2)
    throw Error(ErrorKind::constant_series, "normalization needs at least two values");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    detail::require(!std::isnan(v) && v != -std::numeric_limits<double>::infinity(),
                    ErrorKind::invalid_argument, "normalization input must be finite or +inf");
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) throw Error(ErrorKind::constant_series, "normalization of a constant series");
  std::vector<double> out;
  out.reserve(values.size());
  const double span = hi - lo;
  for (double v : values) {
    const double finite = std::isfinite(v) ? v : hi;
    out.push_back(finite == hi ? 1.0 : (finite - lo) / span);
  }
  return out;
}

}  // namespace usim
