// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>

#include "usim/image.hpp"

namespace usim::fft {
namespace detail {

// FFTW's planner is not reentrant; execution of an existing plan is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline void transform_in_place(ComplexGrid& grid, int sign) {
  auto* buf = reinterpret_cast<fftw_complex*>(grid.data().data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(grid.height(), grid.width(), buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace detail

/// Unnormalized forward 2-D DFT.
inline ComplexGrid forward(const GrayImage& image) {
  ComplexGrid g(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) g.data()[i] = image.data()[i];
  detail::transform_in_place(g, FFTW_FORWARD);
  return g;
}

/// Inverse 2-D DFT including the 1/N factor.
inline ComplexGrid inverse(ComplexGrid spectrum) {
  detail::transform_in_place(spectrum, FFTW_BACKWARD);
  const double n = static_cast<double>(spectrum.size());
  for (auto& v : spectrum.data()) v /= n;
  return spectrum;
}

/// Signed frequency index of DFT bin k for a length-n transform.
inline int signed_frequency(int k, int n) { return k <= (n - 1) / 2 ? k : k - n; }

/// DFT bin holding signed frequency u for a length-n transform.
inline int bin_of(int u, int n) { return u >= 0 ? u : u + n; }

}  // namespace usim::fft
