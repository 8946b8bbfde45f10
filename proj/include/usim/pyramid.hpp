// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "usim/error.hpp"
#include "usim/fft.hpp"
#include "usim/image.hpp"

namespace usim {

struct PyramidParams {
  int levels = 4;
  int orientations = 6;
};

struct ComplexSubband {
  int level = 0;        // 0 = finest
  int orientation = 0;  // band k is centered on angle pi * k / orientations
  ComplexGrid coeffs;
};

struct Pyramid {
  PyramidParams params;
  std::vector<ComplexSubband> subbands;  // level-major, orientation-minor
  GrayImage highpass_residual;
  GrayImage lowpass_residual;
  int source_width = 0;
  int source_height = 0;

  const ComplexSubband& band(int level, int orientation) const {
    return subbands.at(static_cast<std::size_t>(level * params.orientations + orientation));
  }
};

inline void check_pyramid_fits(int width, int height, const PyramidParams& params) {
  detail::require(params.levels >= 1 && params.orientations >= 1, ErrorKind::invalid_argument,
                  "pyramid needs at least one level and one orientation");
  const long need = (1L << params.levels) * 8L;
  if (std::min(width, height) < need)
    throw Error(ErrorKind::image_too_small,
                "pyramid with " + std::to_string(params.levels) + " levels needs min dimension >= " +
                    std::to_string(need) + ", got " + std::to_string(std::min(width, height)));
}

namespace pyramid_detail {

// Raised-cosine transition in log2 radius, one octave wide, ending at
// log2(rho) = edge. Returns the low-pass amplitude; the matching high-pass
// amplitude is sqrt(1 - lo^2), so lo^2 + hi^2 == 1 everywhere.
inline double lowpass_amplitude(double rho, double edge) {
  if (rho <= 0.0) return 1.0;
  const double lr = std::log2(rho);
  if (lr <= edge - 1.0) return 1.0;
  if (lr >= edge) return 0.0;
  return std::cos(std::numbers::pi / 2.0 * (lr - (edge - 1.0)));
}

inline double highpass_amplitude(double lo) { return std::sqrt(std::max(0.0, 1.0 - lo * lo)); }

// Normalization making sum_k c * cos^(2n)(theta - theta_k) == 1 for n = K - 1.
inline double angular_constant(int orientations) {
  const int n = orientations - 1;
  double log_c = 2.0 * n * std::log(2.0) + 2.0 * std::lgamma(n + 1.0) - std::log(orientations) -
                 std::lgamma(2.0 * n + 1.0);
  return std::exp(log_c);
}

struct Polar {
  double rho;    // 1.0 at the Nyquist frequency
  double theta;  // atan2(fy, fx)
};

inline Polar polar_at(int kx, int ky, int width, int height) {
  const double fx = 2.0 * fft::signed_frequency(kx, width) / width;
  const double fy = 2.0 * fft::signed_frequency(ky, height) / height;
  return {std::hypot(fx, fy), std::atan2(fy, fx)};
}

// One-sided (analytic) angular mask: the two-sided filter sqrt(c)cos^n
// restricted to the half-plane facing theta_k.
inline double analytic_angular(double theta, double theta_k, int orientations, double sqrt_c) {
  const double d = std::cos(theta - theta_k);
  constexpr double tie = 1e-12;
  const bool inside = d > tie || (std::abs(d) <= tie && std::sin(theta - theta_k) > 0.0);
  if (!inside) return 0.0;
  return sqrt_c * std::pow(std::max(d, 0.0), orientations - 1);
}

// Keeps the central frequencies of a band-limited spectrum on a
// ceil(n/2)-sized grid, scaled so spatial energy is preserved.
inline ComplexGrid halve_spectrum(const ComplexGrid& spec) {
  const int w = spec.width(), h = spec.height();
  const int nw = (w + 1) / 2, nh = (h + 1) / 2;
  const double scale = std::sqrt(static_cast<double>(nw) * nh / (static_cast<double>(w) * h));
  ComplexGrid out(nw, nh);
  for (int ky = 0; ky < nh; ++ky) {
    const int uy = fft::signed_frequency(ky, nh);
    for (int kx = 0; kx < nw; ++kx) {
      const int ux = fft::signed_frequency(kx, nw);
      out(kx, ky) = spec(fft::bin_of(ux, w), fft::bin_of(uy, h)) * scale;
    }
  }
  return out;
}

inline GrayImage real_part(const ComplexGrid& g) {
  GrayImage out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) out.data()[i] = g.data()[i].real();
  return out;
}

}  // namespace pyramid_detail

/// Complex steerable pyramid built in the frequency domain.
///
/// The spectrum is split into a high-pass residual and a low-pass branch by
/// a pair of raised-cosine radial masks. At each level the low-pass branch is
/// split into an annular band-pass part, further divided into `orientations`
/// analytic oriented bands, and a low-pass part that is decimated by two
/// before the next level. All radial pairs satisfy lo^2 + hi^2 = 1 and the
/// two-sided angular masks sum (squared) to one, so for a real input
///
///   sum|x|^2 = sum|highpass|^2 + 2 * sum_bands sum|w|^2 + sum|lowpass|^2.
inline Pyramid decompose(const GrayImage& image, const PyramidParams& params = {}) {
  check_pyramid_fits(image.width(), image.height(), params);
  using namespace pyramid_detail;

  Pyramid pyr;
  pyr.params = params;
  pyr.source_width = image.width();
  pyr.source_height = image.height();

  ComplexGrid spectrum = fft::forward(image);
  ComplexGrid high(spectrum.width(), spectrum.height());
  for (int ky = 0; ky < spectrum.height(); ++ky)
    for (int kx = 0; kx < spectrum.width(); ++kx) {
      const Polar p = polar_at(kx, ky, spectrum.width(), spectrum.height());
      const double lo = lowpass_amplitude(p.rho, 0.0);
      high(kx, ky) = spectrum(kx, ky) * highpass_amplitude(lo);
      spectrum(kx, ky) *= lo;
    }
  pyr.highpass_residual = real_part(fft::inverse(std::move(high)));

  const double sqrt_c = std::sqrt(angular_constant(params.orientations));
  pyr.subbands.reserve(static_cast<std::size_t>(params.levels * params.orientations));

  for (int level = 0; level < params.levels; ++level) {
    const int w = spectrum.width(), h = spectrum.height();
    std::vector<Polar> polar(spectrum.size());
    std::vector<double> radial(spectrum.size());
    for (int ky = 0; ky < h; ++ky)
      for (int kx = 0; kx < w; ++kx) {
        const std::size_t i = static_cast<std::size_t>(ky) * w + kx;
        polar[i] = polar_at(kx, ky, w, h);
        const double lo = lowpass_amplitude(polar[i].rho, -1.0);
        radial[i] = highpass_amplitude(lo);
      }

    for (int k = 0; k < params.orientations; ++k) {
      const double theta_k = std::numbers::pi * k / params.orientations;
      ComplexGrid band(w, h);
      for (std::size_t i = 0; i < band.size(); ++i) {
        const double mask =
            radial[i] * analytic_angular(polar[i].theta, theta_k, params.orientations, sqrt_c);
        band.data()[i] = spectrum.data()[i] * mask;
      }
      pyr.subbands.push_back({level, k, fft::inverse(std::move(band))});
    }

    for (std::size_t i = 0; i < spectrum.size(); ++i)
      spectrum.data()[i] *= lowpass_amplitude(polar[i].rho, -1.0);
    spectrum = halve_spectrum(spectrum);
  }
  pyr.lowpass_residual = real_part(fft::inverse(std::move(spectrum)));
  return pyr;
}

struct ShiftStabilityOptions {
  int margin = 4;             // interior = at least this many coefficients from every edge
  // eps = eps_fraction * max |w| over every unshifted oriented band. A single
  // eps keeps bands that carry almost no signal (round-off only) from
  // reporting huge relative changes of nothing.
  double eps_fraction = 0.05;
};

/// Per-subband max over interior coefficients of ||w_shifted| - |w|| / (|w| + eps)
/// for an integer translation of the input. Shifts move coefficient phase
/// much more than magnitude; this quantifies the magnitude side.
inline std::vector<double> shift_magnitude_stability(const GrayImage& image,
                                                     const PyramidParams& params, int dx, int dy,
                                                     const ShiftStabilityOptions& opts = {}) {
  detail::require(std::abs(dx) <= 2 && std::abs(dy) <= 2, ErrorKind::invalid_argument,
                  "shift stability is defined for |dx|, |dy| <= 2");
  const Pyramid base = decompose(image, params);
  const Pyramid moved = decompose(shift(image, dx, dy), params);
  double peak = 0.0;
  for (const auto& band : base.subbands)
    for (const auto& v : band.coeffs.data()) peak = std::max(peak, std::abs(v));
  const double eps = std::max(opts.eps_fraction * peak, 1e-300);
  std::vector<double> deviation;
  deviation.reserve(base.subbands.size());
  for (std::size_t b = 0; b < base.subbands.size(); ++b) {
    const ComplexGrid& w0 = base.subbands[b].coeffs;
    const ComplexGrid& w1 = moved.subbands[b].coeffs;
    double worst = 0.0;
    for (int y = opts.margin; y < w0.height() - opts.margin; ++y)
      for (int x = opts.margin; x < w0.width() - opts.margin; ++x) {
        const double m0 = std::abs(w0(x, y));
        const double m1 = std::abs(w1(x, y));
        worst = std::max(worst, std::abs(m1 - m0) / (m0 + eps));
      }
    deviation.push_back(worst);
  }
  return deviation;
}

}  // namespace usim
