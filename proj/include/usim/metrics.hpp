// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "usim/error.hpp"
#include "usim/image.hpp"
#include "usim/pyramid.hpp"
#include "usim/stats.hpp"

namespace usim {

enum class Metric { mse, psnr, ssim, msssim, cwssim, vif };

inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::mse,    Metric::psnr,
                                                      Metric::ssim,   Metric::msssim,
                                                      Metric::cwssim, Metric::vif};

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::mse: return "mse";
    case Metric::psnr: return "psnr";
    case Metric::ssim: return "ssim";
    case Metric::msssim: return "msssim";
    case Metric::cwssim: return "cwssim";
    case Metric::vif: return "vif";
  }
  return "unknown";
}

inline Metric parse_metric(std::string_view name) {
  for (Metric m : kAllMetrics)
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::invalid_argument, "unknown metric '" + std::string(name) + "'");
}

/// MSE is the only distance; every other metric grows with similarity.
inline bool higher_is_better(Metric m) { return m != Metric::mse; }

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  int window_size = 11;
  double window_sigma = 1.5;
  double alpha = 1.0;  // luminance exponent
  double beta = 1.0;   // contrast exponent
  double gamma = 1.0;  // structure exponent
};

namespace metrics_detail {

// The classic five-scale exponents sum to 1.0001; rescale them to sum to one.
inline std::vector<double> default_msssim_weights() {
  std::vector<double> w = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  const double total = compensated_sum(w);
  for (double& v : w) v /= total;
  return w;
}

}  // namespace metrics_detail

struct MsSsimParams {
  int scales = 5;
  std::vector<double> weights = metrics_detail::default_msssim_weights();
  SsimParams base;

  /// First `n` default weights renormalized to sum to one, for images too
  /// small for the full five-scale stack.
  static MsSsimParams truncated(int n) {
    MsSsimParams p;
    detail::require(n >= 1 && n <= p.scales, ErrorKind::invalid_argument,
                    "truncated MS-SSIM needs 1..5 scales");
    p.weights.resize(static_cast<std::size_t>(n));
    const double total = compensated_sum(p.weights);
    for (double& w : p.weights) w /= total;
    p.scales = n;
    return p;
  }
};

struct CwSsimParams {
  PyramidParams pyramid;
  int window_size = 7;
  double k_stab = 0.03;
};

struct VifParams {
  double sigma_n2 = 2.0;
  int scales = 4;
  int block_size = 9;
};

struct SimilarityScore {
  Metric metric = Metric::mse;
  double value = 0.0;
  std::optional<GrayImage> map;  // ssim and cwssim only
};

struct MetricParams {
  double peakval = 255.0;
  SsimParams ssim;
  MsSsimParams msssim;
  CwSsimParams cwssim;
  VifParams vif;
};

// ---------------------------------------------------------------- MSE / PSNR

inline SimilarityScore mse(const GrayImage& ref, const GrayImage& test) {
  require_same_shape(ref, test);
  CompensatedSum acc;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref.data()[i] - test.data()[i];
    acc.add(d * d);
  }
  return {Metric::mse, acc.value() / static_cast<double>(ref.size()), std::nullopt};
}

/// 10 log10(peak^2 / MSE); +inf when the images are identical.
inline SimilarityScore psnr(const GrayImage& ref, const GrayImage& test, double peakval = 255.0) {
  detail::require(peakval > 0.0, ErrorKind::invalid_argument, "peakval must be positive");
  const double e = mse(ref, test).value;
  const double v = e == 0.0 ? std::numeric_limits<double>::infinity()
                            : 10.0 * std::log10(peakval * peakval / e);
  return {Metric::psnr, v, std::nullopt};
}

// ---------------------------------------------------------------- SSIM

/// Gaussian-weighted local statistics over every fully-overlapping window.
struct LocalMoments {
  GrayImage mu_x, mu_y, var_x, var_y, cov;
};

inline LocalMoments local_moments(const GrayImage& x, const GrayImage& y, int window_size,
                                  double sigma) {
  require_same_shape(x, y);
  if (x.width() < window_size || x.height() < window_size)
    throw Error(ErrorKind::image_too_small, "image smaller than the " +
                                                std::to_string(window_size) + "px window");
  const auto k = gaussian_kernel(window_size, sigma);
  GrayImage xx(x.width(), x.height()), yy(x.width(), x.height()), xy(x.width(), x.height());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx.data()[i] = x.data()[i] * x.data()[i];
    yy.data()[i] = y.data()[i] * y.data()[i];
    xy.data()[i] = x.data()[i] * y.data()[i];
  }
  LocalMoments m{filter_valid(x, k), filter_valid(y, k), filter_valid(xx, k),
                 filter_valid(yy, k), filter_valid(xy, k)};
  for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
    const double mx = m.mu_x.data()[i], my = m.mu_y.data()[i];
    m.var_x.data()[i] = std::max(0.0, m.var_x.data()[i] - mx * mx);
    m.var_y.data()[i] = std::max(0.0, m.var_y.data()[i] - my * my);
    m.cov.data()[i] -= mx * my;
  }
  return m;
}

namespace metrics_detail {

// Real-valued power that keeps the sign of negative bases (structure term).
inline double signed_pow(double base, double exponent) {
  if (exponent == 1.0) return base;
  return std::copysign(std::pow(std::abs(base), exponent), base);
}

struct SsimMaps {
  GrayImage luminance;         // l
  GrayImage contrast_structure;  // c^beta * s^gamma
};

inline SsimMaps ssim_maps(const GrayImage& x, const GrayImage& y, const SsimParams& p) {
  detail::require(p.k1 > 0.0 && p.k2 > 0.0, ErrorKind::invalid_argument, "k1, k2 must be positive");
  detail::require(p.alpha > 0.0 && p.beta > 0.0 && p.gamma > 0.0, ErrorKind::invalid_argument,
                  "SSIM exponents must be positive");
  const LocalMoments m = local_moments(x, y, p.window_size, p.window_sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const double c3 = c2 / 2.0;
  SsimMaps out{GrayImage(m.mu_x.width(), m.mu_x.height()),
               GrayImage(m.mu_x.width(), m.mu_x.height())};
  for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
    const double mx = m.mu_x.data()[i], my = m.mu_y.data()[i];
    const double sx = std::sqrt(m.var_x.data()[i]), sy = std::sqrt(m.var_y.data()[i]);
    const double l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
    const double c = (2.0 * sx * sy + c2) / (m.var_x.data()[i] + m.var_y.data()[i] + c2);
    const double s = (m.cov.data()[i] + c3) / (sx * sy + c3);
    out.luminance.data()[i] = l;
    out.contrast_structure.data()[i] = signed_pow(c, p.beta) * signed_pow(s, p.gamma);
  }
  return out;
}

inline double map_mean(const GrayImage& g) { return compensated_sum(g.pixels()) / g.size(); }

}  // namespace metrics_detail

/// Mean of the local l^alpha c^beta s^gamma map over interior windows.
inline SimilarityScore ssim(const GrayImage& ref, const GrayImage& test, const SsimParams& p = {}) {
  auto maps = metrics_detail::ssim_maps(ref, test, p);
  GrayImage& out = maps.contrast_structure;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] *= metrics_detail::signed_pow(maps.luminance.data()[i], p.alpha);
  return {Metric::ssim, metrics_detail::map_mean(out), std::move(out)};
}

/// Multi-scale SSIM: contrast-structure means at every scale, luminance only
/// at the coarsest one (there combined as mean(l * cs) so a single scale
/// reproduces plain SSIM). Negative per-scale means clamp to zero.
inline SimilarityScore ms_ssim(const GrayImage& ref, const GrayImage& test,
                               const MsSsimParams& p = {}) {
  require_same_shape(ref, test);
  detail::require(p.scales >= 1 && p.weights.size() == static_cast<std::size_t>(p.scales),
                  ErrorKind::invalid_argument, "MS-SSIM needs one weight per scale");
  detail::require(std::abs(compensated_sum(p.weights) - 1.0) <= 1e-6, ErrorKind::invalid_argument,
                  "MS-SSIM weights must sum to 1");
  const long need = static_cast<long>(p.base.window_size) << (p.scales - 1);
  if (std::min(ref.width(), ref.height()) < need)
    throw Error(ErrorKind::image_too_small, "MS-SSIM with " + std::to_string(p.scales) +
                                                " scales needs min dimension >= " +
                                                std::to_string(need));
  GrayImage x = ref, y = test;
  double product = 1.0;
  for (int m = 0; m < p.scales; ++m) {
    const auto maps = metrics_detail::ssim_maps(x, y, p.base);
    const double w = p.weights[static_cast<std::size_t>(m)];
    double term;
    if (m + 1 < p.scales) {
      term = metrics_detail::map_mean(maps.contrast_structure);
      x = downsample2(x);
      y = downsample2(y);
    } else {
      GrayImage full = maps.contrast_structure;
      for (std::size_t i = 0; i < full.size(); ++i) full.data()[i] *= maps.luminance.data()[i];
      term = metrics_detail::map_mean(full);
    }
    product *= std::pow(std::max(term, 0.0), w);
  }
  return {Metric::msssim, product, std::nullopt};
}

// ---------------------------------------------------------------- CW-SSIM

namespace metrics_detail {

// Box sums over every fully-overlapping window x window block.
template <typename T>
Grid<T> box_sums(const Grid<T>& g, int window) {
  const int ow = g.width() - window + 1, oh = g.height() - window + 1;
  Grid<T> rows(ow, g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < ow; ++x) {
      T acc{};
      for (int i = 0; i < window; ++i) acc += g(x + i, y);
      rows(x, y) = acc;
    }
  Grid<T> out(ow, oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      T acc{};
      for (int i = 0; i < window; ++i) acc += rows(x, y + i);
      out(x, y) = acc;
    }
  return out;
}

inline GrayImage cw_ssim_band_map(const ComplexGrid& wx, const ComplexGrid& wy, int window,
                                  double k) {
  ComplexGrid cross(wx.width(), wx.height());
  GrayImage ex(wx.width(), wx.height()), ey(wx.width(), wx.height());
  for (std::size_t i = 0; i < wx.size(); ++i) {
    const auto a = wx.data()[i], b = wy.data()[i];
    cross.data()[i] = a * std::conj(b);
    ex.data()[i] = std::norm(a);
    ey.data()[i] = std::norm(b);
  }
  const auto sc = box_sums(cross, window);
  const auto sx = box_sums(ex, window);
  const auto sy = box_sums(ey, window);
  GrayImage map(sc.width(), sc.height());
  for (std::size_t i = 0; i < map.size(); ++i)
    map.data()[i] = (2.0 * std::abs(sc.data()[i]) + k) / (sx.data()[i] + sy.data()[i] + k);
  return map;
}

}  // namespace metrics_detail

/// CW-SSIM from precomputed pyramids (lets a fixed reference be decomposed
/// once). Windows are averaged within each oriented subband and the subband
/// means are averaged with equal weight, so coarse levels count as much as
/// fine ones. The returned map is the orientation-averaged finest-level map.
inline SimilarityScore cw_ssim(const Pyramid& px, const Pyramid& py, const CwSsimParams& p = {}) {
  detail::require(p.window_size > 0 && p.window_size % 2 == 1, ErrorKind::invalid_argument,
                  "CW-SSIM window size must be odd");
  detail::require(p.k_stab > 0.0, ErrorKind::invalid_argument, "CW-SSIM K must be positive");
  detail::require(px.source_width == py.source_width && px.source_height == py.source_height &&
                      px.subbands.size() == py.subbands.size(),
                  ErrorKind::dimension_mismatch, "pyramids differ in shape");
  CompensatedSum total;
  std::optional<GrayImage> finest;
  for (std::size_t b = 0; b < px.subbands.size(); ++b) {
    const auto& bx = px.subbands[b].coeffs;
    const auto& by = py.subbands[b].coeffs;
    if (bx.width() < p.window_size || bx.height() < p.window_size)
      throw Error(ErrorKind::image_too_small, "subband smaller than CW-SSIM window");
    const GrayImage map = metrics_detail::cw_ssim_band_map(bx, by, p.window_size, p.k_stab);
    CompensatedSum band;
    for (double v : map.pixels()) band.add(v);
    total.add(band.value() / static_cast<double>(map.size()));
    if (px.subbands[b].level == 0) {
      if (!finest) finest = GrayImage(map.width(), map.height());
      for (std::size_t i = 0; i < map.size(); ++i)
        finest->data()[i] += map.data()[i] / px.params.orientations;
    }
  }
  return {Metric::cwssim, total.value() / static_cast<double>(px.subbands.size()),
          std::move(finest)};
}

inline SimilarityScore cw_ssim(const GrayImage& ref, const GrayImage& test,
                               const CwSsimParams& p = {}) {
  require_same_shape(ref, test);
  return cw_ssim(decompose(ref, p.pyramid), decompose(test, p.pyramid), p);
}

// ---------------------------------------------------------------- VIF

/// Pixel-domain VIF with a scalar Gaussian scale mixture per block: the
/// eigenvalue sum collapses to one term whose source variance s^2 lambda is
/// the local reference variance. Channels are successive binomial
/// downsamplings of both images.
inline SimilarityScore vif(const GrayImage& ref, const GrayImage& test, const VifParams& p = {}) {
  require_same_shape(ref, test);
  detail::require(p.sigma_n2 > 0.0, ErrorKind::invalid_argument, "sigma_n2 must be positive");
  detail::require(p.scales >= 1, ErrorKind::invalid_argument, "VIF needs at least one scale");
  detail::require(p.block_size > 0 && p.block_size % 2 == 1, ErrorKind::invalid_argument,
                  "VIF block size must be odd");
  const long need = static_cast<long>(p.block_size) << (p.scales - 1);
  if (std::min(ref.width(), ref.height()) < need)
    throw Error(ErrorKind::image_too_small,
                "VIF with " + std::to_string(p.scales) + " scales needs min dimension >= " +
                    std::to_string(need));
  constexpr double eps_r = 1e-10;
  constexpr double eps_v = 1e-10;

  GrayImage x = ref, y = test;
  CompensatedSum numerator, denominator;
  for (int j = 0; j < p.scales; ++j) {
    if (j > 0) {
      x = downsample2(x);
      y = downsample2(y);
    }
    const LocalMoments m = local_moments(x, y, p.block_size, p.block_size / 5.0);
    for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
      double var_r = m.var_x.data()[i];
      if (var_r < eps_r) var_r = 0.0;
      const double var_t = m.var_y.data()[i];
      const double cov = m.cov.data()[i];
      const double g = std::max(0.0, cov / (var_r + eps_r));
      const double sv2 = std::max(eps_v, var_t - g * cov);
      numerator.add(std::log2(1.0 + g * g * var_r / (sv2 + p.sigma_n2)));
      denominator.add(std::log2(1.0 + var_r / p.sigma_n2));
    }
  }
  if (!(denominator.value() > 0.0))
    throw Error(ErrorKind::degenerate_reference, "VIF undefined: reference has no variance");
  return {Metric::vif, numerator.value() / denominator.value(), std::nullopt};
}

// ---------------------------------------------------------------- dispatch

inline SimilarityScore evaluate(Metric metric, const GrayImage& ref, const GrayImage& test,
                                const MetricParams& p = {}) {
  switch (metric) {
    case Metric::mse: return mse(ref, test);
    case Metric::psnr: return psnr(ref, test, p.peakval);
    case Metric::ssim: return ssim(ref, test, p.ssim);
    case Metric::msssim: return ms_ssim(ref, test, p.msssim);
    case Metric::cwssim: return cw_ssim(ref, test, p.cwssim);
    case Metric::vif: return vif(ref, test, p.vif);
  }
  throw Error(ErrorKind::invalid_argument, "unknown metric");
}

}  // namespace usim

namespace usim {

/// Scores many test images against one fixed reference, caching the
/// reference pyramid when the metric is CW-SSIM.
class ReferenceScorer {
 public:
  ReferenceScorer(Metric metric, GrayImage reference, MetricParams params = {})
      : metric_(metric), reference_(std::move(reference)), params_(std::move(params)) {
    if (metric_ == Metric::cwssim) reference_pyramid_ = decompose(reference_, params_.cwssim.pyramid);
  }

  double operator()(const GrayImage& test) const {
    if (metric_ == Metric::cwssim) {
      require_same_shape(reference_, test);
      return cw_ssim(*reference_pyramid_, decompose(test, params_.cwssim.pyramid), params_.cwssim)
          .value;
    }
    return evaluate(metric_, reference_, test, params_).value;
  }

  Metric metric() const noexcept { return metric_; }
  const GrayImage& reference() const noexcept { return reference_; }

 private:
  Metric metric_;
  GrayImage reference_;
  MetricParams params_;
  std::optional<Pyramid> reference_pyramid_;
};

}  // namespace usim
