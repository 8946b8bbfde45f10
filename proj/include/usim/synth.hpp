// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "usim/error.hpp"
#include "usim/image.hpp"
#include "usim/sequence.hpp"

namespace usim {

struct Disc {
  Landmark center;
  double radius = 8.0;
  double intensity = 200.0;
};

struct PhantomSpec {
  int width = 256;
  int height = 256;
  double background_mean = 80.0;
  double background_texture_sigma = 10.0;
  // Gaussian correlation length of the texture; 0 gives white texture. The
  // texture is rescaled after blurring so its std stays at the sigma above.
  double texture_blur_sigma = 0.0;
  std::vector<Disc> landmarks;
};

struct SpeckleSpec {
  double alpha = 0.0;  // 0 = clean, 1 = fully developed multiplicative speckle
  double rayleigh_sigma = 1.0;
  std::uint64_t seed = 0;
  // Sequences leave the reference frame clean by default: it plays the role
  // of the noise-free ground-truth image every other frame is compared with.
  bool speckle_reference = false;
};

enum class MotionAxis { lateral, axial };

enum class MotionProfile {
  one_sided,  // amplitude * (1 - cos(2 pi t / period + phase)) / 2
  sine,       // amplitude * sin(2 pi t / period + phase)
};

struct MotionSpec {
  double amplitude = 8.0;
  int period = 30;
  int n_frames = 90;
  double phase = 0.0;
  MotionAxis axis = MotionAxis::lateral;
  MotionProfile profile = MotionProfile::one_sided;
};

struct SyntheticSequence {
  Sequence sequence;     // landmarks field holds the ground truth
  LandmarkTracks truth;  // same data, kept separate for convenience
};

namespace synth_detail {

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kTextureTag = 0x7e47;
constexpr std::uint64_t kSpeckleTag = 0x5bec;

// Fraction of the unit pixel square centered at (px, py) covered by the disc.
inline double disc_coverage(double px, double py, const Landmark& c, double r) {
  const double d = std::hypot(px - c.x, py - c.y);
  constexpr double half_diag = 0.7071067811865476;
  if (d <= r - half_diag) return 1.0;
  if (d >= r + half_diag) return 0.0;
  constexpr int n = 16;
  int inside = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double sx = px - 0.5 + (i + 0.5) / n;
      const double sy = py - 0.5 + (j + 0.5) / n;
      if ((sx - c.x) * (sx - c.x) + (sy - c.y) * (sy - c.y) <= r * r) ++inside;
    }
  return static_cast<double>(inside) / (n * n);
}

inline void require_disc_in_frame(const Disc& d, int width, int height) {
  const bool ok = d.radius > 0.0 && d.center.x - d.radius >= 0.0 && d.center.y - d.radius >= 0.0 &&
                  d.center.x + d.radius <= width - 1.0 && d.center.y + d.radius <= height - 1.0;
  if (!ok) throw Error(ErrorKind::out_of_frame, "landmark disc does not fit inside the frame");
}

}  // namespace synth_detail

/// Static background: mean plus Gaussian texture, clamped to [0, 255].
inline GrayImage make_background(const PhantomSpec& spec, std::uint64_t seed) {
  GrayImage bg(spec.width, spec.height, spec.background_mean);
  if (spec.background_texture_sigma <= 0.0) return bg;
  auto rng = synth_detail::make_rng(seed, 0, synth_detail::kTextureTag);
  std::normal_distribution<double> normal(0.0, 1.0);
  GrayImage noise(spec.width, spec.height);
  for (double& v : noise.data()) v = normal(rng);
  double gain = spec.background_texture_sigma;
  if (spec.texture_blur_sigma > 0.0) {
    noise = gaussian_blur(noise, spec.texture_blur_sigma);
    const int half = std::max(1, static_cast<int>(std::ceil(3.0 * spec.texture_blur_sigma)));
    const auto k = gaussian_kernel(2 * half + 1, spec.texture_blur_sigma);
    double energy = 0.0;
    for (double v : k) energy += v * v;
    gain /= energy;  // 2-D kernel energy is the square of the 1-D one
  }
  for (std::size_t i = 0; i < bg.size(); ++i)
    bg.data()[i] = std::clamp(bg.data()[i] + gain * noise.data()[i], 0.0, 255.0);
  return bg;
}

/// Composites anti-aliased discs (coverage-weighted edges) onto a background.
inline GrayImage render_discs(GrayImage background, const std::vector<Disc>& discs) {
  for (const Disc& d : discs) {
    synth_detail::require_disc_in_frame(d, background.width(), background.height());
    const int x0 = std::max(0, static_cast<int>(std::floor(d.center.x - d.radius - 1)));
    const int x1 = std::min(background.width() - 1, static_cast<int>(std::ceil(d.center.x + d.radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(d.center.y - d.radius - 1)));
    const int y1 = std::min(background.height() - 1, static_cast<int>(std::ceil(d.center.y + d.radius + 1)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double cov = synth_detail::disc_coverage(x, y, d.center, d.radius);
        if (cov > 0.0) background(x, y) = (1.0 - cov) * background(x, y) + cov * d.intensity;
      }
  }
  return background;
}

inline GrayImage make_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  return render_discs(make_background(spec, seed), spec.landmarks);
}

/// Multiplicative Rayleigh speckle blended with the identity:
/// out = clamp(in * ((1 - alpha) + alpha * r), 0, 255), r a unit-mean Rayleigh variate.
inline GrayImage apply_speckle(const GrayImage& image, const SpeckleSpec& spec,
                               std::uint64_t stream = 0) {
  detail::require(spec.alpha >= 0.0 && spec.alpha <= 1.0, ErrorKind::invalid_argument,
                  "speckle alpha must lie in [0, 1]");
  detail::require(spec.rayleigh_sigma > 0.0, ErrorKind::invalid_argument,
                  "rayleigh_sigma must be positive");
  if (spec.alpha == 0.0) return image;
  auto rng = synth_detail::make_rng(spec.seed, stream, synth_detail::kSpeckleTag);
  // Weibull with shape 2 and scale sigma*sqrt(2) is Rayleigh(sigma).
  std::weibull_distribution<double> rayleigh(2.0, spec.rayleigh_sigma * std::numbers::sqrt2);
  const double unit = spec.rayleigh_sigma * std::sqrt(std::numbers::pi / 2.0);
  GrayImage out(image.width(), image.height());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double r = rayleigh(rng) / unit;
    out.data()[i] = std::clamp(image.data()[i] * ((1.0 - spec.alpha) + spec.alpha * r), 0.0, 255.0);
  }
  return out;
}

inline double displacement_at(const MotionSpec& m, int t) {
  const double angle = 2.0 * std::numbers::pi * t / m.period + m.phase;
  switch (m.profile) {
    case MotionProfile::one_sided: return m.amplitude * (1.0 - std::cos(angle)) / 2.0;
    case MotionProfile::sine: return m.amplitude * std::sin(angle);
  }
  return 0.0;
}

/// Sequence whose landmarks move periodically over a static textured
/// background. Frame 0 is the reference; with speckle, every later frame t
/// draws its own noise field from (speckle.seed, t).
inline SyntheticSequence periodic_sequence(const PhantomSpec& phantom, const MotionSpec& motion,
                                           const std::optional<SpeckleSpec>& speckle,
                                           std::uint64_t seed) {
  detail::require(motion.amplitude >= 0.0, ErrorKind::invalid_argument, "amplitude must be >= 0");
  detail::require(motion.period >= 2, ErrorKind::invalid_argument, "period must be >= 2");
  detail::require(motion.n_frames >= 1, ErrorKind::invalid_argument, "n_frames must be >= 1");

  const GrayImage background = make_background(phantom, seed);
  SyntheticSequence out;
  out.sequence.frames.reserve(static_cast<std::size_t>(motion.n_frames));
  for (int t = 0; t < motion.n_frames; ++t) {
    const double d = displacement_at(motion, t);
    std::vector<Disc> moved = phantom.landmarks;
    std::vector<Landmark> centers;
    for (Disc& disc : moved) {
      (motion.axis == MotionAxis::lateral ? disc.center.x : disc.center.y) += d;
      synth_detail::require_disc_in_frame(disc, phantom.width, phantom.height);
      centers.push_back(disc.center);
    }
    GrayImage frame = render_discs(background, moved);
    if (speckle && (t != 0 || speckle->speckle_reference))
      frame = apply_speckle(frame, *speckle, static_cast<std::uint64_t>(t));
    out.sequence.frames.push_back(std::move(frame));
    out.truth.push_back(std::move(centers));
  }
  out.sequence.reference_frame = 0;
  out.sequence.landmarks = out.truth;
  return out;
}

}  // namespace usim
