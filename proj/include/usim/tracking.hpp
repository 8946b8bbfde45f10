// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "usim/error.hpp"
#include "usim/image.hpp"
#include "usim/metrics.hpp"
#include "usim/sequence.hpp"
#include "usim/stats.hpp"

namespace usim {

struct NccConfig {
  int roi_half = 12;
  int search_half = 24;  // candidate centers lie within search_half - roi_half
  bool subpixel = true;
};

struct MeanShiftConfig {
  int roi_half = 12;
  int bins = 32;
  int max_iters = 20;
  double epsilon = 0.1;
  std::vector<double> scale_steps = {0.9, 1.0, 1.1};
};

using TrackerConfig = std::variant<NccConfig, MeanShiftConfig>;

struct ResetConfig {
  Metric metric = Metric::cwssim;
  std::optional<double> tau;  // explicit threshold; wins over calibration
  Roi similarity_roi;
  int reference_frame = 0;
  int calibration_frames = 0;
  MetricParams metric_params;
};

/// Overwrites the estimate of every landmark at `frame` with estimate + offset.
/// Used to inject tracking failures in benchmarks.
struct Perturbation {
  int frame = 0;
  double dx = 0.0;
  double dy = 0.0;
};

struct TrackResult {
  LandmarkTracks estimates;
  std::vector<int> reset_events;
  std::vector<double> similarity_trace;  // empty unless reset is enabled
  std::vector<std::vector<double>> match_scores;  // NCC peak or Bhattacharyya coefficient
  std::vector<std::vector<double>> scales;        // mean-shift ROI scale; 1 for NCC
  std::vector<int> clamped_frames;  // frames whose search region had to be clamped
  std::optional<double> tau;

  friend bool operator==(const TrackResult&, const TrackResult&) = default;
};

// ---------------------------------------------------------------- NCC

/// Template matcher with a fixed frame-0 template per landmark.
class NccTracker {
 public:
  NccTracker(const GrayImage& first_frame, std::vector<Landmark> init, NccConfig cfg)
      : cfg_(cfg), init_(std::move(init)), state_(init_) {
    detail::require(cfg_.roi_half >= 1 && cfg_.search_half > cfg_.roi_half,
                    ErrorKind::invalid_argument, "NCC needs search_half > roi_half >= 1");
    for (const Landmark& p : init_) {
      require_inside(first_frame, p);
      GrayImage t = crop(first_frame, Roi{p, cfg_.roi_half, cfg_.roi_half});
      const double m = mean(t.pixels());
      double energy = 0.0;
      for (double& v : t.data()) {
        v -= m;
        energy += v * v;
      }
      if (!(energy > 0.0))
        throw Error(ErrorKind::zero_variance_template, "NCC template has zero variance");
      const double norm = std::sqrt(energy);
      for (double& v : t.data()) v /= norm;
      templates_.push_back(std::move(t));
    }
    scores_.assign(init_.size(), 1.0);
  }

  void step(const GrayImage& frame) {
    clamped_ = false;
    for (std::size_t k = 0; k < state_.size(); ++k) track_one(frame, k);
  }

  void reset() {
    state_ = init_;
    scores_.assign(init_.size(), 1.0);
  }

  void set_state(std::vector<Landmark> s) { state_ = std::move(s); }
  const std::vector<Landmark>& state() const noexcept { return state_; }
  const std::vector<double>& scores() const noexcept { return scores_; }
  std::vector<double> scales() const { return std::vector<double>(state_.size(), 1.0); }
  bool clamped() const noexcept { return clamped_; }

  /// NCC between the landmark-k template and the window centered at (cx, cy).
  double score_at(const GrayImage& frame, std::size_t k, int cx, int cy) const {
    const GrayImage& t = templates_[k];
    const int h = cfg_.roi_half;
    double sum = 0.0, sum_sq = 0.0, dot = 0.0;
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) {
        const double v = frame.clamped(cx - h + x, cy - h + y);
        sum += v;
        sum_sq += v * v;
        dot += v * t(x, y);
      }
    const double n = static_cast<double>(t.size());
    const double var = sum_sq - sum * sum / n;
    if (!(var > 1e-12 * std::max(1.0, sum_sq))) return 0.0;
    // The template is zero-mean, so dot already equals the centered product.
    return std::clamp(dot / std::sqrt(var), -1.0, 1.0);
  }

 private:
  static void require_inside(const GrayImage& f, const Landmark& p) {
    if (!(p.x >= 0 && p.y >= 0 && p.x < f.width() && p.y < f.height()))
      throw Error(ErrorKind::out_of_frame, "initial landmark outside the frame");
  }

  void track_one(const GrayImage& frame, std::size_t k) {
    const int radius = cfg_.search_half - cfg_.roi_half;
    int cx = round_to_grid(state_[k].x);
    int cy = round_to_grid(state_[k].y);
    const int lo_x = cfg_.search_half, hi_x = frame.width() - 1 - cfg_.search_half;
    const int lo_y = cfg_.search_half, hi_y = frame.height() - 1 - cfg_.search_half;
    if (lo_x <= hi_x && lo_y <= hi_y) {
      const int ncx = std::clamp(cx, lo_x, hi_x), ncy = std::clamp(cy, lo_y, hi_y);
      clamped_ = clamped_ || ncx != cx || ncy != cy;
      cx = ncx;
      cy = ncy;
    } else {
      clamped_ = true;
    }

    const int side = 2 * radius + 1;
    std::vector<double> surface(static_cast<std::size_t>(side * side));
    int best_i = -1;
    double best = -std::numeric_limits<double>::infinity();
    double best_dist = std::numeric_limits<double>::infinity();
    for (int oy = -radius; oy <= radius; ++oy)
      for (int ox = -radius; ox <= radius; ++ox) {
        const int i = (oy + radius) * side + (ox + radius);
        const double s = score_at(frame, k, cx + ox, cy + oy);
        surface[static_cast<std::size_t>(i)] = s;
        const double dist = std::hypot(cx + ox - state_[k].x, cy + oy - state_[k].y);
        if (s > best || (s == best && dist < best_dist)) {
          best = s;
          best_dist = dist;
          best_i = i;
        }
      }
    const int bx = best_i % side - radius, by = best_i / side - radius;
    double fx = 0.0, fy = 0.0;
    // A perfect match is already exact; parabolic refinement would only add
    // the asymmetry of the correlation surface.
    if (cfg_.subpixel && best < 1.0 - 1e-12) {
      auto at = [&](int ox, int oy) {
        return surface[static_cast<std::size_t>((oy + radius) * side + (ox + radius))];
      };
      if (std::abs(bx) < radius) fx = parabolic_offset(at(bx - 1, by), best, at(bx + 1, by));
      if (std::abs(by) < radius) fy = parabolic_offset(at(bx, by - 1), best, at(bx, by + 1));
    }
    const int tx = round_to_grid(init_[k].x), ty = round_to_grid(init_[k].y);
    state_[k] = {init_[k].x + (cx + bx - tx) + fx, init_[k].y + (cy + by - ty) + fy};
    scores_[k] = best;
  }

  static double parabolic_offset(double left, double peak, double right) {
    const double denom = left - 2.0 * peak + right;
    if (!(denom < 0.0)) return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
  }

  NccConfig cfg_;
  std::vector<GrayImage> templates_;
  std::vector<Landmark> init_;
  std::vector<Landmark> state_;
  std::vector<double> scores_;
  bool clamped_ = false;
};

// ---------------------------------------------------------------- mean shift

/// Epanechnikov-weighted intensity histogram of the window centered at
/// `center` with half extents (hx, hy). Pixels outside the frame are skipped.
inline std::vector<double> kernel_histogram(const GrayImage& frame, const Landmark& center,
                                            double hx, double hy, int bins) {
  detail::require(bins >= 2, ErrorKind::invalid_argument, "histogram needs at least 2 bins");
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  const int x0 = std::max(0, static_cast<int>(std::ceil(center.x - hx)));
  const int x1 = std::min(frame.width() - 1, static_cast<int>(std::floor(center.x + hx)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(center.y - hy)));
  const int y1 = std::min(frame.height() - 1, static_cast<int>(std::floor(center.y + hy)));
  double total = 0.0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double u = (x - center.x) / hx, v = (y - center.y) / hy;
      const double r2 = u * u + v * v;
      if (r2 >= 1.0) continue;
      const double w = 1.0 - r2;
      const int b = std::clamp(static_cast<int>(frame(x, y) * bins / 256.0), 0, bins - 1);
      hist[static_cast<std::size_t>(b)] += w;
      total += w;
    }
  if (!(total > 0.0)) throw Error(ErrorKind::empty_histogram, "kernel histogram is empty");
  for (double& h : hist) h /= total;
  return hist;
}

inline double bhattacharyya(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::sqrt(p[i] * q[i]);
  return s;
}

/// Kernel-histogram mean-shift tracker with scale adaptation.
class MeanShiftTracker {
 public:
  MeanShiftTracker(const GrayImage& first_frame, std::vector<Landmark> init, MeanShiftConfig cfg)
      : cfg_(std::move(cfg)), init_(std::move(init)), state_(init_) {
    detail::require(cfg_.bins >= 2 && cfg_.max_iters >= 1 && cfg_.roi_half >= 1,
                    ErrorKind::invalid_argument, "invalid mean-shift configuration");
    detail::require(!cfg_.scale_steps.empty(), ErrorKind::invalid_argument,
                    "mean-shift needs at least one scale step");
    for (const Landmark& p : init_) {
      if (!(p.x >= 0 && p.y >= 0 && p.x < first_frame.width() && p.y < first_frame.height()))
        throw Error(ErrorKind::out_of_frame, "initial landmark outside the frame");
      const double h = bandwidth(1.0);
      models_.push_back(kernel_histogram(first_frame, p, h, h, cfg_.bins));
    }
    scale_.assign(init_.size(), 1.0);
    scores_.assign(init_.size(), 1.0);
  }

  void step(const GrayImage& frame) {
    for (std::size_t k = 0; k < state_.size(); ++k) track_one(frame, k);
  }

  void reset() {
    state_ = init_;
    scale_.assign(init_.size(), 1.0);
    scores_.assign(init_.size(), 1.0);
  }

  void set_state(std::vector<Landmark> s) { state_ = std::move(s); }
  const std::vector<Landmark>& state() const noexcept { return state_; }
  const std::vector<double>& scores() const noexcept { return scores_; }
  std::vector<double> scales() const { return scale_; }
  bool clamped() const noexcept { return false; }

 private:
  double bandwidth(double scale) const { return cfg_.roi_half * scale + 1.0; }

  // One mean-shift iteration. The unweighted kernel centroid of the pixel
  // lattice is subtracted, so a perfect histogram match yields zero shift
  // even at sub-pixel positions.
  Landmark shift_once(const GrayImage& frame, std::size_t k, const Landmark& y, double h) const {
    const auto p = kernel_histogram(frame, y, h, h, cfg_.bins);
    const auto& q = models_[k];
    const int x0 = std::max(0, static_cast<int>(std::ceil(y.x - h)));
    const int x1 = std::min(frame.width() - 1, static_cast<int>(std::floor(y.x + h)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(y.y - h)));
    const int y1 = std::min(frame.height() - 1, static_cast<int>(std::floor(y.y + h)));
    double wsum = 0.0, wx = 0.0, wy = 0.0, usum = 0.0, ux = 0.0, uy = 0.0;
    for (int py = y0; py <= y1; ++py)
      for (int px = x0; px <= x1; ++px) {
        const double u = (px - y.x) / h, v = (py - y.y) / h;
        if (u * u + v * v >= 1.0) continue;
        const auto b = static_cast<std::size_t>(
            std::clamp(static_cast<int>(frame(px, py) * cfg_.bins / 256.0), 0, cfg_.bins - 1));
        const double w = p[b] > 0.0 ? std::sqrt(q[b] / p[b]) : 0.0;
        wsum += w;
        wx += w * (px - y.x);
        wy += w * (py - y.y);
        usum += 1.0;
        ux += px - y.x;
        uy += py - y.y;
      }
    if (!(wsum > 0.0)) return y;
    return {y.x + wx / wsum - ux / usum, y.y + wy / wsum - uy / usum};
  }

  void track_one(const GrayImage& frame, std::size_t k) {
    Landmark y = {std::clamp(state_[k].x, 0.0, frame.width() - 1.0),
                  std::clamp(state_[k].y, 0.0, frame.height() - 1.0)};
    const double h = bandwidth(scale_[k]);
    for (int it = 0; it < cfg_.max_iters; ++it) {
      Landmark next = shift_once(frame, k, y, h);
      next.x = std::clamp(next.x, 0.0, frame.width() - 1.0);
      next.y = std::clamp(next.y, 0.0, frame.height() - 1.0);
      const double moved = std::hypot(next.x - y.x, next.y - y.y);
      y = next;
      if (moved < cfg_.epsilon) break;
    }
    double best_rho = -1.0, best_step = 1.0;
    for (double s : cfg_.scale_steps) {
      const double hs = bandwidth(scale_[k] * s);
      const double rho = bhattacharyya(kernel_histogram(frame, y, hs, hs, cfg_.bins), models_[k]);
      if (rho > best_rho || (rho == best_rho && std::abs(s - 1.0) < std::abs(best_step - 1.0))) {
        best_rho = rho;
        best_step = s;
      }
    }
    scale_[k] = std::clamp(scale_[k] * best_step, 0.25, 4.0);
    state_[k] = y;
    scores_[k] = best_rho;
  }

  MeanShiftConfig cfg_;
  std::vector<std::vector<double>> models_;
  std::vector<Landmark> init_;
  std::vector<Landmark> state_;
  std::vector<double> scale_;
  std::vector<double> scores_;
};

// ---------------------------------------------------------------- drivers

namespace tracking_detail {

inline void apply_perturbations(std::span<const Perturbation> perturbations, int t,
                                std::vector<Landmark>& est) {
  for (const auto& p : perturbations)
    if (p.frame == t)
      for (auto& e : est) {
        e.x += p.dx;
        e.y += p.dy;
      }
}

template <typename Tracker>
void record(TrackResult& r, const Tracker& tr) {
  r.estimates.push_back(tr.state());
  r.match_scores.push_back(tr.scores());
  r.scales.push_back(tr.scales());
}

// Bare tracker when `scorer` is null; otherwise the similarity-reset wrapper.
template <typename Tracker>
TrackResult run(const Sequence& seq, Tracker tracker, std::span<const Perturbation> perturbations,
                const ReferenceScorer* scorer, const Roi* roi, double tau) {
  TrackResult r;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const int ti = static_cast<int>(t);
    bool fired = false;
    if (scorer) {
      const double sim = (*scorer)(crop(seq.frames[t], *roi));
      r.similarity_trace.push_back(sim);
      fired = sim > tau;
    }
    if (fired) {
      tracker.reset();
      r.reset_events.push_back(ti);
    } else if (t > 0) {
      tracker.step(seq.frames[t]);
      if (tracker.clamped()) r.clamped_frames.push_back(ti);
    }
    if (!perturbations.empty()) {
      auto est = tracker.state();
      const auto before = est;
      apply_perturbations(perturbations, ti, est);
      if (est != before) tracker.set_state(std::move(est));
    }
    record(r, tracker);
  }
  return r;
}

inline void require_init(const Sequence& seq, const std::vector<Landmark>& init) {
  validate(seq);
  detail::require(!init.empty(), ErrorKind::invalid_argument, "no landmarks to track");
}

}  // namespace tracking_detail

inline TrackResult ncc_track(const Sequence& seq, const std::vector<Landmark>& init,
                             const NccConfig& cfg = {},
                             std::span<const Perturbation> perturbations = {}) {
  tracking_detail::require_init(seq, init);
  return tracking_detail::run(seq, NccTracker(seq.frames.front(), init, cfg), perturbations,
                              nullptr, nullptr, 0.0);
}

inline TrackResult mean_shift_track(const Sequence& seq, const std::vector<Landmark>& init,
                                    const MeanShiftConfig& cfg = {},
                                    std::span<const Perturbation> perturbations = {}) {
  tracking_detail::require_init(seq, init);
  return tracking_detail::run(seq, MeanShiftTracker(seq.frames.front(), init, cfg), perturbations,
                              nullptr, nullptr, 0.0);
}

inline TrackResult track(const Sequence& seq, const std::vector<Landmark>& init,
                         const TrackerConfig& cfg,
                         std::span<const Perturbation> perturbations = {}) {
  return std::visit(
      [&](const auto& c) -> TrackResult {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, NccConfig>)
          return ncc_track(seq, init, c, perturbations);
        else
          return mean_shift_track(seq, init, c, perturbations);
      },
      cfg);
}

/// Similarity of every frame's ROI to the reference frame's ROI.
inline std::vector<double> similarity_trace(const Sequence& seq, const ResetConfig& reset,
                                            std::size_t first, std::size_t last) {
  const ReferenceScorer scorer(
      reset.metric, crop(seq.frames.at(static_cast<std::size_t>(reset.reference_frame)),
                         reset.similarity_roi),
      reset.metric_params);
  std::vector<double> out;
  for (std::size_t t = first; t < last && t < seq.size(); ++t)
    out.push_back(scorer(crop(seq.frames[t], reset.similarity_roi)));
  return out;
}

/// Threshold from the first C frames after the reference frame:
/// max(trace) - population_std(trace). The reference frame itself is left
/// out since it always scores a perfect match.
inline double calibrate_threshold(const Sequence& seq, const ResetConfig& reset) {
  detail::require(reset.calibration_frames > 0, ErrorKind::invalid_argument,
                  "calibration needs calibration_frames > 0");
  std::vector<double> trace;
  const auto all = similarity_trace(seq, reset, 0,
                                    static_cast<std::size_t>(reset.calibration_frames) + 1);
  for (std::size_t t = 0; t < all.size(); ++t)
    if (static_cast<int>(t) != reset.reference_frame) trace.push_back(all[t]);
  detail::require(!trace.empty(), ErrorKind::invalid_argument,
                  "calibration needs at least one non-reference frame");
  const double hi = *std::max_element(trace.begin(), trace.end());
  return hi - population_std(trace);
}

inline double resolve_threshold(const Sequence& seq, const ResetConfig& reset) {
  if (reset.tau) {
    detail::require(*reset.tau > 0.0, ErrorKind::invalid_argument, "reset threshold must be > 0");
    return *reset.tau;
  }
  if (reset.calibration_frames > 0) return calibrate_threshold(seq, reset);
  throw Error(ErrorKind::invalid_argument, "reset needs an explicit tau or calibration frames");
}

/// Before each frame is tracked, its ROI is compared with the reference ROI;
/// a similarity above tau snaps every landmark (and tracker state) back to
/// the frame-0 annotation instead of tracking that frame.
inline TrackResult track_with_reset(const Sequence& seq, const std::vector<Landmark>& init,
                                    const TrackerConfig& cfg, const ResetConfig& reset,
                                    std::span<const Perturbation> perturbations = {}) {
  tracking_detail::require_init(seq, init);
  detail::require(reset.metric != Metric::mse, ErrorKind::invalid_argument,
                  "reset needs a similarity metric; mse is a distance");
  detail::require(reset.reference_frame >= 0 &&
                      static_cast<std::size_t>(reset.reference_frame) < seq.size(),
                  ErrorKind::invalid_argument, "reset reference frame out of range");
  const double tau = resolve_threshold(seq, reset);
  const ReferenceScorer scorer(
      reset.metric, crop(seq.frames[static_cast<std::size_t>(reset.reference_frame)],
                         reset.similarity_roi),
      reset.metric_params);
  TrackResult r = std::visit(
      [&](const auto& c) -> TrackResult {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, NccConfig>)
          return tracking_detail::run(seq, NccTracker(seq.frames.front(), init, c), perturbations,
                                      &scorer, &reset.similarity_roi, tau);
        else
          return tracking_detail::run(seq, MeanShiftTracker(seq.frames.front(), init, c),
                                      perturbations, &scorer, &reset.similarity_roi, tau);
      },
      cfg);
  r.tau = tau;
  return r;
}

struct TrackingError {
  double mean_mm = 0.0;
  double std_mm = 0.0;            // population std over (frame, landmark) pairs
  std::vector<double> per_frame;  // mean over landmarks, mm
};

inline TrackingError tracking_error(const LandmarkTracks& estimates, const LandmarkTracks& truth,
                                    double pixel_spacing_mm) {
  detail::require(estimates.size() == truth.size() && !truth.empty(), ErrorKind::length_mismatch,
                  "tracking error: frame counts differ");
  detail::require(pixel_spacing_mm > 0.0, ErrorKind::invalid_argument,
                  "pixel spacing must be positive");
  std::vector<double> all;
  TrackingError e;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    detail::require(estimates[t].size() == truth[t].size() && !truth[t].empty(),
                    ErrorKind::length_mismatch, "tracking error: landmark counts differ");
    CompensatedSum frame;
    for (std::size_t k = 0; k < truth[t].size(); ++k) {
      const double d = std::hypot(estimates[t][k].x - truth[t][k].x,
                                  estimates[t][k].y - truth[t][k].y) *
                       pixel_spacing_mm;
      all.push_back(d);
      frame.add(d);
    }
    e.per_frame.push_back(frame.value() / static_cast<double>(truth[t].size()));
  }
  e.mean_mm = mean(all);
  e.std_mm = population_std(all);
  return e;
}

inline TrackingError tracking_error(const TrackResult& result, const LandmarkTracks& truth,
                                    double pixel_spacing_mm) {
  return tracking_error(result.estimates, truth, pixel_spacing_mm);
}

}  // namespace usim
