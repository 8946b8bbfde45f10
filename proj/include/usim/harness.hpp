// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "usim/error.hpp"
#include "usim/format.hpp"
#include "usim/metrics.hpp"
#include "usim/sequence.hpp"
#include "usim/stats.hpp"
#include "usim/synth.hpp"
#include "usim/tracking.hpp"

namespace usim {

// ---------------------------------------------------------------- benchmarks

/// Fixed synthetic set-ups shared by the CLI studies and the acceptance suite.
namespace benchmark {

/// 256x256 frame, smoothly varying tissue texture, three bright inclusions.
inline PhantomSpec standard_phantom() {
  PhantomSpec p;
  p.width = p.height = 256;
  p.background_texture_sigma = 20.0;
  p.texture_blur_sigma = 2.0;
  p.landmarks = {{{96, 128}, 10, 200}, {{160, 96}, 8, 180}, {{160, 160}, 12, 160}};
  return p;
}

/// Same texture statistics and inclusion layout, scaled to 128x128.
inline PhantomSpec smooth_phantom_128() {
  PhantomSpec p;
  p.width = p.height = 128;
  p.background_texture_sigma = 20.0;
  p.texture_blur_sigma = 2.0;
  p.landmarks = {{{40, 64}, 10, 200}, {{88, 50}, 8, 180}, {{80, 94}, 12, 160}};
  return p;
}

inline MotionSpec standard_motion() { return MotionSpec{8.0, 30, 90, 0.0}; }

inline SpeckleSpec standard_speckle(std::uint64_t seed) { return SpeckleSpec{0.3, 1.0, seed}; }

/// Correlation benchmark: speckled frames against a clean reference frame.
inline SyntheticSequence standard_sequence(std::uint64_t seed, bool with_speckle = true) {
  std::optional<SpeckleSpec> speckle;
  if (with_speckle) speckle = standard_speckle(seed);
  return periodic_sequence(standard_phantom(), standard_motion(), speckle, seed);
}

/// Tracking benchmark: like the standard sequence but the annotated first
/// frame is speckled too, as any acquired frame would be.
inline SyntheticSequence tracking_sequence(std::uint64_t seed) {
  SpeckleSpec s = standard_speckle(seed);
  s.speckle_reference = true;
  return periodic_sequence(standard_phantom(), standard_motion(), s, seed);
}

/// Simulated tracking losses: mid-cycle lateral jumps well beyond the
/// trackers' capture range.
inline std::vector<Perturbation> drift_injection() {
  return {{10, 25.0, 0.0}, {40, 25.0, 0.0}, {70, 25.0, 0.0}};
}

inline ResetConfig standard_reset() {
  ResetConfig r;
  r.metric = Metric::cwssim;
  r.similarity_roi = Roi{{128, 128}, 64, 64};
  r.calibration_frames = 30;
  return r;
}

inline std::vector<double> standard_alphas() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

}  // namespace benchmark

// ---------------------------------------------------------------- traces

struct TraceColumn {
  Metric metric = Metric::ssim;
  std::vector<double> raw;
  std::optional<std::vector<double>> normalized;
  std::optional<std::string> error;  // why `normalized` is absent
};

struct TraceReport {
  int reference_frame = 0;
  std::vector<TraceColumn> columns;

  const TraceColumn& column(Metric m) const {
    for (const auto& c : columns)
      if (c.metric == m) return c;
    throw Error(ErrorKind::invalid_argument, "metric not in trace: " + std::string(to_string(m)));
  }
};

/// Every frame (ROI) scored against the reference frame (ROI), one column per
/// metric, plus a min-max normalized copy of each column.
inline TraceReport run_trace(const Sequence& seq, std::span<const Metric> metrics,
                             const std::optional<Roi>& roi = std::nullopt,
                             const MetricParams& params = {}) {
  validate(seq);
  detail::require(!metrics.empty(), ErrorKind::invalid_argument, "trace needs at least one metric");
  auto view = [&](const GrayImage& f) { return roi ? crop(f, *roi) : f; };
  TraceReport report;
  report.reference_frame = seq.reference_frame;
  for (Metric m : metrics) {
    const ReferenceScorer scorer(m, view(seq.reference()), params);
    TraceColumn col;
    col.metric = m;
    for (const auto& f : seq.frames) col.raw.push_back(scorer(view(f)));
    try {
      col.normalized = normalize_series(col.raw);
    } catch (const Error& e) {
      col.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    report.columns.push_back(std::move(col));
  }
  return report;
}

/// frame, then <metric>, <metric>_norm per metric. Columns whose
/// normalization failed are left empty and explained in a leading comment.
inline std::string to_csv(const TraceReport& r) {
  std::ostringstream os;
  for (const auto& c : r.columns)
    if (c.error) os << "# " << to_string(c.metric) << "_norm unavailable: " << *c.error << '\n';
  os << "frame";
  for (const auto& c : r.columns) os << ',' << to_string(c.metric) << ',' << to_string(c.metric) << "_norm";
  os << '\n';
  const std::size_t n = r.columns.empty() ? 0 : r.columns.front().raw.size();
  for (std::size_t t = 0; t < n; ++t) {
    os << t;
    for (const auto& c : r.columns) {
      os << ',' << format_number(c.raw[t]) << ',';
      if (c.normalized) os << format_number((*c.normalized)[t]);
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- correlation

struct CorrelationEntry {
  Metric metric = Metric::ssim;
  std::optional<double> abs_pearson;
  int sign = 0;  // sign of r; 0 when undefined
  std::optional<std::string> error;
};

/// Entries with a value come first, by decreasing |r|; failed metrics follow
/// in request order.
struct CorrelationReport {
  std::vector<CorrelationEntry> ranking;
};

/// Lateral coordinate of the first landmark in every frame.
inline std::vector<double> lateral_displacement(const LandmarkTracks& tracks) {
  std::vector<double> out;
  for (const auto& frame : tracks) {
    detail::require(!frame.empty(), ErrorKind::invalid_argument, "frame without landmarks");
    out.push_back(frame.front().x);
  }
  return out;
}

/// |Pearson r| between displacement and each normalized trace column. The
/// reference frame is left out: its score is the metric's identity value by
/// construction, not a measurement, and as a lone extreme it would dominate r.
inline CorrelationReport correlate(const TraceReport& trace, std::span<const double> displacement) {
  CorrelationReport report;
  std::vector<CorrelationEntry> failed;
  const auto skip_reference = [&](std::span<const double> xs) {
    std::vector<double> out;
    for (std::size_t t = 0; t < xs.size(); ++t)
      if (static_cast<int>(t) != trace.reference_frame) out.push_back(xs[t]);
    return out;
  };
  const std::vector<double> disp = skip_reference(displacement);
  for (const auto& c : trace.columns) {
    CorrelationEntry e;
    e.metric = c.metric;
    if (!c.normalized) {
      e.error = c.error;
      failed.push_back(std::move(e));
      continue;
    }
    try {
      detail::require(c.normalized->size() == displacement.size(), ErrorKind::length_mismatch,
                      "trace and displacement lengths differ");
      const double r = pearson(disp, skip_reference(*c.normalized));
      e.abs_pearson = std::abs(r);
      e.sign = (r > 0) - (r < 0);
      report.ranking.push_back(std::move(e));
    } catch (const Error& err) {
      e.error = std::string(to_string(err.kind())) + ": " + err.what();
      failed.push_back(std::move(e));
    }
  }
  std::stable_sort(report.ranking.begin(), report.ranking.end(),
                   [](const CorrelationEntry& a, const CorrelationEntry& b) {
                     return *a.abs_pearson > *b.abs_pearson;
                   });
  for (auto& e : failed) report.ranking.push_back(std::move(e));
  return report;
}

inline CorrelationReport run_correlation_study(const Sequence& seq, std::span<const Metric> metrics,
                                               const std::optional<Roi>& roi = std::nullopt,
                                               const MetricParams& params = {}) {
  detail::require(seq.landmarks.has_value(), ErrorKind::invalid_argument,
                  "correlation study needs ground-truth landmarks");
  const TraceReport trace = run_trace(seq, metrics, roi, params);
  const auto displacement = lateral_displacement(*seq.landmarks);
  return correlate(trace, displacement);
}

inline nlohmann::ordered_json to_json(const CorrelationReport& r) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : r.ranking) {
    nlohmann::ordered_json j;
    j["metric"] = std::string(to_string(e.metric));
    if (e.abs_pearson) {
      // Round-trip through the report text form so JSON and CSV agree.
      j["abs_pearson"] = std::stod(format_number(*e.abs_pearson));
      j["sign"] = e.sign;
    } else {
      j["abs_pearson"] = nullptr;
      j["error"] = e.error.value_or("unknown");
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

// ---------------------------------------------------------------- noise sweep

struct SweepRow {
  double alpha = 0.0;
  Metric metric = Metric::ssim;
  double mean_value = 0.0;
  std::optional<double> normalized_value;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // alpha-major, metric-minor
  std::vector<std::string> notes;

  /// Mean values of one metric along the alpha axis.
  std::vector<double> series(Metric m) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.metric == m) out.push_back(r.mean_value);
    return out;
  }
  std::vector<double> normalized_series(Metric m) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.metric == m && r.normalized_value) out.push_back(*r.normalized_value);
    return out;
  }
};

/// Seeds first_seed .. first_seed + seeds - 1 each give a phantom and an
/// independent speckle field per alpha; scores are averaged over seeds.
inline SweepReport run_noise_sweep(const PhantomSpec& phantom, std::span<const double> alphas,
                                   std::span<const Metric> metrics, int seeds,
                                   std::uint64_t first_seed = 0, const MetricParams& params = {}) {
  detail::require(!alphas.empty() && !metrics.empty(), ErrorKind::invalid_argument,
                  "sweep needs alphas and metrics");
  detail::require(seeds >= 1, ErrorKind::invalid_argument, "sweep needs at least one seed");
  std::vector<std::vector<CompensatedSum>> sums(alphas.size(),
                                                std::vector<CompensatedSum>(metrics.size()));
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(s);
    const GrayImage clean = make_phantom(phantom, seed);
    std::vector<ReferenceScorer> scorers;
    for (Metric m : metrics) scorers.emplace_back(m, clean, params);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      const GrayImage noisy = apply_speckle(clean, SpeckleSpec{alphas[a], 1.0, seed},
                                            static_cast<std::uint64_t>(a));
      for (std::size_t k = 0; k < metrics.size(); ++k) sums[a][k].add(scorers[k](noisy));
    }
  }
  SweepReport report;
  for (std::size_t a = 0; a < alphas.size(); ++a)
    for (std::size_t k = 0; k < metrics.size(); ++k)
      report.rows.push_back({alphas[a], metrics[k], sums[a][k].value() / seeds, std::nullopt});
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    std::vector<double> col;
    for (std::size_t a = 0; a < alphas.size(); ++a) col.push_back(sums[a][k].value() / seeds);
    try {
      const auto norm = normalize_series(col);
      for (std::size_t a = 0; a < alphas.size(); ++a)
        report.rows[a * metrics.size() + k].normalized_value = norm[a];
    } catch (const Error& e) {
      report.notes.push_back(std::string(to_string(metrics[k])) + " normalized_value unavailable: " +
                             std::string(to_string(e.kind())) + ": " + e.what());
    }
  }
  return report;
}

inline std::string to_csv(const SweepReport& r) {
  std::ostringstream os;
  for (const auto& n : r.notes) os << "# " << n << '\n';
  os << "alpha,metric,mean_value,normalized_value\n";
  for (const auto& row : r.rows) {
    os << format_number(row.alpha) << ',' << to_string(row.metric) << ','
       << format_number(row.mean_value) << ',';
    if (row.normalized_value) os << format_number(*row.normalized_value);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- tracking

inline std::string_view tracker_name(const TrackerConfig& cfg) {
  return std::holds_alternative<NccConfig>(cfg) ? "ncc" : "meanshift";
}

/// frame, landmark_id, x_px, y_px, reset_fired, similarity_value.
inline std::string to_csv(const TrackResult& r) {
  std::ostringstream os;
  os << "frame,landmark_id,x_px,y_px,reset_fired,similarity_value\n";
  for (std::size_t t = 0; t < r.estimates.size(); ++t) {
    const bool fired = std::find(r.reset_events.begin(), r.reset_events.end(),
                                 static_cast<int>(t)) != r.reset_events.end();
    for (std::size_t k = 0; k < r.estimates[t].size(); ++k) {
      os << t << ',' << k << ',' << format_number(r.estimates[t][k].x) << ','
         << format_number(r.estimates[t][k].y) << ',' << (fired ? 1 : 0) << ',';
      if (t < r.similarity_trace.size()) os << format_number(r.similarity_trace[t]);
      os << '\n';
    }
  }
  return os.str();
}

struct TrackingArm {
  std::string tracker;
  std::string arm;  // "bare" or "reset"
  TrackingError error;
  std::size_t reset_events = 0;
  TrackResult result;
};

struct TrackingExperiment {
  std::vector<TrackingArm> arms;  // per tracker: bare, then reset

  const TrackingArm& arm(std::string_view tracker, std::string_view which) const {
    for (const auto& a : arms)
      if (a.tracker == tracker && a.arm == which) return a;
    throw Error(ErrorKind::invalid_argument, "no such tracking arm");
  }
};

/// Runs every tracker twice on the same input, bare and reset-wrapped, with
/// the same injected perturbations, and scores both against ground truth.
inline TrackingExperiment run_tracking_experiment(const Sequence& seq,
                                                  std::span<const TrackerConfig> trackers,
                                                  const ResetConfig& reset,
                                                  std::span<const Perturbation> perturbations = {}) {
  detail::require(seq.landmarks.has_value(), ErrorKind::invalid_argument,
                  "tracking experiment needs ground-truth landmarks");
  detail::require(!trackers.empty(), ErrorKind::invalid_argument, "no trackers requested");
  const LandmarkTracks& truth = *seq.landmarks;
  const std::vector<Landmark>& init = truth.front();
  TrackingExperiment ex;
  for (const auto& cfg : trackers) {
    const std::string name(tracker_name(cfg));
    TrackResult bare = track(seq, init, cfg, perturbations);
    TrackResult wrapped = track_with_reset(seq, init, cfg, reset, perturbations);
    const auto eb = tracking_error(bare, truth, seq.pixel_spacing_mm);
    const auto er = tracking_error(wrapped, truth, seq.pixel_spacing_mm);
    const std::size_t n = wrapped.reset_events.size();
    ex.arms.push_back({name, "bare", eb, 0, std::move(bare)});
    ex.arms.push_back({name, "reset", er, n, std::move(wrapped)});
  }
  return ex;
}

inline std::string summary_csv(const TrackingExperiment& ex) {
  std::ostringstream os;
  os << "tracker,arm,mean_mm,std_mm,reset_events\n";
  for (const auto& a : ex.arms)
    os << a.tracker << ',' << a.arm << ',' << format_number(a.error.mean_mm) << ','
       << format_number(a.error.std_mm) << ',' << a.reset_events << '\n';
  return os.str();
}

/// Paired per-frame errors: frame, tracker, bare_mm, reset_mm.
inline std::string series_csv(const TrackingExperiment& ex) {
  std::ostringstream os;
  os << "frame,tracker,bare_mm,reset_mm\n";
  for (std::size_t i = 0; i + 1 < ex.arms.size(); i += 2) {
    const auto& b = ex.arms[i];
    const auto& r = ex.arms[i + 1];
    for (std::size_t t = 0; t < b.error.per_frame.size(); ++t)
      os << t << ',' << b.tracker << ',' << format_number(b.error.per_frame[t]) << ','
         << format_number(r.error.per_frame[t]) << '\n';
  }
  return os.str();
}

}  // namespace usim
