// SPDX-License-Identifier: Apache-2.0
//
// usim: ultrasound image-similarity metrics, synthetic benchmarks and
// similarity-triggered tracking reset. Run `usim --help` for subcommands.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "usim/error.hpp"
#include "usim/format.hpp"
#include "usim/harness.hpp"
#include "usim/metrics.hpp"
#include "usim/pgm.hpp"
#include "usim/pyramid.hpp"
#include "usim/sequence.hpp"
#include "usim/synth.hpp"
#include "usim/tracking.hpp"

namespace fs = std::filesystem;
using namespace usim;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<Metric> parse_metrics(const std::string& list) {
  std::vector<Metric> out;
  if (list == "all") return {kAllMetrics.begin(), kAllMetrics.end()};
  for (const auto& name : split(list, ',')) out.push_back(parse_metric(name));
  if (out.empty()) throw Error(ErrorKind::invalid_argument, "empty metric list");
  return out;
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  for (const auto& item : split(list, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_argument, "not a number: " + item);
    }
  }
  return out;
}

std::optional<Roi> parse_roi(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto v = parse_doubles(s);
  if (v.size() != 4 || v[2] < 0 || v[3] < 0)
    throw Error(ErrorKind::invalid_argument, "--roi expects x,y,half_width,half_height");
  return Roi{{v[0], v[1]}, static_cast<int>(v[2]), static_cast<int>(v[3])};
}

// Writes to `path`, or stdout when the path is empty or "-".
void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::io_error, "write failed: " + path);
}

Sequence sequence_of(const SyntheticSequence& s) { return s.sequence; }

struct Globals {
  std::uint64_t seed = 0;
  double peakval = 255.0;
};

MetricParams metric_params(const Globals& g) {
  MetricParams p;
  p.peakval = g.peakval;
  return p;
}

// ---------------------------------------------------------------- compare

// Debug view of a decomposition: one PGM per band (magnitude scaled so the
// band maximum maps to 255) plus a CSV of band energies.
void dump_pyramid(const Pyramid& pyr, const fs::path& dir) {
  fs::create_directories(dir);
  auto energy_of = [](const auto& grid) {
    CompensatedSum s;
    for (const auto& v : grid.data()) s.add(std::norm(v));
    return s.value();
  };
  auto save_scaled = [&](const auto& grid, const std::string& name) {
    GrayImage mag(grid.width(), grid.height());
    double peak = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      mag.data()[i] = std::abs(grid.data()[i]);
      peak = std::max(peak, mag.data()[i]);
    }
    if (peak > 0.0)
      for (double& v : mag.data()) v *= 255.0 / peak;
    save_pgm(mag, dir / name);
  };
  std::ostringstream csv;
  csv << "band,level,orientation,width,height,energy\n";
  csv << "highpass,,," << pyr.highpass_residual.width() << ',' << pyr.highpass_residual.height()
      << ',' << format_number(energy_of(pyr.highpass_residual)) << '\n';
  save_scaled(pyr.highpass_residual, "highpass.pgm");
  for (const auto& sb : pyr.subbands) {
    csv << "oriented," << sb.level << ',' << sb.orientation << ',' << sb.coeffs.width() << ','
        << sb.coeffs.height() << ',' << format_number(energy_of(sb.coeffs)) << '\n';
    save_scaled(sb.coeffs,
                "band_l" + std::to_string(sb.level) + "_o" + std::to_string(sb.orientation) + ".pgm");
  }
  csv << "lowpass,,," << pyr.lowpass_residual.width() << ',' << pyr.lowpass_residual.height()
      << ',' << format_number(energy_of(pyr.lowpass_residual)) << '\n';
  save_scaled(pyr.lowpass_residual, "lowpass.pgm");
  emit(csv.str(), (dir / "energies.csv").string());
}


void setup_compare(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("compare", "Score a test image against a reference image");
  auto ref = std::make_shared<std::string>();
  auto test = std::make_shared<std::string>();
  auto metrics = std::make_shared<std::string>("all");
  auto dump = std::make_shared<std::string>();
  cmd->add_option("ref", *ref, "reference PGM")->required();
  cmd->add_option("test", *test, "test PGM")->required();
  cmd->add_option("--metric", *metrics, "metric name, comma list, or 'all'");
  cmd->add_option("--dump-pyramid", *dump,
                  "directory for per-band magnitude PGMs and energies of the reference");
  cmd->callback([=, &g] {
    const GrayImage a = load_pgm(*ref);
    const GrayImage b = load_pgm(*test);
    const MetricParams params = metric_params(g);
    std::ostringstream os;
    os << "metric,value\n";
    for (Metric m : parse_metrics(*metrics))
      os << to_string(m) << ',' << format_number(evaluate(m, a, b, params).value) << '\n';
    std::cout << os.str();
    if (!dump->empty()) dump_pyramid(decompose(a, params.cwssim.pyramid), *dump);
  });
}

// ---------------------------------------------------------------- trace

void setup_trace(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("trace", "Per-frame similarity to the reference frame");
  auto manifest = std::make_shared<std::string>();
  auto metrics = std::make_shared<std::string>("all");
  auto roi = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  cmd->add_option("--manifest", *manifest, "sequence manifest JSON")->required();
  cmd->add_option("--metrics", *metrics, "comma list or 'all'");
  cmd->add_option("--roi", *roi, "x,y,half_width,half_height (default: full frame)");
  cmd->add_option("--out", *out, "output CSV (default stdout)");
  cmd->callback([=, &g] {
    const Sequence seq = load_sequence(*manifest);
    const auto ms = parse_metrics(*metrics);
    emit(to_csv(run_trace(seq, ms, parse_roi(*roi), metric_params(g))), *out);
  });
}

// ---------------------------------------------------------------- synth

void setup_synth(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("synth", "Generate synthetic phantoms and sequences");
  cmd->require_subcommand(1);

  auto* phantom = cmd->add_subcommand("phantom", "Write the standard phantom as a PGM");
  auto p_out = std::make_shared<std::string>();
  auto p_small = std::make_shared<bool>(false);
  auto p_alpha = std::make_shared<double>(0.0);
  phantom->add_option("--out", *p_out, "output PGM")->required();
  phantom->add_flag("--small", *p_small, "128x128 variant");
  phantom->add_option("--alpha", *p_alpha, "speckle blend level in [0,1]");
  phantom->callback([=, &g] {
    const PhantomSpec spec = *p_small ? benchmark::smooth_phantom_128() : benchmark::standard_phantom();
    GrayImage img = make_phantom(spec, g.seed);
    img = apply_speckle(img, SpeckleSpec{*p_alpha, 1.0, g.seed});
    save_pgm(img, *p_out);
  });

  auto* sequence = cmd->add_subcommand("sequence", "Write a periodic-motion sequence");
  auto s_out = std::make_shared<std::string>();
  auto s_alpha = std::make_shared<double>(0.3);
  auto s_motion = std::make_shared<MotionSpec>(benchmark::standard_motion());
  auto s_profile = std::make_shared<std::string>("one_sided");
  auto s_axis = std::make_shared<std::string>("lateral");
  auto s_speckle_ref = std::make_shared<bool>(false);
  auto s_spacing = std::make_shared<double>(1.0);
  sequence->add_option("--out", *s_out, "output directory")->required();
  sequence->add_option("--alpha", *s_alpha, "speckle blend level; 0 disables speckle");
  sequence->add_option("--amplitude", s_motion->amplitude, "displacement amplitude, px");
  sequence->add_option("--period", s_motion->period, "period, frames");
  sequence->add_option("--frames", s_motion->n_frames, "frame count");
  sequence->add_option("--phase", s_motion->phase, "phase, radians");
  sequence->add_option("--profile", *s_profile, "one_sided | sine");
  sequence->add_option("--axis", *s_axis, "lateral | axial");
  sequence->add_option("--pixel-spacing", *s_spacing, "mm per pixel");
  sequence->add_flag("--speckle-reference", *s_speckle_ref, "speckle frame 0 as well");
  sequence->callback([=, &g] {
    MotionSpec m = *s_motion;
    if (*s_profile == "one_sided")
      m.profile = MotionProfile::one_sided;
    else if (*s_profile == "sine")
      m.profile = MotionProfile::sine;
    else
      throw Error(ErrorKind::invalid_argument, "unknown motion profile: " + *s_profile);
    if (*s_axis == "lateral")
      m.axis = MotionAxis::lateral;
    else if (*s_axis == "axial")
      m.axis = MotionAxis::axial;
    else
      throw Error(ErrorKind::invalid_argument, "unknown motion axis: " + *s_axis);
    std::optional<SpeckleSpec> speckle;
    if (*s_alpha > 0.0) speckle = SpeckleSpec{*s_alpha, 1.0, g.seed, *s_speckle_ref};
    SyntheticSequence s = periodic_sequence(benchmark::standard_phantom(), m, speckle, g.seed);
    s.sequence.pixel_spacing_mm = *s_spacing;
    save_sequence(s.sequence, *s_out);
  });

  auto* sweep = cmd->add_subcommand("sweep", "Write the phantom and speckled copies per alpha");
  auto w_out = std::make_shared<std::string>();
  auto w_alphas = std::make_shared<std::string>("0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9");
  sweep->add_option("--out", *w_out, "output directory")->required();
  sweep->add_option("--alphas", *w_alphas, "comma list of blend levels");
  sweep->callback([=, &g] {
    const GrayImage clean = make_phantom(benchmark::standard_phantom(), g.seed);
    fs::create_directories(*w_out);
    save_pgm(clean, fs::path(*w_out) / "phantom.pgm");
    const auto alphas = parse_doubles(*w_alphas);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      char name[48];
      std::snprintf(name, sizeof name, "alpha_%.2f.pgm", alphas[a]);
      save_pgm(apply_speckle(clean, SpeckleSpec{alphas[a], 1.0, g.seed}, a),
               fs::path(*w_out) / name);
    }
  });
}

// ---------------------------------------------------------------- track

struct ResetOptions {
  bool reset = false;
  std::optional<double> tau;
  int calibrate = 0;
  std::string metric = "cwssim";
  std::string roi;
};

void add_reset_options(CLI::App* cmd, ResetOptions& o) {
  cmd->add_flag("--reset", o.reset, "enable similarity-triggered reset");
  cmd->add_option("--tau", o.tau, "explicit reset threshold");
  cmd->add_option("--calibrate", o.calibrate, "calibrate tau over this many frames");
  cmd->add_option("--reset-metric", o.metric, "similarity used for reset");
  cmd->add_option("--roi", o.roi, "similarity ROI x,y,half_width,half_height");
}

ResetConfig reset_config(const ResetOptions& o, const Sequence& seq, const ResetConfig& base) {
  ResetConfig r = base;
  r.metric = parse_metric(o.metric);
  r.reference_frame = seq.reference_frame;
  if (auto roi = parse_roi(o.roi))
    r.similarity_roi = *roi;
  else if (r.similarity_roi.half_width == 0)
    r.similarity_roi = full_frame_roi(seq.frames.front().width(), seq.frames.front().height());
  if (o.tau) {
    r.tau = o.tau;
    r.calibration_frames = 0;
  } else if (o.calibrate > 0) {
    r.calibration_frames = o.calibrate;
  }
  return r;
}

TrackerConfig tracker_config(const std::string& name) {
  if (name == "ncc") return NccConfig{};
  if (name == "meanshift") return MeanShiftConfig{};
  throw Error(ErrorKind::invalid_argument, "unknown tracker: " + name);
}

void setup_track(CLI::App& app, Globals&) {
  auto* cmd = app.add_subcommand("track", "Track the frame-0 landmarks of a sequence");
  auto manifest = std::make_shared<std::string>();
  auto tracker = std::make_shared<std::string>("ncc");
  auto out = std::make_shared<std::string>();
  auto opts = std::make_shared<ResetOptions>();
  cmd->add_option("--manifest", *manifest, "sequence manifest JSON with frame-0 landmarks")
      ->required();
  cmd->add_option("--tracker", *tracker, "ncc | meanshift");
  cmd->add_option("--out", *out, "output CSV (default stdout)");
  add_reset_options(cmd, *opts);
  cmd->callback([=] {
    const Sequence seq = load_sequence(*manifest);
    if (!seq.landmarks)
      throw Error(ErrorKind::invalid_argument, "manifest has no landmarks to initialize from");
    const auto& init = seq.landmarks->front();
    const TrackerConfig cfg = tracker_config(*tracker);
    if (!opts->reset && (opts->tau || opts->calibrate > 0))
      throw Error(ErrorKind::invalid_argument, "--tau/--calibrate need --reset");
    TrackResult r;
    if (opts->reset) {
      ResetConfig rc = reset_config(*opts, seq, ResetConfig{});
      r = track_with_reset(seq, init, cfg, rc);
    } else {
      r = track(seq, init, cfg);
    }
    emit(to_csv(r), *out);
  });
}

// ---------------------------------------------------------------- study

void setup_study(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("study", "Reproduce the evaluation protocols");
  cmd->require_subcommand(1);

  auto* corr = cmd->add_subcommand("correlation", "Landmark position vs similarity, |Pearson r|");
  auto c_manifest = std::make_shared<std::string>();
  auto c_metrics = std::make_shared<std::string>("all");
  auto c_roi = std::make_shared<std::string>();
  auto c_out = std::make_shared<std::string>();
  corr->add_option("--manifest", *c_manifest, "sequence with ground truth (default: generated)");
  corr->add_option("--metrics", *c_metrics, "comma list or 'all'");
  corr->add_option("--roi", *c_roi, "x,y,half_width,half_height");
  corr->add_option("--out", *c_out, "output JSON (default stdout)");
  corr->callback([=, &g] {
    const Sequence seq = c_manifest->empty() ? sequence_of(benchmark::standard_sequence(g.seed))
                                             : load_sequence(*c_manifest);
    const auto report =
        run_correlation_study(seq, parse_metrics(*c_metrics), parse_roi(*c_roi), metric_params(g));
    emit(to_json(report).dump(2) + "\n", *c_out);
  });

  auto* sweep = cmd->add_subcommand("noise-sweep", "Similarity vs speckle level");
  auto n_alphas = std::make_shared<std::string>("0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9");
  auto n_metrics = std::make_shared<std::string>("all");
  auto n_seeds = std::make_shared<int>(10);
  auto n_out = std::make_shared<std::string>();
  sweep->add_option("--alphas", *n_alphas, "comma list of blend levels");
  sweep->add_option("--metrics", *n_metrics, "comma list or 'all'");
  sweep->add_option("--seeds", *n_seeds, "number of seeds, starting at --seed");
  sweep->add_option("--out", *n_out, "output CSV (default stdout)");
  sweep->callback([=, &g] {
    const auto alphas = parse_doubles(*n_alphas);
    const auto report = run_noise_sweep(benchmark::standard_phantom(), alphas,
                                        parse_metrics(*n_metrics), *n_seeds, g.seed, metric_params(g));
    emit(to_csv(report), *n_out);
  });

  auto* tracking = cmd->add_subcommand("tracking", "Tracking error with and without reset");
  auto t_manifest = std::make_shared<std::string>();
  auto t_trackers = std::make_shared<std::string>("ncc,meanshift");
  auto t_out = std::make_shared<std::string>();
  auto t_series = std::make_shared<std::string>();
  auto t_no_drift = std::make_shared<bool>(false);
  auto t_opts = std::make_shared<ResetOptions>();
  tracking->add_option("--manifest", *t_manifest, "sequence with ground truth (default: generated)");
  tracking->add_option("--trackers", *t_trackers, "comma list of ncc, meanshift");
  tracking->add_option("--out", *t_out, "summary CSV (default stdout)");
  tracking->add_option("--series", *t_series, "paired per-frame error CSV");
  tracking->add_flag("--no-drift", *t_no_drift, "skip the injected tracking losses");
  tracking->add_option("--tau", t_opts->tau, "explicit reset threshold");
  tracking->add_option("--calibrate", t_opts->calibrate, "calibrate tau over this many frames");
  tracking->add_option("--reset-metric", t_opts->metric, "similarity used for reset");
  tracking->add_option("--roi", t_opts->roi, "similarity ROI x,y,half_width,half_height");
  tracking->callback([=, &g] {
    const bool generated = t_manifest->empty();
    const Sequence seq = generated ? sequence_of(benchmark::tracking_sequence(g.seed))
                                   : load_sequence(*t_manifest);
    std::vector<TrackerConfig> trackers;
    for (const auto& name : split(*t_trackers, ',')) trackers.push_back(tracker_config(name));
    const ResetConfig base = generated ? benchmark::standard_reset() : ResetConfig{};
    ResetConfig rc = reset_config(*t_opts, seq, base);
    if (!rc.tau && rc.calibration_frames == 0) rc.calibration_frames = 30;
    std::vector<Perturbation> drift;
    if (!*t_no_drift) drift = benchmark::drift_injection();
    const auto ex = run_tracking_experiment(seq, trackers, rc, drift);
    emit(summary_csv(ex), *t_out);
    if (!t_series->empty()) emit(series_csv(ex), *t_series);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"usim: ultrasound image similarity and tracking-reset toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed and --peakval may follow the subcommand
  Globals g;
  app.add_option("--seed", g.seed, "seed for every random draw");
  app.add_option("--peakval", g.peakval, "PSNR peak value");
  setup_compare(app, g);
  setup_trace(app, g);
  setup_synth(app, g);
  setup_track(app, g);
  setup_study(app, g);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "invalid_argument: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal_error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
