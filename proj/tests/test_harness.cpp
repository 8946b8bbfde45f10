// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "usim/harness.hpp"

using namespace usim;
namespace fs = std::filesystem;

namespace {

Sequence repeat(const GrayImage& f, int n) {
  Sequence s;
  s.frames.assign(static_cast<std::size_t>(n), f);
  s.landmarks = LandmarkTracks(static_cast<std::size_t>(n), std::vector<Landmark>{{96, 128}});
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CliRun {
  int status;
  std::string err;
};

CliRun cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(USIM_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err)};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("usim_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Pearson, Examples) {
  const std::vector<double> x = {1, 2, 3, 4};
  EXPECT_NEAR(pearson(x, std::vector<double>{3, 5, 7, 9}), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, std::vector<double>{-1, -2, -3, -4}), -1.0, 1e-12);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-12);
  try {
    pearson(x, std::vector<double>{2, 2, 2, 2});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::constant_series);
  }
  try {
    pearson(x, std::vector<double>{1, 2, 3});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::length_mismatch);
  }
}

TEST(Pearson, MatchesTwoPassOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GrayImage a = oracle::random_image(90, 1, seed), b = oracle::random_image(90, 1, seed + 99);
    EXPECT_NEAR(pearson(a.pixels(), b.pixels()), oracle::pearson(a.data(), b.data()), 1e-10);
  }
  // Large offset: the naive one-pass formula loses everything here.
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(1e9 + i);
    y.push_back(1e9 + (i % 7));
  }
  EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-10);
}

TEST(Spearman, Basics) {
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 30, 1000}), 1.0, 1e-12);
  EXPECT_EQ(average_ranks(std::vector<double>{5, 1, 5}), (std::vector<double>{2.5, 1, 2.5}));
}

TEST(FormatNumber, FixedForm) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(123456789012.0), "1.23456789e+11");
}

TEST(Trace, SingleFrameReportsConstantSeries) {
  const auto r = run_trace(repeat(oracle::random_image(32, 32, 1), 1), std::vector<Metric>{Metric::ssim});
  ASSERT_EQ(r.columns.size(), 1u);
  EXPECT_EQ(r.columns[0].raw.size(), 1u);
  EXPECT_FALSE(r.columns[0].normalized);
  ASSERT_TRUE(r.columns[0].error);
  const std::string csv = to_csv(r);
  EXPECT_EQ(csv.rfind("# ssim_norm unavailable:", 0), 0u);
  EXPECT_NE(csv.find("frame,ssim,ssim_norm\n0,1,\n"), std::string::npos);
}

TEST(Trace, StaticSequenceIsIdentity) {
  const auto r = run_trace(repeat(oracle::random_image(128, 128, 2), 10),
                           std::vector<Metric>{Metric::ssim, Metric::cwssim});
  for (const auto& c : r.columns) {
    EXPECT_EQ(c.raw.size(), 10u);
    for (double v : c.raw) EXPECT_NEAR(v, 1.0, 1e-9);
    EXPECT_FALSE(c.normalized);  // a flat trace cannot be min-max scaled
  }
}

TEST(Trace, ShapeRoiAndNormalizationEndpoints) {
  MotionSpec m;
  m.n_frames = 12;
  const auto s = periodic_sequence(benchmark::standard_phantom(), m, benchmark::standard_speckle(1), 1);
  const Roi roi{{128, 128}, 64, 64};
  const auto r = run_trace(s.sequence, std::vector<Metric>{Metric::mse, Metric::ssim}, roi);
  for (const auto& c : r.columns) {
    ASSERT_TRUE(c.normalized);
    EXPECT_EQ(*std::min_element(c.normalized->begin(), c.normalized->end()), 0.0);
    EXPECT_EQ(*std::max_element(c.normalized->begin(), c.normalized->end()), 1.0);
  }
  const GrayImage ref = crop(s.sequence.frames[0], roi);
  EXPECT_EQ(r.column(Metric::ssim).raw[5], ssim(ref, crop(s.sequence.frames[5], roi)).value);
  const std::string csv = to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "frame,mse,mse_norm,ssim,ssim_norm");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(Correlation, AmplitudeZeroReportsConstantSeries) {
  MotionSpec m;
  m.amplitude = 0.0;
  m.n_frames = 5;
  const auto s = periodic_sequence(benchmark::smooth_phantom_128(), m, benchmark::standard_speckle(0), 0);
  const auto report = run_correlation_study(s.sequence, std::vector<Metric>{Metric::ssim, Metric::mse});
  ASSERT_EQ(report.ranking.size(), 2u);
  for (const auto& e : report.ranking) {
    EXPECT_FALSE(e.abs_pearson);
    ASSERT_TRUE(e.error);
    EXPECT_EQ(e.error->rfind("constant_series", 0), 0u);
  }
  const auto j = to_json(report);
  EXPECT_TRUE(j[0]["abs_pearson"].is_null());
}

TEST(Correlation, MatchesOracleAndIsRanked) {
  MotionSpec m;
  m.n_frames = 30;
  const auto s = periodic_sequence(benchmark::smooth_phantom_128(), m, benchmark::standard_speckle(2), 2);
  const std::vector<Metric> metrics = {Metric::mse, Metric::psnr, Metric::ssim, Metric::cwssim};
  const auto trace = run_trace(s.sequence, metrics);
  const auto disp = lateral_displacement(s.truth);
  const auto report = correlate(trace, disp);
  ASSERT_EQ(report.ranking.size(), metrics.size());
  for (std::size_t i = 0; i < report.ranking.size(); ++i) {
    const auto& e = report.ranking[i];
    ASSERT_TRUE(e.abs_pearson);
    // Frame 0 is the reference and is left out of the correlation.
    const auto& norm = *trace.column(e.metric).normalized;
    const double r = oracle::pearson(std::vector<double>(disp.begin() + 1, disp.end()),
                                     std::vector<double>(norm.begin() + 1, norm.end()));
    EXPECT_NEAR(*e.abs_pearson, std::abs(r), 1e-10);
    EXPECT_EQ(e.sign, r > 0 ? 1 : -1);
    if (i > 0) EXPECT_GE(*report.ranking[i - 1].abs_pearson, *e.abs_pearson);
  }
  const auto j = to_json(report);
  EXPECT_EQ(j.size(), metrics.size());
  EXPECT_EQ(j[0].begin().key(), "metric");
  EXPECT_EQ(to_json(run_correlation_study(s.sequence, metrics)).dump(), j.dump());
}

TEST(Sweep, ShapeAndIdentityAlpha) {
  const PhantomSpec p = benchmark::smooth_phantom_128();
  const std::vector<Metric> metrics = {Metric::mse, Metric::ssim, Metric::cwssim};
  const auto zero = run_noise_sweep(p, std::vector<double>{0.0}, metrics, 2);
  ASSERT_EQ(zero.rows.size(), 3u);
  EXPECT_EQ(zero.rows[0].mean_value, 0.0);
  EXPECT_NEAR(zero.rows[1].mean_value, 1.0, 1e-12);
  EXPECT_NEAR(zero.rows[2].mean_value, 1.0, 1e-9);
  EXPECT_EQ(zero.notes.size(), 3u);  // one alpha cannot be normalized

  const auto alphas = benchmark::standard_alphas();
  const auto sweep = run_noise_sweep(p, alphas, metrics, 2);
  EXPECT_EQ(sweep.rows.size(), alphas.size() * metrics.size());
  const auto mse_col = sweep.series(Metric::mse);
  for (std::size_t i = 1; i < mse_col.size(); ++i) EXPECT_GT(mse_col[i], mse_col[i - 1]);
  const std::string csv = to_csv(sweep);
  EXPECT_EQ(csv.rfind("alpha,metric,mean_value,normalized_value\n0.1,mse,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 27);
}

TEST(Experiment, StaticSequenceHasNoError) {
  Sequence s = repeat(make_phantom(benchmark::standard_phantom(), 0), 4);
  const std::vector<TrackerConfig> trackers = {NccConfig{}, MeanShiftConfig{}};
  ResetConfig reset = benchmark::standard_reset();
  reset.tau = 0.9;
  const auto ex = run_tracking_experiment(s, trackers, reset);
  ASSERT_EQ(ex.arms.size(), 4u);
  for (const auto& a : ex.arms) {
    EXPECT_NEAR(a.error.mean_mm, 0.0, 1e-9);
    EXPECT_NEAR(a.error.std_mm, 0.0, 1e-9);
  }
  EXPECT_EQ(ex.arm("ncc", "reset").reset_events, 4u);
  const std::string summary = summary_csv(ex);
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "tracker,arm,mean_mm,std_mm,reset_events");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 5);
  EXPECT_NE(summary.find("\nncc,bare,"), std::string::npos);
  EXPECT_NE(summary.find("\nmeanshift,reset,"), std::string::npos);
  const std::string series = series_csv(ex);
  EXPECT_EQ(std::count(series.begin(), series.end(), '\n'), 1 + 8);
}

TEST(Experiment, TrackCsvLayout) {
  TrackResult r;
  r.estimates = {{{1, 2}, {3, 4}}, {{1.5, 2}, {3, 4.25}}};
  r.reset_events = {1};
  r.similarity_trace = {1.0, 0.75};
  EXPECT_EQ(to_csv(r),
            "frame,landmark_id,x_px,y_px,reset_fired,similarity_value\n"
            "0,0,1,2,0,1\n0,1,3,4,0,1\n1,0,1.5,2,1,0.75\n1,1,3,4.25,1,0.75\n");
}

TEST(Cli, ExitCodesAndErrorKinds) {
  const fs::path dir = scratch("exit");
  EXPECT_EQ(cli("synth phantom --out " + (dir / "a.pgm").string(), dir).status, 0);
  EXPECT_EQ(cli("synth phantom --alpha 0.5 --out " + (dir / "b.pgm").string(), dir).status, 0);
  EXPECT_EQ(cli("synth phantom --small --out " + (dir / "s.pgm").string(), dir).status, 0);
  EXPECT_EQ(cli("compare " + (dir / "a.pgm").string() + " " + (dir / "b.pgm").string(), dir).status, 0);

  const auto missing = cli("compare " + (dir / "nope.pgm").string() + " " + (dir / "b.pgm").string(), dir);
  EXPECT_EQ(missing.status, 2);
  EXPECT_EQ(missing.err.rfind("io_error:", 0), 0u) << missing.err;

  const auto bad_metric = cli("compare " + (dir / "a.pgm").string() + " " + (dir / "b.pgm").string() +
                                  " --metric bogus",
                              dir);
  EXPECT_EQ(bad_metric.status, 2);
  EXPECT_EQ(bad_metric.err.rfind("invalid_argument:", 0), 0u) << bad_metric.err;

  // Five-scale MS-SSIM does not fit a 128x128 image.
  const auto small = cli("compare " + (dir / "s.pgm").string() + " " + (dir / "s.pgm").string() +
                             " --metric msssim",
                         dir);
  EXPECT_EQ(small.status, 2);
  EXPECT_EQ(small.err.rfind("image_too_small:", 0), 0u) << small.err;

  const auto mismatch = cli("compare " + (dir / "s.pgm").string() + " " + (dir / "a.pgm").string() +
                                " --metric mse",
                            dir);
  EXPECT_EQ(mismatch.status, 2);
  EXPECT_EQ(mismatch.err.rfind("dimension_mismatch:", 0), 0u) << mismatch.err;

  const auto bad_flag = cli("frobnicate", dir);
  EXPECT_EQ(bad_flag.status, 2);
  fs::remove_all(dir);
}

TEST(Cli, SequenceTraceAndTrackRoundTrip) {
  const fs::path dir = scratch("seq");
  ASSERT_EQ(cli("synth sequence --frames 6 --out " + (dir / "seq").string(), dir).status, 0);
  const fs::path manifest = dir / "seq" / "manifest.json";
  ASSERT_TRUE(fs::exists(manifest));
  ASSERT_EQ(cli("trace --manifest " + manifest.string() + " --metrics ssim,mse --out " +
                    (dir / "t.csv").string(),
                dir)
                .status,
            0);
  const std::string trace = slurp(dir / "t.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "frame,ssim,ssim_norm,mse,mse_norm");
  ASSERT_EQ(cli("track --manifest " + manifest.string() + " --tracker ncc --reset --tau 0.99 --out " +
                    (dir / "k.csv").string(),
                dir)
                .status,
            0);
  const std::string track = slurp(dir / "k.csv");
  EXPECT_EQ(std::count(track.begin(), track.end(), '\n'), 1 + 6 * 3);
  const auto no_tau = cli("track --manifest " + manifest.string() + " --tracker ncc --reset", dir);
  EXPECT_EQ(no_tau.status, 2);
  fs::remove_all(dir);
}
