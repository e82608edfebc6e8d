/* Copyright 2026 The headorient Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include "headorient/acoustics/binaural.hpp"
#include "headorient/acoustics/dsp.hpp"
#include "headorient/acoustics/room.hpp"
#include "headorient/error.hpp"
#include "headorient/wav.hpp"

namespace headorient::acoustics {
namespace {

using env::AngularGrid;
using env::GridCell;

RoomSpec small_room() {
  RoomSpec r;
  r.dims = {4, 6, 4};
  r.t60 = 0.2;
  return r;
}

std::size_t argmax_abs(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return best;
}

// Naive DFT magnitude at one frequency; independent of the FFTW path.
double dft_magnitude(const std::vector<double>& x, double hz, double fs) {
  std::complex<double> acc = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    acc += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * hz * n / fs);
  }
  return std::abs(acc);
}

TEST(Sabine, MatchesHandEvaluation) {
  EXPECT_NEAR(*sabine_absorption(small_room()), 0.6038, 1e-4);
  RoomSpec medium;
  medium.dims = {5, 7, 4};
  medium.t60 = 0.4;
  EXPECT_NEAR(*sabine_absorption(medium), 0.3394, 1e-4);
}

TEST(Sabine, LongDecayApproachesZeroAbsorption) {
  RoomSpec r = small_room();
  r.t60 = 1e6;
  EXPECT_LT(*sabine_absorption(r), 1e-6);
  EXPECT_GT(*sabine_absorption(r), 0.0);
}

TEST(Sabine, AnechoicSignalsNoReflections) {
  RoomSpec r = small_room();
  r.t60 = 0.0;
  EXPECT_FALSE(sabine_absorption(r).has_value());
}

TEST(Sabine, ClampsAndWarns) {
  static int warnings = 0;
  auto previous = set_warning_sink([](const std::string&) { ++warnings; });
  RoomSpec r = small_room();
  r.t60 = 0.01;
  EXPECT_DOUBLE_EQ(*sabine_absorption(r), 0.999);
  EXPECT_EQ(warnings, 1);
  set_warning_sink(previous);
}

TEST(ImageSources, DirectPathOnly) {
  const auto grid = AngularGrid::full();
  const auto src = enumerate_image_sources(small_room(), grid, {2, 1}, {0, 0}, 0);
  ASSERT_EQ(src.size(), 1u);
  EXPECT_NEAR(src[0].delay, 4.373e-3, 1e-6);
  EXPECT_DOUBLE_EQ(src[0].gain, 1.0 / 1.5);
  EXPECT_EQ(src[0].order, 0);
  EXPECT_DOUBLE_EQ(src[0].doa.azimuth, 30.0);
  EXPECT_DOUBLE_EQ(src[0].doa.elevation, 20.0);
}

TEST(ImageSources, FirstOrderHasOneImagePerWall) {
  const auto grid = AngularGrid::full();
  const auto src = enumerate_image_sources(small_room(), grid, {0, 0}, {0, 0}, 1);
  ASSERT_EQ(src.size(), 7u);
  EXPECT_EQ(std::count_if(src.begin(), src.end(),
                          [](const ImageSource& s) { return s.order == 1; }),
            6);
}

TEST(ImageSources, CountMatchesBruteForceEnumeration) {
  for (int order = 0; order <= 12; ++order) {
    std::int64_t brute = 0;
    for (int i = -order; i <= order; ++i)
      for (int j = -order; j <= order; ++j)
        for (int k = -order; k <= order; ++k)
          if (std::abs(i) + std::abs(j) + std::abs(k) <= order) ++brute;
    EXPECT_EQ(image_count(order), brute) << "order " << order;
    const auto grid = AngularGrid::full();
    const auto geometry = source_geometry(small_room(), grid, {1, 1});
    EXPECT_EQ(static_cast<std::int64_t>(
                  world_images(small_room(), geometry, order).size()),
              brute);
  }
}

TEST(ImageSources, SecondOrderGainUsesPressureCoefficient) {
  const auto grid = AngularGrid::full();
  const auto src = enumerate_image_sources(small_room(), grid, {0, 0}, {0, 0}, 2);
  const double alpha = *sabine_absorption(small_room());
  int seen = 0;
  for (const auto& s : src) {
    if (s.order != 2) continue;
    const double r = s.delay * 343.0;
    EXPECT_NEAR(s.gain, (1.0 - alpha) / r, 1e-12);
    ++seen;
  }
  EXPECT_EQ(seen, 18);  // 25 triples with |.|<=2 minus 7 of order <= 1
}

TEST(ImageSources, TalkerOutsideRoomIsAnError) {
  RoomSpec tiny;
  tiny.dims = {1, 1, 1};
  tiny.t60 = 0.1;
  EXPECT_THROW(enumerate_image_sources(tiny, AngularGrid::full(), {1, 0}, {0, 0}, 1),
               ConfigError);
}

TEST(ImageSources, RelativeDirectionFollowsHeadYawThenPitch) {
  const auto grid = AngularGrid::full();
  const auto src = enumerate_image_sources(small_room(), grid, {2, 0}, {1, 1}, 0);
  EXPECT_DOUBLE_EQ(src[0].doa.azimuth, 15.0);
  EXPECT_DOUBLE_EQ(src[0].doa.elevation, -20.0);
  // A reflection straight above the listener seen by a head looking 45 up
  // and 90 right.
  const Doa up = relative_doa(std::array<double, 3>{0, 0, 2}, 90.0, 45.0);
  EXPECT_NEAR(up.elevation, 45.0, 1e-9);
  EXPECT_NEAR(up.azimuth, -90.0, 1e-9);
}

TEST(ParametricHrir, MedianPlaneIsSymmetric) {
  const auto h = parametric_hrir({0, 0});
  ASSERT_EQ(h.left.size(), h.right.size());
  for (std::size_t i = 0; i < h.left.size(); ++i) {
    EXPECT_EQ(h.left[i], h.right[i]);
  }
}

TEST(ParametricHrir, WoodworthItdAtNinetyDegrees) {
  ParametricHrir model;
  const double expected = 0.0875 / 343.0 * (std::sin(std::numbers::pi / 2) +
                                             std::numbers::pi / 2);
  EXPECT_NEAR(model.itd_seconds({90, 0}), expected, 1e-12);
  EXPECT_NEAR(model.itd_seconds({90, 0}), 656e-6, 0.05 * 656e-6);

  // Far (left) ear lags by ~10.5 samples; the shadow shelf moves the far
  // ear's peak by up to two more.
  const auto h = parametric_hrir({90, 0});
  const auto lag = static_cast<long>(argmax_abs(h.left)) -
                   static_cast<long>(argmax_abs(h.right));
  EXPECT_GE(lag, 10);
  EXPECT_LE(lag, 13);
}

TEST(ParametricHrir, ItdIsOddAndMonotone) {
  ParametricHrir model;
  EXPECT_EQ(model.itd_seconds({0, 0}), 0.0);
  double previous = -1.0;
  for (double az = 0; az <= 90.0; az += 0.5) {
    const double itd = model.itd_seconds({az, 0});
    EXPECT_DOUBLE_EQ(model.itd_seconds({-az, 0}), -itd);
    EXPECT_GE(itd, previous);
    previous = itd;
  }
}

// The far-ear shelf bottoms out at theta_min; past that the rear bright
// spot brings the gain back, so the level difference peaks before 90.
TEST(ParametricHrir, IldGrowsWithAzimuth) {
  ParametricHrir model;
  double previous = 0.0;
  for (double az = 0; az <= 60.0; az += 15.0) {
    const double ild = model.shadow_alpha({az, 0}, true) /
                       model.shadow_alpha({az, 0}, false);
    EXPECT_GE(ild, previous);
    previous = ild;
  }
  EXPECT_GT(previous, 10.0);
}

TEST(ParametricHrir, ElevationNotchMovesWithElevation) {
  ParametricHrir model;
  const double fs = kSampleRate;
  auto notch_location = [&](double el) {
    const auto h = parametric_hrir({0, el});
    double best_hz = 0.0, best = 1e300;
    for (double hz = 1000.0; hz < 7900.0; hz += 25.0) {
      const double m = dft_magnitude(h.left, hz, fs);
      if (m < best) {
        best = m;
        best_hz = hz;
      }
    }
    return best_hz;
  };
  const double level = notch_location(0.0);
  const double up = notch_location(45.0);
  EXPECT_NEAR(level, model.notch_center_hz(0.0), 300.0);
  EXPECT_NEAR(up, model.notch_center_hz(45.0), 300.0);
  EXPECT_GT(up, level + 1000.0);
}

TEST(RenderBrir, AnechoicStraightAheadIsScaledDelayedHrir) {
  RoomSpec anechoic;
  anechoic.t60 = 0.0;
  ParametricHrir provider;
  const auto grid = AngularGrid::full();
  const auto brir = render_brir(anechoic, grid, {1, 0}, {1, 0}, provider);
  const auto hrir = parametric_hrir({0, 0});

  const double delay_samples = 1.5 / 343.0 * kSampleRate;  // 69.97
  EXPECT_EQ(argmax_abs(brir.left),
            argmax_abs(hrir.left) + static_cast<std::size_t>(std::lround(delay_samples)));
  EXPECT_NEAR(brir.energy() / hrir.energy(), 1.0 / 2.25, 0.01 / 2.25);
  EXPECT_EQ(brir.left, brir.right);
}

TEST(RenderBrir, AnechoicHasSinglePeakPerEar) {
  RoomSpec anechoic;
  anechoic.t60 = 0.0;
  ParametricHrir provider;
  const auto brir =
      render_brir(anechoic, AngularGrid::full(), {4, -1}, {0, 1}, provider);
  for (const auto* ch : {&brir.left, &brir.right}) {
    const std::size_t peak = argmax_abs(*ch);
    const double top = std::abs((*ch)[peak]);
    for (std::size_t i = 0; i < ch->size(); ++i) {
      const bool inside = i + FractionalDelay::kHalf >= peak &&
                          i <= peak + FractionalDelay::kHalf;
      if (!inside) EXPECT_LT(std::abs((*ch)[i]), 0.5 * top) << "index " << i;
    }
  }
}

TEST(RenderBrir, LateralMirrorSwapsChannels) {
  RoomSpec anechoic;
  anechoic.t60 = 0.0;
  ParametricHrir provider;
  const auto grid = AngularGrid::full();
  for (int az = 1; az <= 6; ++az) {
    const auto a = render_brir(anechoic, grid, {az, 1}, {0, 0}, provider);
    const auto b = render_brir(anechoic, grid, {-az, 1}, {0, 0}, provider);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a.left[i], b.right[i], 1e-12);
      EXPECT_NEAR(a.right[i], b.left[i], 1e-12);
    }
  }
}

TEST(RenderBrir, SmallRoomDecayMatchesTarget) {
  ParametricHrir provider;
  const auto grid = AngularGrid::full();
  RoomSpec room = small_room();
  room.absorption = calibrate_absorption(room, grid, provider).absorption;
  const auto brir = render_brir(room, grid, {3, 1}, {-2, 0}, provider);
  const std::vector<std::vector<double>> ch{brir.left, brir.right};
  const double t60 =
      estimate_t60_schroeder(std::span<const std::vector<double>>(ch), kSampleRate);
  EXPECT_NEAR(t60, 0.2, 0.2 * 0.2);
}

TEST(RenderBrir, EnergyFallsAsAbsorptionRises) {
  ParametricHrir provider;
  const auto grid = AngularGrid::full();
  double previous = 1e300;
  for (double alpha : {0.2, 0.4, 0.6, 0.8}) {
    RoomSpec room = small_room();
    room.absorption = alpha;
    const double e = render_brir(room, grid, {2, 1}, {0, 0}, provider).energy();
    EXPECT_TRUE(std::isfinite(e));
    EXPECT_LT(e, previous);
    previous = e;
  }
}

TEST(FftConvolve, IdentityAndShift) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> x(777);
  for (auto& v : x) v = n(rng);
  const auto same = fft_convolve(x, std::vector<double>{1.0});
  ASSERT_EQ(same.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(same[i], x[i], 1e-12);

  std::vector<double> shift(6, 0.0);
  shift[5] = 1.0;
  const auto moved = fft_convolve(x, shift);
  ASSERT_EQ(moved.size(), x.size() + 5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(moved[i], 0.0, 1e-12);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(moved[i + 5], x[i], 1e-12);
}

TEST(FftConvolve, MatchesDirectConvolution) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t ir_len : {1u, 7u, 300u, 1000u, 2500u}) {
    std::vector<double> x(1000), h(ir_len);
    for (auto& v : x) v = u(rng);
    for (auto& v : h) v = u(rng);
    const auto fast = fft_convolve(x, h);
    const auto slow = direct_convolve(x, h);
    ASSERT_EQ(fast.size(), slow.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i) {
      worst = std::max(worst, std::abs(fast[i] - slow[i]));
    }
    EXPECT_LE(worst, 1e-9) << "ir length " << ir_len;
  }
}

TEST(FftConvolve, LinearAndDeterministic) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> x(4000), h(900), ax(4000);
  for (auto& v : x) v = u(rng);
  for (auto& v : h) v = u(rng);
  for (std::size_t i = 0; i < x.size(); ++i) ax[i] = -3.25 * x[i];
  const auto y = fft_convolve(x, h);
  const auto y2 = fft_convolve(x, h);
  const auto ay = fft_convolve(ax, h);
  EXPECT_EQ(y, y2);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(ay[i], -3.25 * y[i], 1e-9);
}

TEST(FftConvolve, TruncatedOutputMatchesPrefix) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> x(8000), h(5000);
  for (auto& v : x) v = u(rng);
  for (auto& v : h) v = u(rng);
  const auto full = fft_convolve(x, h);
  const auto head = fft_convolve(x, h, 8000);
  ASSERT_EQ(head.size(), 8000u);
  for (std::size_t i = 0; i < head.size(); ++i) EXPECT_NEAR(head[i], full[i], 1e-9);
}

TEST(FftConvolve, RejectsEmptyInput) {
  EXPECT_THROW(fft_convolve(std::vector<double>{}, std::vector<double>{1.0}),
               ArgumentError);
}

TEST(Schroeder, RecoversConstructedDecay) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  const double t60 = 0.4;
  std::vector<double> ir(kSampleRate);
  for (std::size_t i = 0; i < ir.size(); ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    ir[i] = n(rng) * std::exp(-6.91 * t / t60);
  }
  EXPECT_NEAR(estimate_t60_schroeder(ir, kSampleRate), t60, 0.1 * t60);
}

TEST(Schroeder, SingleImpulseHasInsufficientDecay) {
  std::vector<double> ir(1000, 0.0);
  ir[10] = 1.0;
  try {
    estimate_t60_schroeder(ir, kSampleRate);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "insufficient decay");
  }
}

TEST(HrirPack, RoundTripsAndReportsMissingDirections) {
  const auto dir = std::filesystem::temp_directory_path() / "headorient_pack_test";
  std::filesystem::remove_all(dir);
  const auto grid = AngularGrid::reduced();
  std::vector<ExternalHrirPack::Entry> entries;
  for (const auto& c : grid.cells()) {
    const Doa d{grid.azimuth_deg(c), grid.elevation_deg(c)};
    auto h = parametric_hrir(d);
    entries.push_back({d, h.left, h.right});
  }
  write_hrir_pack(dir, entries, kSampleRate);
  ExternalHrirPack pack(dir);
  EXPECT_NO_THROW(pack.check_covers(grid));
  EXPECT_THROW(pack.check_covers(AngularGrid::full()), DataError);

  RoomSpec anechoic;
  const auto brir = render_brir(anechoic, grid, {1, 1}, {0, 0}, pack);
  EXPECT_GT(brir.energy(), 0.0);
  try {
    // Deviation of 90 degrees azimuth is not in a reduced-grid pack.
    render_brir(anechoic, grid, {3, 0}, {-3, 0}, pack);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("azimuth 90"), std::string::npos)
        << e.what();
  }
  std::filesystem::remove_all(dir);
}

TEST(Wav, FloatRoundTripIsExact) {
  const auto path = std::filesystem::temp_directory_path() / "headorient_wav.wav";
  AudioBuffer a;
  a.sample_rate = 16000;
  a.channels = {{0.25, -0.5, 0.125}, {1.0, 0.0, -1.0}};
  write_wav(path, a, WavEncoding::kFloat32);
  const auto b = read_wav(path);
  EXPECT_EQ(b.sample_rate, 16000);
  EXPECT_EQ(b.channels, a.channels);
  write_wav(path, a, WavEncoding::kPcm16);
  const auto c = read_wav(path);
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t i = 0; i < 3; ++i)
      EXPECT_NEAR(c.channels[ch][i], a.channels[ch][i], 1.0 / 32767.0);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace headorient::acoustics
