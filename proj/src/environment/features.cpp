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

#include "headorient/environment/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "headorient/acoustics/dsp.hpp"
#include "headorient/error.hpp"

namespace headorient::env {
namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

void FeatureConfig::validate() const {
  if (sample_rate <= 0 || segment <= 0 || window <= 0 || hop <= 0) {
    throw ConfigError("feature sizes must be positive");
  }
  if (window > segment) throw ConfigError("feature window longer than the segment");
  if (fft_size < window) throw ConfigError("fft_size must be >= window");
  if (mel_bands < 1) throw ConfigError("mel_bands must be >= 1");
  if (!(fmin_hz >= 0.0 && fmax_hz > fmin_hz && fmax_hz <= sample_rate / 2.0)) {
    throw ConfigError("mel range must satisfy 0 <= fmin < fmax <= Nyquist");
  }
  if (gcc_phat && (gcc_lags < 1 || gcc_lags % 2 == 0 || gcc_lags > fft_size)) {
    throw ConfigError("gcc_lags must be odd and at most fft_size");
  }
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  FeatureConfig c;
  try {
    c.window = j.value("window", c.window);
    c.hop = j.value("hop", c.hop);
    c.fft_size = j.value("fft_size", c.fft_size);
    c.mel_bands = j.value("mel_bands", c.mel_bands);
    c.fmin_hz = j.value("fmin_hz", c.fmin_hz);
    c.fmax_hz = j.value("fmax_hz", c.fmax_hz);
    c.floor_db = j.value("floor_db", c.floor_db);
    c.gcc_phat = j.value("gcc_phat", c.gcc_phat);
    c.gcc_lags = j.value("gcc_lags", c.gcc_lags);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad feature config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json FeatureConfig::to_json() const {
  return {{"sample_rate", sample_rate}, {"segment", segment},   {"window", window},
          {"hop", hop},                 {"fft_size", fft_size}, {"mel_bands", mel_bands},
          {"fmin_hz", fmin_hz},         {"fmax_hz", fmax_hz},   {"floor_db", floor_db},
          {"gcc_phat", gcc_phat},       {"gcc_lags", gcc_lags}};
}

FeatureExtractor::FeatureExtractor(FeatureConfig config) : config_(config) {
  config_.validate();
  const int n = config_.window;
  window_.resize(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    // Periodic Hann.
    window_[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    sum += window_[static_cast<std::size_t>(i)];
  }
  power_reference_ = (sum / 2.0) * (sum / 2.0);

  const int bins = config_.fft_size / 2 + 1;
  const int bands = config_.mel_bands;
  filterbank_ = Eigen::MatrixXd::Zero(bands, bins);
  const double mlo = hz_to_mel(config_.fmin_hz);
  const double mhi = hz_to_mel(config_.fmax_hz);
  std::vector<double> edges(static_cast<std::size_t>(bands + 2));
  for (int i = 0; i < bands + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = mel_to_hz(mlo + (mhi - mlo) * i / (bands + 1));
  }
  const double bin_hz = static_cast<double>(config_.sample_rate) / config_.fft_size;
  for (int b = 0; b < bands; ++b) {
    const double lo = edges[static_cast<std::size_t>(b)];
    const double mid = edges[static_cast<std::size_t>(b + 1)];
    const double hi = edges[static_cast<std::size_t>(b + 2)];
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      if (w > 0.0) filterbank_(b, k) = w;
    }
    // Bands narrower than a bin take the nearest bin.
    if (filterbank_.row(b).sum() == 0.0) {
      const int k = std::clamp(static_cast<int>(std::lround(mid / bin_hz)), 0, bins - 1);
      filterbank_(b, k) = 1.0;
    }
  }
}

FeatureMatrix FeatureExtractor::extract(std::span<const double> left,
                                        std::span<const double> right) const {
  const auto seg = static_cast<std::size_t>(config_.segment);
  if (left.size() != seg || right.size() != seg) {
    throw DataError("feature extraction expects " + std::to_string(seg) +
                    " samples per ear, got " + std::to_string(left.size()) + " and " +
                    std::to_string(right.size()));
  }
  const int frames = config_.frames();
  const int bands = config_.mel_bands;
  const int bins = config_.fft_size / 2 + 1;
  FeatureMatrix out(frames, config_.dim());

  acoustics::RealFft fft(static_cast<std::size_t>(config_.fft_size));
  std::vector<double> buf(static_cast<std::size_t>(config_.window));
  std::vector<std::complex<double>> spec_l, spec_r;
  Eigen::VectorXd power(bins);
  std::vector<double> xcorr;
  const double floor_db = config_.floor_db;

  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * static_cast<std::size_t>(config_.hop);
    for (int ear = 0; ear < 2; ++ear) {
      const auto& x = ear == 0 ? left : right;
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = x[start + i] * window_[i];
      auto& spec = ear == 0 ? spec_l : spec_r;
      fft.forward(buf, spec);
      for (int k = 0; k < bins; ++k) power[k] = std::norm(spec[static_cast<std::size_t>(k)]);
      const Eigen::VectorXd mel = filterbank_ * power;
      for (int b = 0; b < bands; ++b) {
        const double e = mel[b] / power_reference_;
        const double db = e > 0.0 ? 10.0 * std::log10(e) : floor_db;
        out(t, ear * bands + b) = static_cast<float>(std::max(db, floor_db));
      }
    }
    if (config_.gcc_phat) {
      std::vector<std::complex<double>> cross(spec_l.size());
      for (std::size_t k = 0; k < cross.size(); ++k) {
        const auto g = spec_l[k] * std::conj(spec_r[k]);
        const double mag = std::abs(g);
        cross[k] = mag > 1e-12 ? g / mag : std::complex<double>(0.0, 0.0);
      }
      fft.inverse(cross, xcorr);
      const int half = config_.gcc_lags / 2;
      const int n = config_.fft_size;
      for (int lag = -half; lag <= half; ++lag) {
        const auto idx = static_cast<std::size_t>((lag + n) % n);
        out(t, 2 * bands + lag + half) = static_cast<float>(xcorr[idx] / n);
      }
    }
  }
  return out;
}

void FeatureStats::apply(FeatureMatrix& frames) const {
  if (empty()) return;
  if (static_cast<std::size_t>(frames.cols()) != mean.size()) {
    throw DataError("feature dimension " + std::to_string(frames.cols()) +
                    " does not match standardization constants (" +
                    std::to_string(mean.size()) + ")");
  }
  const Eigen::Map<const Eigen::RowVectorXf> mu(mean.data(), static_cast<Eigen::Index>(mean.size()));
  const Eigen::Map<const Eigen::RowVectorXf> is(inv_std.data(), static_cast<Eigen::Index>(inv_std.size()));
  frames.rowwise() -= mu;
  frames.array().rowwise() *= is.array();
}

FeatureStats FeatureStats::compute(const std::vector<FeatureMatrix>& samples) {
  if (samples.empty()) throw ArgumentError("FeatureStats::compute needs samples");
  const Eigen::Index dim = samples.front().cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  double count = 0.0;
  for (const auto& m : samples) {
    if (m.cols() != dim) throw ArgumentError("FeatureStats::compute: ragged feature dims");
    const Eigen::MatrixXd d = m.cast<double>();
    sum += d.colwise().sum().transpose();
    sq += d.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(m.rows());
  }
  FeatureStats s;
  s.mean.resize(static_cast<std::size_t>(dim));
  s.inv_std.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double mu = sum[i] / count;
    const double var = std::max(0.0, sq[i] / count - mu * mu);
    s.mean[static_cast<std::size_t>(i)] = static_cast<float>(mu);
    s.inv_std[static_cast<std::size_t>(i)] = static_cast<float>(1.0 / std::max(std::sqrt(var), 1e-3));
  }
  return s;
}

}  // namespace headorient::env
