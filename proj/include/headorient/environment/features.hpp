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

#ifndef HEADORIENT_ENVIRONMENT_FEATURES_HPP_
#define HEADORIENT_ENVIRONMENT_FEATURES_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "headorient/environment/grid.hpp"

namespace headorient::env {

// Frames x features, one row per STFT frame.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureConfig {
  int sample_rate = 16000;
  int segment = 8000;  // samples per ear
  int window = 400;    // Hann
  int hop = 160;
  int fft_size = 512;
  int mel_bands = 64;  // per ear
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double floor_db = -80.0;
  // Appends a GCC-PHAT block of `gcc_lags` lags per frame.
  bool gcc_phat = false;
  int gcc_lags = 61;

  int frames() const { return 1 + (segment - window) / hop; }
  int dim() const { return 2 * mel_bands + (gcc_phat ? gcc_lags : 0); }

  void validate() const;
  static FeatureConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Log-mel energies of both ears (left bands first), in dB re a full-scale
// sine, floored at floor_db.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config = {});

  const FeatureConfig& config() const { return config_; }

  // Throws DataError unless both ears hold exactly config().segment samples.
  FeatureMatrix extract(std::span<const double> left,
                        std::span<const double> right) const;

  // Triangular mel filters (HTK mel scale), mel_bands x (fft_size/2 + 1).
  const Eigen::MatrixXd& filterbank() const { return filterbank_; }

 private:
  FeatureConfig config_;
  std::vector<double> window_;
  double power_reference_ = 1.0;
  Eigen::MatrixXd filterbank_;
};

// Per-dimension standardization constants.
struct FeatureStats {
  std::vector<float> mean;
  std::vector<float> inv_std;

  bool empty() const { return mean.empty(); }
  std::size_t dim() const { return mean.size(); }
  void apply(FeatureMatrix& frames) const;

  // Accumulates over every frame of every sample; std floored at 1e-3.
  static FeatureStats compute(const std::vector<FeatureMatrix>& samples);
};

}  // namespace headorient::env

#endif  // HEADORIENT_ENVIRONMENT_FEATURES_HPP_
