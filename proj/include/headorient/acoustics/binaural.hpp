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

#ifndef HEADORIENT_ACOUSTICS_BINAURAL_HPP_
#define HEADORIENT_ACOUSTICS_BINAURAL_HPP_

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "headorient/acoustics/room.hpp"
#include "headorient/environment/grid.hpp"

namespace headorient::acoustics {

struct BinauralImpulseResponse {
  std::vector<double> left;
  std::vector<double> right;
  int sample_rate = kSampleRate;

  std::size_t size() const { return left.size(); }
  // Equal non-zero lengths, finite samples. Throws DataError otherwise.
  void validate() const;
  double energy() const;
};

// Every arrival is placed this many samples late so the fractional-delay
// kernel of a zero-delay arrival stays inside the buffer.
inline constexpr int kRenderLatency = 16;

// Collects (direction, delay, gain) arrivals and produces a stereo response.
class ArrivalAccumulator {
 public:
  virtual ~ArrivalAccumulator() = default;
  // `delay_samples` excludes kRenderLatency. When `require_exact` is set the
  // provider must hold a response for exactly this direction.
  virtual void add(const Doa& doa, double delay_samples, double gain,
                   bool require_exact) = 0;
  virtual BinauralImpulseResponse finish() = 0;
};

class HrirProvider {
 public:
  virtual ~HrirProvider() = default;

  virtual std::unique_ptr<ArrivalAccumulator> accumulator(
      std::size_t length) const = 0;
  // Samples of response past the (latency-shifted) arrival position.
  virtual std::size_t tail_length() const = 0;
  // Configuration fingerprint that goes into cache hashes.
  virtual nlohmann::json describe() const = 0;
  virtual int sample_rate() const { return kSampleRate; }

  // Single arrival at zero delay, unit gain.
  BinauralImpulseResponse hrir(const Doa& doa) const;
};

// Spherical-head model: Woodworth ITD as a fractional delay on the far ear,
// a first-order head-shadow shelf per ear whose high-frequency gain depends
// on the angle to that ear, and an elevation-dependent spectral notch shared
// by both ears.
struct ParametricHeadConfig {
  double head_radius = 0.0875;
  double speed_of_sound = 343.0;
  // Notch centre moves linearly from notch_low_hz at -45 degrees elevation
  // to notch_high_hz at +45 degrees, clamped outside that range.
  double notch_low_hz = 3000.0;
  double notch_high_hz = 7000.0;
  double notch_depth_db = 24.0;
  double notch_q = 2.5;
  // Head-shadow shelf: high-frequency gain alpha(theta) between alpha_min
  // and 2, reaching alpha_min at theta_min degrees from the ear axis.
  double shadow_alpha_min = 0.1;
  double shadow_theta_min_deg = 150.0;
  std::size_t tail_length = 128;
  int sample_rate = kSampleRate;
};

class ParametricHrir : public HrirProvider {
 public:
  explicit ParametricHrir(ParametricHeadConfig config = {});

  std::unique_ptr<ArrivalAccumulator> accumulator(
      std::size_t length) const override;
  std::size_t tail_length() const override { return config_.tail_length; }
  nlohmann::json describe() const override;
  int sample_rate() const override { return config_.sample_rate; }

  const ParametricHeadConfig& config() const { return config_; }

  // Signed ITD in seconds; positive when the left ear lags (source to the
  // right). Odd in azimuth, uses the lateral angle for rear/elevated sources.
  double itd_seconds(const Doa& doa) const;
  // Shelf gain alpha for the left/right ear.
  double shadow_alpha(const Doa& doa, bool right_ear) const;
  double notch_center_hz(double elevation_deg) const;

 private:
  ParametricHeadConfig config_;
};

// Directory of az{A}_el{E}.wav stereo files plus manifest.json:
//   {"sample_rate": 16000, "directions": [{"azimuth": A, "elevation": E,
//    "file": "azA_elE.wav"}, ...]}
// Arrivals flagged require_exact must match a pack direction within 0.5
// degrees; others use the nearest direction on the sphere.
class ExternalHrirPack : public HrirProvider {
 public:
  explicit ExternalHrirPack(const std::filesystem::path& dir);

  std::unique_ptr<ArrivalAccumulator> accumulator(
      std::size_t length) const override;
  std::size_t tail_length() const override { return tail_; }
  nlohmann::json describe() const override;
  int sample_rate() const override { return sample_rate_; }

  // Throws DataError listing any grid cell without a response.
  void check_covers(const env::AngularGrid& grid) const;

  struct Entry {
    Doa doa;
    std::vector<double> left;
    std::vector<double> right;
  };
  const std::vector<Entry>& entries() const { return entries_; }
  // Index of an exact match or -1.
  int find_exact(const Doa& doa) const;
  std::size_t nearest(const Doa& doa) const;

 private:
  std::filesystem::path dir_;
  int sample_rate_ = kSampleRate;
  std::size_t tail_ = 0;
  std::uint64_t content_hash_ = 0;
  std::vector<Entry> entries_;
};

// Writes a pack in the format ExternalHrirPack reads.
void write_hrir_pack(const std::filesystem::path& dir,
                     const std::vector<ExternalHrirPack::Entry>& entries,
                     int sample_rate);

std::unique_ptr<HrirProvider> make_hrir_provider(const nlohmann::json& spec);

BinauralImpulseResponse parametric_hrir(const Doa& doa,
                                        int sample_rate = kSampleRate);

// Sums the provider response of every arrival at its fractional delay.
BinauralImpulseResponse render_arrivals(const std::vector<ImageSource>& arrivals,
                                        const HrirProvider& provider);

BinauralImpulseResponse render_brir(const RoomSpec& room,
                                    const env::AngularGrid& grid,
                                    const env::GridCell& talker,
                                    const env::GridCell& head,
                                    const HrirProvider& provider);

// Renders every head orientation for one talker, sharing the image-source
// enumeration. Result is indexed by grid.index_of(head).
std::vector<BinauralImpulseResponse> render_brirs_for_talker(
    const RoomSpec& room, const env::AngularGrid& grid,
    const env::GridCell& talker, const HrirProvider& provider);

// Searches the absorption for which the Schroeder T60 of a reference
// response (talker and head straight ahead) matches room.t60 within
// `tolerance` (relative). Shoebox image sources with uniform absorption
// decay more slowly than Sabine predicts once the room is elongated, so the
// plain Sabine value overshoots the target in the larger rooms.
struct AbsorptionCalibration {
  double absorption = 0.0;
  double sabine = 0.0;
  double achieved_t60 = 0.0;
  int iterations = 0;
};
AbsorptionCalibration calibrate_absorption(const RoomSpec& room,
                                           const env::AngularGrid& grid,
                                           const HrirProvider& provider,
                                           double tolerance = 0.01);

}  // namespace headorient::acoustics

#endif  // HEADORIENT_ACOUSTICS_BINAURAL_HPP_
