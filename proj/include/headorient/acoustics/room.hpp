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

#ifndef HEADORIENT_ACOUSTICS_ROOM_HPP_
#define HEADORIENT_ACOUSTICS_ROOM_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "headorient/environment/grid.hpp"

namespace headorient::acoustics {

inline constexpr int kSampleRate = 16000;
inline constexpr double kTalkerDistance = 1.5;

// Shoebox room. t60 == 0 means anechoic: only the direct path is rendered.
struct RoomSpec {
  std::array<double, 3> dims{4.0, 6.0, 4.0};  // length (x), width (y), height (z)
  double t60 = 0.0;
  double speed_of_sound = 343.0;
  int sample_rate = kSampleRate;
  // Mean wall absorption used by the image-source model. Unset means the
  // Sabine value; calibrate_absorption() fills it so the rendered decay
  // matches t60.
  std::optional<double> absorption;

  bool anechoic() const { return t60 == 0.0; }
  double volume() const { return dims[0] * dims[1] * dims[2]; }
  double surface() const {
    return 2.0 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
  }
  // Throws ConfigError on non-positive dims / sample rate or negative t60.
  void validate() const;
};

// Direction of arrival in degrees. Azimuth positive to the right,
// elevation positive up.
struct Doa {
  double azimuth = 0.0;
  double elevation = 0.0;
};

struct ImageSource {
  Doa doa;             // relative to the listener's head orientation
  double delay = 0.0;  // seconds
  double gain = 0.0;   // pressure amplitude
  int order = 0;
};

// Sabine mean absorption 0.161 V / (S T60), clamped to (0, 0.999].
// Returns nullopt for an anechoic room (no reflections to model).
std::optional<double> sabine_absorption(const RoomSpec& room);

// room.absorption when set, otherwise the Sabine value. Anechoic -> nullopt.
std::optional<double> effective_absorption(const RoomSpec& room);

// Pressure reflection coefficient sqrt(1 - alpha).
double reflection_coefficient(double absorption);

// Smallest reflection order whose nearest image is farther than c * t60.
int default_max_order(const RoomSpec& room);

// Number of integer triples with |i| + |j| + |k| <= order.
std::int64_t image_count(int order);

// World geometry for one talker cell: listener at the room centre, talker at
// kTalkerDistance in the cell's direction.
struct SourceGeometry {
  std::array<double, 3> listener;
  std::array<double, 3> talker;
};
SourceGeometry source_geometry(const RoomSpec& room,
                               const env::AngularGrid& grid,
                               const env::GridCell& talker);

// Images in world coordinates; independent of the head orientation.
struct WorldImage {
  std::array<double, 3> offset;  // image position minus listener position
  double distance = 0.0;
  int order = 0;
};
std::vector<WorldImage> world_images(const RoomSpec& room,
                                     const SourceGeometry& geometry,
                                     int max_order);

// Direction of a world offset vector relative to a head orientation: yaw
// first, then the head's pitch applied as an elevation offset. Elevations
// past the pole fold over to the back.
Doa relative_doa(const std::array<double, 3>& offset, double head_az_deg,
                 double head_el_deg);
Doa relative_doa(const Doa& world, double head_az_deg, double head_el_deg);

// All arrivals (direct path plus shoebox images up to max_order) for one
// talker / head pair. max_order defaults to default_max_order(room); images
// arriving later than 2 * t60 are dropped. The direct path takes its
// direction from the grid angles exactly.
std::vector<ImageSource> enumerate_image_sources(
    const RoomSpec& room, const env::AngularGrid& grid,
    const env::GridCell& talker, const env::GridCell& head,
    std::optional<int> max_order = std::nullopt);

// Arrivals for one head orientation from precomputed world images (which
// must include the order-0 entry). Returns the number of pruned images via
// `pruned` when non-null.
std::vector<ImageSource> arrivals_for_head(const RoomSpec& room,
                                           const env::AngularGrid& grid,
                                           const env::GridCell& talker,
                                           const env::GridCell& head,
                                           const std::vector<WorldImage>& images,
                                           std::size_t* pruned = nullptr);

}  // namespace headorient::acoustics

#endif  // HEADORIENT_ACOUSTICS_ROOM_HPP_
