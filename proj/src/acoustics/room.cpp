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

#include "headorient/acoustics/room.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <string>

#include "headorient/error.hpp"

namespace headorient::acoustics {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap_degrees(double a) {
  a = std::fmod(a + 180.0, 360.0);
  if (a < 0) a += 360.0;
  return a - 180.0;
}

double image_coordinate(int n, double length, double source) {
  return n * length + ((n % 2 == 0) ? source : length - source);
}

}  // namespace

void RoomSpec::validate() const {
  for (double d : dims) {
    if (!(d > 0.0)) throw ConfigError("room dimensions must be positive");
  }
  if (!(t60 >= 0.0)) throw ConfigError("room t60 must be >= 0");
  if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
  if (!(speed_of_sound > 0.0)) throw ConfigError("speed of sound must be positive");
}

std::optional<double> sabine_absorption(const RoomSpec& room) {
  room.validate();
  if (room.anechoic()) return std::nullopt;
  double alpha = 0.161 * room.volume() / (room.surface() * room.t60);
  if (alpha >= 1.0) {
    warn("Sabine absorption " + std::to_string(alpha) +
         " >= 1 for t60=" + std::to_string(room.t60) + "; clamped to 0.999");
    alpha = 0.999;
  }
  return alpha;
}

std::optional<double> effective_absorption(const RoomSpec& room) {
  if (room.anechoic()) return std::nullopt;
  if (room.absorption.has_value()) {
    const double a = *room.absorption;
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("room absorption must lie in (0, 1)");
    }
    return a;
  }
  return sabine_absorption(room);
}

double reflection_coefficient(double absorption) {
  return std::sqrt(1.0 - absorption);
}

std::int64_t image_count(int order) {
  if (order < 0) return 0;
  const std::int64_t n = order;
  return (2 * n + 1) * (2 * n * n + 2 * n + 3) / 3;
}

SourceGeometry source_geometry(const RoomSpec& room,
                               const env::AngularGrid& grid,
                               const env::GridCell& talker) {
  SourceGeometry g;
  g.listener = {room.dims[0] / 2, room.dims[1] / 2, room.dims[2] / 2};
  const double az = grid.azimuth_deg(talker) * kDeg;
  const double el = grid.elevation_deg(talker) * kDeg;
  const std::array<double, 3> dir = {std::cos(el) * std::cos(az),
                                     -std::cos(el) * std::sin(az),
                                     std::sin(el)};
  for (int i = 0; i < 3; ++i) {
    g.talker[i] = g.listener[i] + kTalkerDistance * dir[i];
    if (!(g.talker[i] > 0.0 && g.talker[i] < room.dims[i])) {
      throw ConfigError("talker position for cell " + env::to_string(talker) +
                        " lies outside the room");
    }
  }
  return g;
}

int default_max_order(const RoomSpec& room) {
  room.validate();
  if (room.anechoic()) return 0;
  const double reach = room.speed_of_sound * room.t60;
  // Worst case for the nearest image of a given order: the listener is at
  // the centre, so an order-n image along one axis is at about n * L.
  const double shortest = *std::min_element(room.dims.begin(), room.dims.end());
  const int bound = static_cast<int>(std::ceil(reach / shortest)) + 2;
  const std::array<double, 3> c = {room.dims[0] / 2, room.dims[1] / 2,
                                   room.dims[2] / 2};
  for (int order = 1; order <= bound; ++order) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int i = -order; i <= order; ++i) {
      const int rest = order - std::abs(i);
      for (int j = -rest; j <= rest; ++j) {
        const int k_abs = rest - std::abs(j);
        for (int k : {-k_abs, k_abs}) {
          // With the source at the listener (centre) this is the minimum
          // over source positions near the centre.
          const double dx = image_coordinate(i, room.dims[0], c[0]) - c[0];
          const double dy = image_coordinate(j, room.dims[1], c[1]) - c[1];
          const double dz = image_coordinate(k, room.dims[2], c[2]) - c[2];
          nearest = std::min(nearest, std::sqrt(dx * dx + dy * dy + dz * dz));
          if (k_abs == 0) break;
        }
      }
    }
    if (nearest > reach) return order;
  }
  return bound;
}

std::vector<WorldImage> world_images(const RoomSpec& room,
                                     const SourceGeometry& geometry,
                                     int max_order) {
  if (max_order < 0) throw ArgumentError("max_order must be >= 0");
  std::vector<WorldImage> out;
  out.reserve(static_cast<std::size_t>(image_count(max_order)));
  for (int i = -max_order; i <= max_order; ++i) {
    const double x =
        image_coordinate(i, room.dims[0], geometry.talker[0]) - geometry.listener[0];
    const int rest_i = max_order - std::abs(i);
    for (int j = -rest_i; j <= rest_i; ++j) {
      const double y = image_coordinate(j, room.dims[1], geometry.talker[1]) -
                       geometry.listener[1];
      const int rest_j = rest_i - std::abs(j);
      for (int k = -rest_j; k <= rest_j; ++k) {
        const double z = image_coordinate(k, room.dims[2], geometry.talker[2]) -
                         geometry.listener[2];
        WorldImage im;
        im.offset = {x, y, z};
        im.distance = std::sqrt(x * x + y * y + z * z);
        im.order = std::abs(i) + std::abs(j) + std::abs(k);
        out.push_back(im);
      }
    }
  }
  return out;
}

Doa relative_doa(const Doa& world, double head_az_deg, double head_el_deg) {
  double az = wrap_degrees(world.azimuth - head_az_deg);
  double el = world.elevation - head_el_deg;
  if (el > 90.0) {
    el = 180.0 - el;
    az = wrap_degrees(az + 180.0);
  } else if (el < -90.0) {
    el = -180.0 - el;
    az = wrap_degrees(az + 180.0);
  }
  return {az, el};
}

Doa relative_doa(const std::array<double, 3>& offset, double head_az_deg,
                 double head_el_deg) {
  const double horizontal = std::hypot(offset[0], offset[1]);
  const Doa world{std::atan2(-offset[1], offset[0]) / kDeg,
                  std::atan2(offset[2], horizontal) / kDeg};
  return relative_doa(world, head_az_deg, head_el_deg);
}

std::vector<ImageSource> arrivals_for_head(const RoomSpec& room,
                                           const env::AngularGrid& grid,
                                           const env::GridCell& talker,
                                           const env::GridCell& head,
                                           const std::vector<WorldImage>& images,
                                           std::size_t* pruned) {
  const double head_az = grid.azimuth_deg(head);
  const double head_el = grid.elevation_deg(head);
  const double c = room.speed_of_sound;

  std::vector<ImageSource> out;
  out.reserve(images.size());
  out.push_back(ImageSource{
      relative_doa(Doa{grid.azimuth_deg(talker), grid.elevation_deg(talker)},
                   head_az, head_el),
      kTalkerDistance / c, 1.0 / kTalkerDistance, 0});
  if (room.anechoic()) return out;

  const double beta = reflection_coefficient(*effective_absorption(room));
  const double horizon = 2.0 * room.t60;
  std::size_t dropped = 0;
  // beta^order by table; orders are small integers.
  std::vector<double> beta_pow(1, 1.0);
  for (const WorldImage& im : images) {
    if (im.order == 0) continue;
    const double delay = im.distance / c;
    if (delay > horizon) {
      ++dropped;
      continue;
    }
    while (beta_pow.size() <= static_cast<std::size_t>(im.order)) {
      beta_pow.push_back(beta_pow.back() * beta);
    }
    out.push_back(ImageSource{relative_doa(im.offset, head_az, head_el), delay,
                              beta_pow[static_cast<std::size_t>(im.order)] /
                                  im.distance,
                              im.order});
  }
  if (pruned != nullptr) *pruned = dropped;
  return out;
}

std::vector<ImageSource> enumerate_image_sources(
    const RoomSpec& room, const env::AngularGrid& grid,
    const env::GridCell& talker, const env::GridCell& head,
    std::optional<int> max_order) {
  room.validate();
  if (!grid.contains(talker) || !grid.contains(head)) {
    throw ArgumentError("talker or head cell outside the grid");
  }
  if (max_order.has_value() && *max_order < 0) {
    throw ArgumentError("max_order must be >= 0");
  }
  const SourceGeometry geometry = source_geometry(room, grid, talker);
  const int order =
      room.anechoic() ? 0 : max_order.value_or(default_max_order(room));
  std::size_t pruned = 0;
  auto out = arrivals_for_head(room, grid, talker, head,
                               world_images(room, geometry, order), &pruned);
  if (pruned > 0 && max_order.has_value()) {
    warn(std::to_string(pruned) +
         " image sources beyond 2*t60 pruned (max_order=" +
         std::to_string(order) + ")");
  }
  return out;
}

}  // namespace headorient::acoustics
