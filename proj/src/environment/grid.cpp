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

#include "headorient/environment/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "headorient/error.hpp"

namespace headorient::env {

std::string to_string(const GridCell& cell) {
  return "(" + std::to_string(cell.az_index) + "," +
         std::to_string(cell.el_index) + ")";
}

AngularGrid::AngularGrid(std::vector<double> azimuths,
                         std::vector<double> elevations)
    : azimuths_(std::move(azimuths)), elevations_(std::move(elevations)) {
  auto check_axis = [](const std::vector<double>& axis, const char* name) {
    if (axis.empty() || axis.size() % 2 == 0) {
      throw ConfigError(std::string("grid ") + name +
                        " must have an odd, non-zero number of values");
    }
    if (axis[axis.size() / 2] != 0.0) {
      throw ConfigError(std::string("grid ") + name +
                        " must have 0 degrees as its middle value");
    }
    if (!std::is_sorted(axis.begin(), axis.end()) ||
        std::adjacent_find(axis.begin(), axis.end()) != axis.end()) {
      throw ConfigError(std::string("grid ") + name +
                        " must be strictly increasing");
    }
  };
  check_axis(azimuths_, "azimuths");
  check_axis(elevations_, "elevations");
  if (azimuths_.front() < -180.0 || azimuths_.back() > 180.0 ||
      elevations_.front() < -90.0 || elevations_.back() > 90.0) {
    throw ConfigError("grid angles out of range");
  }
}

AngularGrid AngularGrid::full() {
  std::vector<double> az;
  for (int i = -6; i <= 6; ++i) az.push_back(15.0 * i);
  return AngularGrid(std::move(az), {-45.0, -20.0, 0.0, 20.0, 45.0});
}

AngularGrid AngularGrid::reduced() {
  std::vector<double> az;
  for (int i = -3; i <= 3; ++i) az.push_back(15.0 * i);
  return AngularGrid(std::move(az), {-20.0, 0.0, 20.0});
}

bool AngularGrid::contains(const GridCell& cell) const {
  return std::abs(cell.az_index) <= az_half() &&
         std::abs(cell.el_index) <= el_half();
}

GridCell AngularGrid::clamp(GridCell cell) const {
  cell.az_index = std::clamp(cell.az_index, -az_half(), az_half());
  cell.el_index = std::clamp(cell.el_index, -el_half(), el_half());
  return cell;
}

double AngularGrid::azimuth_deg(const GridCell& cell) const {
  return azimuths_.at(static_cast<std::size_t>(cell.az_index + az_half()));
}

double AngularGrid::elevation_deg(const GridCell& cell) const {
  return elevations_.at(static_cast<std::size_t>(cell.el_index + el_half()));
}

std::size_t AngularGrid::index_of(const GridCell& cell) const {
  if (!contains(cell)) {
    throw ArgumentError("cell " + to_string(cell) + " is outside the grid");
  }
  return static_cast<std::size_t>(cell.az_index + az_half()) *
             elevations_.size() +
         static_cast<std::size_t>(cell.el_index + el_half());
}

GridCell AngularGrid::cell_at(std::size_t index) const {
  if (index >= size()) throw ArgumentError("grid index out of range");
  const auto ne = elevations_.size();
  return GridCell{static_cast<int>(index / ne) - az_half(),
                  static_cast<int>(index % ne) - el_half()};
}

std::vector<GridCell> AngularGrid::cells() const {
  std::vector<GridCell> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(cell_at(i));
  return out;
}

std::vector<GridCell> AngularGrid::start_cells() const {
  std::vector<GridCell> out;
  for (const auto& c : cells()) {
    if (c != GridCell{}) out.push_back(c);
  }
  return out;
}

std::string_view action_name(Action a) {
  static constexpr std::array<std::string_view, kNumActions> kNames = {
      "E", "W", "N", "S", "NE", "NW", "SE", "SW"};
  return kNames[static_cast<std::size_t>(a)];
}

std::pair<int, int> action_delta(Action a) {
  switch (a) {
    case Action::kE:  return {1, 0};
    case Action::kW:  return {-1, 0};
    case Action::kN:  return {0, 1};
    case Action::kS:  return {0, -1};
    case Action::kNE: return {1, 1};
    case Action::kNW: return {-1, 1};
    case Action::kSE: return {1, -1};
    case Action::kSW: return {-1, -1};
  }
  return {0, 0};
}

double orientation_deviation(const AngularGrid& grid, const GridCell& talker,
                             const GridCell& head) {
  const double daz = grid.azimuth_deg(talker) - grid.azimuth_deg(head);
  const double del = grid.elevation_deg(talker) - grid.elevation_deg(head);
  return std::sqrt(daz * daz + del * del);
}

GridCell apply_action(const AngularGrid& grid, const GridCell& head, Action a) {
  const auto [daz, del] = action_delta(a);
  return grid.clamp(GridCell{head.az_index + daz, head.el_index + del});
}

Reachable reachable_states(const AngularGrid& grid, const GridCell& head) {
  Reachable out;
  for (std::size_t i = 0; i < kAllActions.size(); ++i) {
    out[i] = {kAllActions[i], apply_action(grid, head, kAllActions[i])};
  }
  return out;
}

double step_reward(const AngularGrid& grid, const RewardConfig& config,
                   const GridCell& talker, const GridCell& head,
                   Action /*action*/, const GridCell& next_head) {
  const double od_now = orientation_deviation(grid, talker, head);
  const double od_next = orientation_deviation(grid, talker, next_head);

  double best = std::numeric_limits<double>::infinity();
  for (const auto& [a, cell] : reachable_states(grid, head)) {
    best = std::min(best, orientation_deviation(grid, talker, cell));
  }

  double reward = config.step_other;
  // Deviations are square roots of sums of grid-angle squares, so equal
  // outcomes compare exactly.
  if (od_next == best) {
    reward = config.step_optimal;
  } else if (od_next > od_now) {
    reward = config.step_worse;
  }
  if (od_next == 0.0) {
    reward = config.additive_terminal ? reward + config.r_target
                                      : config.r_target;
  }
  return reward;
}

int chebyshev(const GridCell& a, const GridCell& b) {
  return std::max(std::abs(a.az_index - b.az_index),
                  std::abs(a.el_index - b.el_index));
}

int shortest_path_length(const GridCell& talker) {
  return chebyshev(talker, GridCell{});
}

DeviationKey DeviationKey::from(const GridCell& talker, const GridCell& head) {
  return DeviationKey{
      std::clamp(talker.az_index - head.az_index, -kAzHalf, kAzHalf),
      std::clamp(talker.el_index - head.el_index, -kElHalf, kElHalf)};
}

std::size_t DeviationKey::index() const {
  return static_cast<std::size_t>(daz + kAzHalf) * (2 * kElHalf + 1) +
         static_cast<std::size_t>(del + kElHalf);
}

}  // namespace headorient::env
