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

#ifndef HEADORIENT_ENVIRONMENT_GRID_HPP_
#define HEADORIENT_ENVIRONMENT_GRID_HPP_

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace headorient::env {

// A lattice position. Index 0 on each axis is straight ahead; positive
// azimuth indices are to the listener's right, positive elevation up.
struct GridCell {
  int az_index = 0;
  int el_index = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

std::string to_string(const GridCell& cell);

// Azimuth x elevation lattice shared by talker locations and head
// orientations. Both axes have an odd number of values with the middle one
// at 0 degrees.
class AngularGrid {
 public:
  AngularGrid(std::vector<double> azimuths, std::vector<double> elevations);

  // 13 azimuths from -90 to +90 in 15 degree steps, 5 elevations.
  static AngularGrid full();
  // 7 azimuths (-45..45) x 3 elevations (-20, 0, 20).
  static AngularGrid reduced();

  const std::vector<double>& azimuths() const { return azimuths_; }
  const std::vector<double>& elevations() const { return elevations_; }

  int az_half() const { return static_cast<int>(azimuths_.size() / 2); }
  int el_half() const { return static_cast<int>(elevations_.size() / 2); }
  std::size_t size() const { return azimuths_.size() * elevations_.size(); }

  bool contains(const GridCell& cell) const;
  GridCell clamp(GridCell cell) const;

  double azimuth_deg(const GridCell& cell) const;
  double elevation_deg(const GridCell& cell) const;

  // Dense index in [0, size()), azimuth-major.
  std::size_t index_of(const GridCell& cell) const;
  GridCell cell_at(std::size_t index) const;

  std::vector<GridCell> cells() const;
  // Every cell except straight ahead, in index order.
  std::vector<GridCell> start_cells() const;

  friend bool operator==(const AngularGrid&, const AngularGrid&) = default;

 private:
  std::vector<double> azimuths_;
  std::vector<double> elevations_;
};

enum class Action : int { kE = 0, kW, kN, kS, kNE, kNW, kSE, kSW };

inline constexpr int kNumActions = 8;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::kE,  Action::kW,  Action::kN,  Action::kS,
    Action::kNE, Action::kNW, Action::kSE, Action::kSW};

std::string_view action_name(Action a);
// (d_az, d_el) index step for an action.
std::pair<int, int> action_delta(Action a);

struct RewardConfig {
  double step_optimal = 0.1;
  double step_worse = -0.2;
  double step_other = 0.0;
  double r_target = 1.0;
  int max_steps = 20;
  // When set the target reward is added to the step reward instead of
  // replacing it.
  bool additive_terminal = false;
};

double orientation_deviation(const AngularGrid& grid, const GridCell& talker,
                             const GridCell& head);

using Reachable = std::array<std::pair<Action, GridCell>, kNumActions>;

// Next head cell for each action, clamped per axis. Clamping may collapse
// several actions onto the same cell.
Reachable reachable_states(const AngularGrid& grid, const GridCell& head);

GridCell apply_action(const AngularGrid& grid, const GridCell& head, Action a);

double step_reward(const AngularGrid& grid, const RewardConfig& config,
                   const GridCell& talker, const GridCell& head,
                   Action action, const GridCell& next_head);

int chebyshev(const GridCell& a, const GridCell& b);

// Minimal number of actions from straight ahead to `talker`.
int shortest_path_length(const GridCell& talker);

// Replay-buffer key: talker minus head in index units, clamped to the
// 13 x 5 box, so there are exactly 65 keys.
struct DeviationKey {
  int daz = 0;
  int del = 0;

  static constexpr int kAzHalf = 6;
  static constexpr int kElHalf = 2;
  static constexpr std::size_t kCount = (2 * kAzHalf + 1) * (2 * kElHalf + 1);

  static DeviationKey from(const GridCell& talker, const GridCell& head);
  std::size_t index() const;
  friend bool operator==(const DeviationKey&, const DeviationKey&) = default;
};

}  // namespace headorient::env

#endif  // HEADORIENT_ENVIRONMENT_GRID_HPP_
