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

#ifndef HEADORIENT_ENVIRONMENT_EPISODE_HPP_
#define HEADORIENT_ENVIRONMENT_EPISODE_HPP_

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "headorient/corpus/brir_cache.hpp"
#include "headorient/corpus/corpus.hpp"
#include "headorient/environment/features.hpp"
#include "headorient/environment/grid.hpp"
#include "headorient/rng.hpp"

namespace headorient::env {

struct Observation {
  std::shared_ptr<const FeatureMatrix> frames;
  DeviationKey key;  // diagnostics and replay keying; never a network input
};

struct EpisodeState {
  std::string env_id;
  GridCell talker;
  GridCell head;
  int t = 0;
  std::size_t clip = 0;  // index into the engine's ClipSet
  bool done = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

struct EpisodeStart {
  GridCell talker;
  std::size_t clip = 0;
};

// Talker uniform over the grid's start cells, then clip uniform over
// `clip_count`. The draw order is part of the reproducibility contract.
EpisodeStart draw_episode_start(const std::vector<GridCell>& start_cells,
                                std::size_t clip_count, Rng& rng);

// One talker and head on an angular grid. Observation t is window t of the
// clip, rendered through the BRIR of the current (talker, head) pair,
// truncated to the window length, turned into features and standardized.
// An episode ends at the target or after max_steps actions; the observation
// returned with the final capped step is all zeros (there is no window 20).
class EpisodeEngine {
 public:
  EpisodeEngine(std::shared_ptr<const corpus::BrirCache> cache,
                std::shared_ptr<const corpus::ClipSet> clips,
                RewardConfig reward, FeatureExtractor features,
                FeatureStats stats = {});

  const AngularGrid& grid() const { return cache_->grid(); }
  const RewardConfig& reward_config() const { return reward_; }
  const FeatureExtractor& features() const { return features_; }
  const EpisodeState& state() const { return state_; }
  const corpus::ClipSet& clips() const { return *clips_; }

  void set_stats(FeatureStats stats) { stats_ = std::move(stats); }

  // Talker uniform over the start cells, clip uniform, head straight ahead.
  Observation reset(Rng& rng);
  Observation reset_to(const GridCell& talker, std::size_t clip);

  // Throws ArgumentError when the episode is already done.
  StepResult step(Action action);

  // Unstandardized features of window `window` heard from `head`.
  FeatureMatrix raw_features(const GridCell& talker, const GridCell& head,
                             std::size_t clip, std::size_t window) const;

 private:
  Observation observe() const;

  std::shared_ptr<const corpus::BrirCache> cache_;
  std::shared_ptr<const corpus::ClipSet> clips_;
  RewardConfig reward_;
  FeatureExtractor features_;
  FeatureStats stats_;
  std::vector<GridCell> starts_;
  EpisodeState state_;
};

}  // namespace headorient::env

#endif  // HEADORIENT_ENVIRONMENT_EPISODE_HPP_
