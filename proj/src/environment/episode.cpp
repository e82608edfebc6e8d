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

#include "headorient/environment/episode.hpp"

#include <vector>

#include "headorient/acoustics/dsp.hpp"
#include "headorient/error.hpp"

namespace headorient::env {

EpisodeStart draw_episode_start(const std::vector<GridCell>& start_cells,
                                std::size_t clip_count, Rng& rng) {
  if (start_cells.empty() || clip_count == 0) {
    throw ArgumentError("episode start needs start cells and clips");
  }
  EpisodeStart s;
  s.talker = start_cells[rng.uniform_index(start_cells.size())];
  s.clip = rng.uniform_index(clip_count);
  return s;
}

EpisodeEngine::EpisodeEngine(std::shared_ptr<const corpus::BrirCache> cache,
                             std::shared_ptr<const corpus::ClipSet> clips,
                             RewardConfig reward, FeatureExtractor features,
                             FeatureStats stats)
    : cache_(std::move(cache)),
      clips_(std::move(clips)),
      reward_(reward),
      features_(std::move(features)),
      stats_(std::move(stats)) {
  if (!cache_ || !clips_) throw ArgumentError("EpisodeEngine needs a cache and clips");
  if (clips_->clips.empty()) throw DataError("EpisodeEngine: empty clip set");
  if (reward_.max_steps < 1 ||
      static_cast<std::size_t>(reward_.max_steps) > corpus::kWindowsPerClip) {
    throw ConfigError("max_steps must lie in [1, " +
                      std::to_string(corpus::kWindowsPerClip) + "]");
  }
  if (features_.config().segment != static_cast<int>(corpus::kWindowSamples)) {
    throw ConfigError("feature segment must equal the 500 ms window");
  }
  starts_ = grid().start_cells();
  state_.env_id = cache_->env_id();
  state_.done = true;
}

FeatureMatrix EpisodeEngine::raw_features(const GridCell& talker, const GridCell& head,
                                          std::size_t clip, std::size_t window) const {
  const auto windows = corpus::window_clip(*clips_->clips.at(clip).samples);
  const auto& w = windows.at(window);
  const std::vector<double> signal(w.begin(), w.end());
  const auto brir = cache_->fetch(talker, head);
  const auto left = acoustics::fft_convolve(signal, brir->left, signal.size());
  const auto right = acoustics::fft_convolve(signal, brir->right, signal.size());
  return features_.extract(left, right);
}

Observation EpisodeEngine::observe() const {
  auto frames = std::make_shared<FeatureMatrix>(
      raw_features(state_.talker, state_.head, state_.clip, static_cast<std::size_t>(state_.t)));
  stats_.apply(*frames);
  return {std::move(frames), DeviationKey::from(state_.talker, state_.head)};
}

Observation EpisodeEngine::reset(Rng& rng) {
  const EpisodeStart s = draw_episode_start(starts_, clips_->clips.size(), rng);
  return reset_to(s.talker, s.clip);
}

Observation EpisodeEngine::reset_to(const GridCell& talker, std::size_t clip) {
  if (!grid().contains(talker) || talker == GridCell{}) {
    throw ArgumentError("talker " + to_string(talker) + " is not a start cell");
  }
  if (clip >= clips_->clips.size()) throw ArgumentError("clip index out of range");
  state_.talker = talker;
  state_.head = GridCell{};
  state_.t = 0;
  state_.clip = clip;
  state_.done = false;
  return observe();
}

StepResult EpisodeEngine::step(Action action) {
  if (state_.done) throw ArgumentError("step on a finished episode");
  const GridCell next = apply_action(grid(), state_.head, action);
  StepResult result;
  result.reward = step_reward(grid(), reward_, state_.talker, state_.head, action, next);
  state_.head = next;
  state_.t += 1;
  const bool reached = next == state_.talker;
  state_.done = reached || state_.t >= reward_.max_steps;
  result.done = state_.done;
  if (static_cast<std::size_t>(state_.t) < corpus::kWindowsPerClip) {
    result.observation = observe();
  } else {
    const auto& cfg = features_.config();
    result.observation = {std::make_shared<FeatureMatrix>(FeatureMatrix::Zero(cfg.frames(), cfg.dim())),
                          DeviationKey::from(state_.talker, state_.head)};
  }
  return result;
}

}  // namespace headorient::env
