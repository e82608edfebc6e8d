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

#ifndef HEADORIENT_HARNESS_CHECKPOINT_HPP_
#define HEADORIENT_HARNESS_CHECKPOINT_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "headorient/environment/features.hpp"
#include "headorient/environment/grid.hpp"
#include "headorient/learner/dqn.hpp"

namespace headorient::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Where a replayed transition came from. Features are recomputed from this
// on resume, so the file stays small.
struct TransitionOrigin {
  env::GridCell talker;
  env::GridCell head;       // before the action
  env::GridCell next_head;  // after the action
  std::uint32_t clip = 0;
  int window = 0;  // observation window of `head`
  int action = 0;

  // Packs grid indices relative to `grid`.
  std::uint64_t pack(const env::AngularGrid& grid) const;
  static TransitionOrigin unpack(std::uint64_t bits, const env::AngularGrid& grid);
};

struct EpisodeRecord {
  double reward = 0.0;
  int length = 0;
  int chebyshev = 0;
  bool success = false;
  double loss = 0.0;  // mean over the episode's optimize steps; NaN if none
  double epsilon = 0.0;
};

struct ReplayCell {
  std::uint64_t next = 0;
  std::vector<std::uint64_t> origins;
  std::vector<float> rewards;
  std::vector<std::uint8_t> terminal;
};

// Full training state. Parameters are float32.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  // Run config, environment id, training talkers.
  nlohmann::json meta;

  std::int64_t episode = 0;      // episodes completed
  std::int64_t global_step = 0;  // environment actions taken
  std::int64_t opt_step = 0;     // optimize steps attempted
  std::int64_t consecutive_skips = 0;

  learner::Vec<float> theta;
  learner::Vec<float> theta_target;
  learner::AdamWState<float> adam;

  env::FeatureStats stats;
  std::string learn_rng;  // textual engine state

  std::vector<ReplayCell> replay;  // one per deviation key
  std::vector<EpisodeRecord> log;  // one per completed episode

  std::string env_id() const { return meta.at("env_id").get<std::string>(); }
  std::vector<std::string> train_talkers() const;

  std::vector<std::uint8_t> serialize() const;
  // Throws DataError "not a checkpoint" for a bad magic, and DataError for
  // unsupported versions, truncation or a checksum mismatch.
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

  // Written to a temporary sibling first, then renamed.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

// Warns (with both hashes) when the checkpoint was trained under a
// different config. Returns true when they match.
bool check_config_hash(const Checkpoint& ckpt, std::uint64_t expected);

}  // namespace headorient::harness

#endif  // HEADORIENT_HARNESS_CHECKPOINT_HPP_
