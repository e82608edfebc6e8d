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

#ifndef HEADORIENT_HARNESS_CONFIG_HPP_
#define HEADORIENT_HARNESS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "headorient/corpus/brir_cache.hpp"
#include "headorient/corpus/corpus.hpp"
#include "headorient/corpus/synthetic.hpp"
#include "headorient/environment/features.hpp"
#include "headorient/environment/grid.hpp"
#include "headorient/learner/dqn.hpp"
#include "headorient/learner/network.hpp"

namespace headorient::harness {

struct TrainConfig {
  std::int64_t episodes = 76800;
  int batch = 1024;
  learner::TdConfig td;
  learner::AdamWConfig optimizer;
  learner::EpsilonSchedule epsilon;
  double tau = 0.00005;
  int target_every = 1;  // optimize steps between soft updates (C)
  std::size_t replay_per_cell = 5000;
  // Optimization starts once the buffer holds this many transitions
  // (0 means one batch) and then runs every `train_every` actions.
  std::size_t learn_start = 0;
  int train_every = 1;
  std::int64_t checkpoint_every = 1000;  // episodes; 0 disables
  int stats_samples = 512;               // windows for feature standardization
  int curve_window = 100;                // episodes per training-curve point
  int log_every = 100;                   // progress lines on stderr; 0 silences
};

struct EvalConfig {
  int episodes_per_cell = 3;
  std::uint64_t seed = 20240101;
  std::int64_t baseline_episodes = 100000;
};

// Everything a run depends on. Serialized verbatim into reports and
// checkpoints.
struct RunConfig {
  std::string profile = "custom";
  std::uint64_t seed = 1;

  // Paths are used as given (relative to the working directory).
  std::filesystem::path data_dir = "work/data";
  std::filesystem::path cache_dir = "work/cache";
  std::filesystem::path out_dir = "work/runs";
  // Raw corpus manifest; when absent prepare-data synthesizes one.
  std::optional<std::filesystem::path> corpus_manifest;
  corpus::SyntheticCorpusConfig synthetic;
  corpus::SplitConfig split;

  env::AngularGrid grid = env::AngularGrid::full();
  std::vector<corpus::EnvironmentSpec> environments;
  std::string train_env = "anechoic";

  env::FeatureConfig features;
  learner::NetworkConfig network;
  env::RewardConfig reward;
  TrainConfig train;
  EvalConfig eval;
  // Training environments whose checkpoints enter the generalization
  // matrix.
  std::vector<std::string> generalize;
  int threads = 0;  // 0 = hardware concurrency

  const corpus::EnvironmentSpec& environment(const std::string& id) const;

  void validate() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Hash of the fields that determine a trained checkpoint (seed, grid,
  // training environment, corpus split, features, network, reward, train).
  std::uint64_t training_hash() const;
  // Output directory of the run trained on `env_id`.
  std::filesystem::path run_dir(const std::string& env_id) const;
};

nlohmann::json grid_to_json(const env::AngularGrid& grid);
env::AngularGrid grid_from_json(const nlohmann::json& j);

}  // namespace headorient::harness

#endif  // HEADORIENT_HARNESS_CONFIG_HPP_
