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

#ifndef HEADORIENT_HARNESS_HARNESS_HPP_
#define HEADORIENT_HARNESS_HARNESS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "headorient/corpus/brir_cache.hpp"
#include "headorient/harness/checkpoint.hpp"
#include "headorient/harness/config.hpp"

namespace headorient::harness {

struct Metrics {
  double success_rate = 0.0;          // percent
  double mean_final_chebyshev = 0.0;  // grid steps
  double mean_episode_length = 0.0;   // actions
  std::int64_t episodes = 0;

  nlohmann::json to_json() const;
  static Metrics from_json(const nlohmann::json& j);
};

// Running tally of finished episodes.
class MetricsAccumulator {
 public:
  void add(bool success, int chebyshev, int length);
  Metrics result() const;

 private:
  std::int64_t n_ = 0;
  std::int64_t successes_ = 0;
  std::int64_t chebyshev_sum_ = 0;
  std::int64_t length_sum_ = 0;
};

// ---- data preparation ------------------------------------------------------

struct PrepareReport {
  std::size_t train_clips = 0;
  std::size_t test_clips = 0;
  std::vector<std::string> train_talkers;
  std::vector<std::string> test_talkers;
  bool synthesized = false;
};

// Reads config.corpus_manifest (or synthesizes a corpus under
// data_dir/raw), splits it by talker and writes the prepared corpus to
// data_dir.
PrepareReport prepare_data(const RunConfig& config);

corpus::CacheBuildReport build_brirs(const RunConfig& config, const std::string& env_id);

// ---- grid-only policies ----------------------------------------------------

// Head-only policy for audio-free rollouts.
using GridPolicy = std::function<env::Action(const env::GridCell& talker, const env::GridCell& head)>;

// The action with the smallest resulting orientation deviation (lowest index
// on ties).
env::Action oracle_action(const env::AngularGrid& grid, const env::GridCell& talker,
                          const env::GridCell& head);

// Stratified rollouts: `per_cell` episodes from every start cell, in start
// cell order.
Metrics evaluate_grid_policy(const env::AngularGrid& grid, const env::RewardConfig& reward,
                             int per_cell, const GridPolicy& policy);

// Uniform-random actions on the grid dynamics, talker uniform over start
// cells.
Metrics random_baseline(const env::AngularGrid& grid, const env::RewardConfig& reward,
                        std::int64_t episodes, std::uint64_t seed);

// ---- training --------------------------------------------------------------

struct TrainOptions {
  std::filesystem::path run_dir;  // checkpoint.htqn, train_log.csv, training_curve.csv
  std::optional<std::filesystem::path> resume;
  // Stop (and checkpoint) after this many completed episodes; used to
  // exercise resumption. Negative means run to config.train.episodes.
  std::int64_t stop_after = -1;
};

struct TrainSummary {
  std::int64_t episodes = 0;
  std::int64_t optimize_steps = 0;
  std::int64_t skipped_updates = 0;
  double seconds = 0.0;
  std::filesystem::path checkpoint;
};

// Trains on config.train_env. Throws DataError before any training when the
// corpus or BRIR cache is missing, NumericError when training diverges.
TrainSummary train(const RunConfig& config, const TrainOptions& options);

// ---- evaluation ------------------------------------------------------------

// Q-values of one observation in eval mode.
std::array<double, env::kNumActions> greedy_q_values(const learner::GruQNetwork<float>& net,
                                                     const learner::Vec<float>& theta,
                                                     const env::FeatureMatrix& frames);

// Greedy evaluation of a checkpoint on the test talkers in `env_id`,
// eval.episodes_per_cell episodes per start cell. Throws DataError "talker
// overlap" when a test talker was used for training.
Metrics evaluate(const RunConfig& config, const std::filesystem::path& checkpoint,
                 const std::string& env_id);

struct MatrixEntry {
  std::string train_env;
  std::string test_env;
  Metrics metrics;
};

// Every (train env, test env) pair; checkpoints[train_env] must exist.
std::vector<MatrixEntry> generalization_matrix(
    const RunConfig& config, const std::map<std::string, std::filesystem::path>& checkpoints,
    const std::vector<std::string>& test_envs);

// ---- reports ---------------------------------------------------------------

// Writes training_curve.csv (episode, mean final Chebyshev over consecutive
// blocks of `window` episodes).
void write_training_curve(const std::filesystem::path& path, const std::vector<EpisodeRecord>& log,
                          int window);
void write_train_log(const std::filesystem::path& path, const std::vector<EpisodeRecord>& log);
std::vector<EpisodeRecord> read_train_log(const std::filesystem::path& path);

// metrics.json (metrics plus the full run config), table.csv with one row
// per entry and, when `log` is non-empty, training_curve.csv.
void emit_report(const std::vector<std::pair<std::string, Metrics>>& rows, const RunConfig& config,
                 const std::filesystem::path& out_dir,
                 const std::vector<EpisodeRecord>& log = {});

void write_matrix(const std::vector<MatrixEntry>& matrix, const RunConfig& config,
                  const std::filesystem::path& out_dir);

// Fixed-precision rendering shared by every report.
std::string format_fixed(double v, int digits);

}  // namespace headorient::harness

#endif  // HEADORIENT_HARNESS_HARNESS_HPP_
