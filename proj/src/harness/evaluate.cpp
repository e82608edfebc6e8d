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

#include <algorithm>
#include <set>

#include "headorient/environment/episode.hpp"
#include "headorient/error.hpp"
#include "headorient/harness/harness.hpp"

namespace headorient::harness {
namespace fs = std::filesystem;

std::array<double, env::kNumActions> greedy_q_values(const learner::GruQNetwork<float>& net,
                                                     const learner::Vec<float>& theta,
                                                     const env::FeatureMatrix& frames) {
  const auto x = learner::stack_sequences<float>({&frames});
  const auto q = net.forward(theta, x, static_cast<int>(frames.rows()), nullptr, nullptr);
  std::array<double, env::kNumActions> out{};
  for (int a = 0; a < env::kNumActions; ++a) out[static_cast<std::size_t>(a)] = q(0, a);
  return out;
}

namespace {

void check_talker_overlap(const std::vector<std::string>& trained,
                          const std::vector<std::string>& test) {
  const std::set<std::string> seen(trained.begin(), trained.end());
  std::vector<std::string> shared;
  for (const auto& t : test) {
    if (seen.contains(t)) shared.push_back(t);
  }
  if (shared.empty()) return;
  std::string list;
  for (std::size_t i = 0; i < shared.size() && i < 5; ++i) list += (i ? ", " : "") + shared[i];
  if (shared.size() > 5) list += ", ...";
  throw DataError("talker overlap between evaluation and training (" +
                  std::to_string(shared.size()) + " talkers: " + list + ")");
}

}  // namespace

Metrics evaluate(const RunConfig& config, const fs::path& checkpoint, const std::string& env_id) {
  const Checkpoint ck = Checkpoint::load(checkpoint);
  RunConfig trained = config;
  trained.train_env = ck.env_id();
  // The architecture and features come from the checkpoint; everything
  // about the test condition comes from the current config.
  try {
    const auto& saved = ck.meta.at("config");
    trained.features = env::FeatureConfig::from_json(saved.at("features"));
    trained.network = learner::NetworkConfig::from_json(saved.at("network"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint config is unreadable: ") + e.what());
  }
  if (config.environments.end() !=
      std::find_if(config.environments.begin(), config.environments.end(),
                   [&](const auto& e) { return e.id == trained.train_env; })) {
    check_config_hash(ck, trained.training_hash());
  }

  learner::GruQNetwork<float> net(trained.network);
  if (static_cast<std::size_t>(ck.theta.size()) != net.size()) {
    throw DataError("checkpoint parameter count does not match its network config");
  }
  if (ck.stats.dim() != static_cast<std::size_t>(trained.features.dim())) {
    throw DataError("checkpoint feature statistics do not match its feature config");
  }

  auto prepared = corpus::read_prepared(config.data_dir);
  check_talker_overlap(ck.train_talkers(), prepared.test.talkers());
  auto clips = std::make_shared<const corpus::ClipSet>(std::move(prepared.test));
  auto cache = std::make_shared<const corpus::BrirCache>(corpus::BrirCache::open(
      config.cache_dir, config.environment(env_id), config.grid, corpus::kWindowSamples));
  env::EpisodeEngine engine(cache, clips, config.reward, env::FeatureExtractor(trained.features),
                            ck.stats);

  const auto starts = cache->grid().start_cells();
  const int per_cell = config.eval.episodes_per_cell;
  MetricsAccumulator acc;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    for (int k = 0; k < per_cell; ++k) {
      Rng rng(Rng::derive(config.eval.seed, i * static_cast<std::size_t>(per_cell) +
                                                static_cast<std::size_t>(k)));
      env::Observation obs = engine.reset_to(starts[i], rng.uniform_index(clips->clips.size()));
      for (;;) {
        const auto q = greedy_q_values(net, ck.theta, *obs.frames);
        auto res = engine.step(static_cast<env::Action>(learner::argmax_lowest(q)));
        obs = std::move(res.observation);
        if (res.done) break;
      }
      const auto& st = engine.state();
      acc.add(st.head == st.talker, env::chebyshev(st.head, st.talker), st.t);
    }
  }
  return acc.result();
}

std::vector<MatrixEntry> generalization_matrix(const RunConfig& config,
                                               const std::map<std::string, fs::path>& checkpoints,
                                               const std::vector<std::string>& test_envs) {
  if (checkpoints.empty()) throw ConfigError("generalization needs at least one checkpoint");
  for (const auto& [train_env, path] : checkpoints) {
    if (!fs::exists(path)) {
      throw DataError("missing checkpoint for training environment '" + train_env + "': " +
                      path.string());
    }
  }
  std::vector<MatrixEntry> out;
  for (const auto& [train_env, path] : checkpoints) {
    for (const auto& test_env : test_envs) {
      out.push_back({train_env, test_env, evaluate(config, path, test_env)});
    }
  }
  return out;
}

}  // namespace headorient::harness
