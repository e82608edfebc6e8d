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

#include "headorient/harness/config.hpp"

#include <fstream>
#include <set>

#include "headorient/error.hpp"
#include "headorient/hash.hpp"

namespace headorient::harness {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

json reward_to_json(const env::RewardConfig& r) {
  return {{"step_optimal", r.step_optimal}, {"step_worse", r.step_worse},
          {"step_other", r.step_other},     {"r_target", r.r_target},
          {"max_steps", r.max_steps},       {"additive_terminal", r.additive_terminal}};
}

env::RewardConfig reward_from_json(const json& j) {
  reject_unknown(j, {"step_optimal", "step_worse", "step_other", "r_target", "max_steps",
                     "additive_terminal"},
                 "reward");
  env::RewardConfig r;
  r.step_optimal = j.value("step_optimal", r.step_optimal);
  r.step_worse = j.value("step_worse", r.step_worse);
  r.step_other = j.value("step_other", r.step_other);
  r.r_target = j.value("r_target", r.r_target);
  r.max_steps = j.value("max_steps", r.max_steps);
  r.additive_terminal = j.value("additive_terminal", r.additive_terminal);
  return r;
}

json train_to_json(const TrainConfig& t) {
  return {{"episodes", t.episodes},
          {"batch", t.batch},
          {"gamma", t.td.gamma},
          {"huber_delta", t.td.huber_delta},
          {"squared_huber", t.td.squared_huber},
          {"lr", t.optimizer.lr},
          {"beta1", t.optimizer.beta1},
          {"beta2", t.optimizer.beta2},
          {"adam_eps", t.optimizer.eps},
          {"weight_decay", t.optimizer.weight_decay},
          {"clip_norm", t.optimizer.clip_norm},
          {"epsilon", {{"start", t.epsilon.start},
                       {"end", t.epsilon.end},
                       {"decay_episodes", t.epsilon.decay_episodes}}},
          {"tau", t.tau},
          {"target_every", t.target_every},
          {"replay_per_cell", t.replay_per_cell},
          {"learn_start", t.learn_start},
          {"train_every", t.train_every},
          {"checkpoint_every", t.checkpoint_every},
          {"stats_samples", t.stats_samples},
          {"curve_window", t.curve_window},
          {"log_every", t.log_every}};
}

TrainConfig train_from_json(const json& j) {
  reject_unknown(j, {"episodes", "batch", "gamma", "huber_delta", "squared_huber", "lr", "beta1",
                     "beta2", "adam_eps", "weight_decay", "clip_norm", "epsilon", "tau",
                     "target_every", "replay_per_cell", "learn_start", "train_every",
                     "checkpoint_every", "stats_samples", "curve_window", "log_every"},
                 "train");
  TrainConfig t;
  t.episodes = j.value("episodes", t.episodes);
  t.batch = j.value("batch", t.batch);
  t.td.gamma = j.value("gamma", t.td.gamma);
  t.td.huber_delta = j.value("huber_delta", t.td.huber_delta);
  t.td.squared_huber = j.value("squared_huber", t.td.squared_huber);
  t.optimizer.lr = j.value("lr", t.optimizer.lr);
  t.optimizer.beta1 = j.value("beta1", t.optimizer.beta1);
  t.optimizer.beta2 = j.value("beta2", t.optimizer.beta2);
  t.optimizer.eps = j.value("adam_eps", t.optimizer.eps);
  t.optimizer.weight_decay = j.value("weight_decay", t.optimizer.weight_decay);
  t.optimizer.clip_norm = j.value("clip_norm", t.optimizer.clip_norm);
  if (j.contains("epsilon")) {
    const json& e = j.at("epsilon");
    reject_unknown(e, {"start", "end", "decay_episodes"}, "train.epsilon");
    t.epsilon.start = e.value("start", t.epsilon.start);
    t.epsilon.end = e.value("end", t.epsilon.end);
    t.epsilon.decay_episodes = e.value("decay_episodes", t.epsilon.decay_episodes);
  }
  t.tau = j.value("tau", t.tau);
  t.target_every = j.value("target_every", t.target_every);
  t.replay_per_cell = j.value("replay_per_cell", t.replay_per_cell);
  t.learn_start = j.value("learn_start", t.learn_start);
  t.train_every = j.value("train_every", t.train_every);
  t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
  t.stats_samples = j.value("stats_samples", t.stats_samples);
  t.curve_window = j.value("curve_window", t.curve_window);
  t.log_every = j.value("log_every", t.log_every);
  return t;
}

}  // namespace

json grid_to_json(const env::AngularGrid& grid) {
  return {{"azimuths", grid.azimuths()}, {"elevations", grid.elevations()}};
}

env::AngularGrid grid_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "full") return env::AngularGrid::full();
    if (name == "reduced") return env::AngularGrid::reduced();
    throw ConfigError("unknown grid '" + name + "' (expected full, reduced or an object)");
  }
  reject_unknown(j, {"azimuths", "elevations"}, "grid");
  return env::AngularGrid(j.at("azimuths").get<std::vector<double>>(),
                          j.at("elevations").get<std::vector<double>>());
}

const corpus::EnvironmentSpec& RunConfig::environment(const std::string& id) const {
  for (const auto& e : environments) {
    if (e.id == id) return e;
  }
  throw ConfigError("environment '" + id + "' is not listed in the run config");
}

void RunConfig::validate() const {
  if (environments.empty()) throw ConfigError("run config lists no environments");
  std::set<std::string> ids;
  for (const auto& e : environments) {
    if (!ids.insert(e.id).second) throw ConfigError("duplicate environment '" + e.id + "'");
  }
  environment(train_env);
  for (const auto& g : generalize) environment(g);
  features.validate();
  network.validate();
  if (network.input_dim != features.dim()) {
    throw ConfigError("network input_dim " + std::to_string(network.input_dim) +
                      " differs from the feature dimension " + std::to_string(features.dim()));
  }
  if (network.outputs != env::kNumActions) throw ConfigError("network needs 8 outputs");
  if (features.segment != static_cast<int>(corpus::kWindowSamples) ||
      features.sample_rate != corpus::kSampleRate) {
    throw ConfigError("features must use 500 ms segments at 16 kHz");
  }
  const auto& t = train;
  if (t.episodes < 1) throw ConfigError("train.episodes must be >= 1");
  if (t.batch < 1) throw ConfigError("train.batch must be >= 1");
  if (!(t.td.gamma >= 0.0 && t.td.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(t.td.huber_delta > 0.0)) throw ConfigError("huber_delta must be positive");
  if (!(t.optimizer.lr > 0.0)) throw ConfigError("lr must be positive");
  if (t.optimizer.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  for (double e : {t.epsilon.start, t.epsilon.end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("epsilon values must lie in [0, 1]");
  }
  if (!(t.tau >= 0.0 && t.tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (t.target_every < 1 || t.train_every < 1) {
    throw ConfigError("target_every and train_every must be >= 1");
  }
  if (t.replay_per_cell < 1) throw ConfigError("replay_per_cell must be >= 1");
  if (t.stats_samples < 2) throw ConfigError("stats_samples must be >= 2");
  if (t.curve_window < 1) throw ConfigError("curve_window must be >= 1");
  if (eval.episodes_per_cell < 1) throw ConfigError("eval.episodes_per_cell must be >= 1");
  if (eval.baseline_episodes < 1) throw ConfigError("eval.baseline_episodes must be >= 1");
  if (reward.max_steps < 1 || reward.max_steps > static_cast<int>(corpus::kWindowsPerClip)) {
    throw ConfigError("reward.max_steps must lie in [1, 20]");
  }
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  reject_unknown(j, {"profile", "seed", "data_dir", "cache_dir", "out_dir", "corpus_manifest",
                     "synthetic", "split", "grid", "environments", "train_env", "features",
                     "network", "reward", "train", "eval", "generalize", "threads"},
                 "run config");
  RunConfig c;
  try {
    c.profile = j.value("profile", c.profile);
    c.seed = j.value("seed", c.seed);
    c.data_dir = j.value("data_dir", c.data_dir.string());
    c.cache_dir = j.value("cache_dir", c.cache_dir.string());
    c.out_dir = j.value("out_dir", c.out_dir.string());
    if (j.contains("corpus_manifest") && !j.at("corpus_manifest").is_null()) {
      c.corpus_manifest = j.at("corpus_manifest").get<std::string>();
    }
    if (j.contains("synthetic")) {
      const json& s = j.at("synthetic");
      reject_unknown(s, {"talkers", "clips_per_talker", "seconds", "seed"}, "synthetic");
      c.synthetic.talkers = s.value("talkers", c.synthetic.talkers);
      c.synthetic.clips_per_talker = s.value("clips_per_talker", c.synthetic.clips_per_talker);
      c.synthetic.seconds = s.value("seconds", c.synthetic.seconds);
      c.synthetic.seed = s.value("seed", c.synthetic.seed);
    }
    if (j.contains("split")) {
      const json& s = j.at("split");
      reject_unknown(s, {"train_talkers", "train_clips", "test_talkers", "test_clips"}, "split");
      c.split.train_talkers = s.value("train_talkers", c.split.train_talkers);
      c.split.train_clips = s.value("train_clips", c.split.train_clips);
      c.split.test_talkers = s.value("test_talkers", c.split.test_talkers);
      c.split.test_clips = s.value("test_clips", c.split.test_clips);
    }
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    if (j.contains("environments")) {
      for (const auto& e : j.at("environments")) {
        c.environments.push_back(corpus::EnvironmentSpec::from_json(e));
      }
    } else {
      for (const char* id : {"anechoic", "low", "med", "high"}) {
        c.environments.push_back(corpus::EnvironmentSpec::preset(id));
      }
    }
    c.train_env = j.value("train_env", c.train_env);
    if (j.contains("features")) c.features = env::FeatureConfig::from_json(j.at("features"));
    json net = j.value("network", json::object());
    if (!net.contains("input_dim")) net["input_dim"] = c.features.dim();
    c.network = learner::NetworkConfig::from_json(net);
    if (j.contains("reward")) c.reward = reward_from_json(j.at("reward"));
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      reject_unknown(e, {"episodes_per_cell", "seed", "baseline_episodes"}, "eval");
      c.eval.episodes_per_cell = e.value("episodes_per_cell", c.eval.episodes_per_cell);
      c.eval.seed = e.value("seed", c.eval.seed);
      c.eval.baseline_episodes = e.value("baseline_episodes", c.eval.baseline_episodes);
    }
    if (j.contains("generalize")) c.generalize = j.at("generalize").get<std::vector<std::string>>();
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json envs = json::array();
  for (const auto& e : environments) envs.push_back(e.to_json());
  json j = {{"profile", profile},
            {"seed", seed},
            {"data_dir", data_dir.generic_string()},
            {"cache_dir", cache_dir.generic_string()},
            {"out_dir", out_dir.generic_string()},
            {"corpus_manifest", corpus_manifest ? json(corpus_manifest->generic_string()) : json()},
            {"synthetic", {{"talkers", synthetic.talkers},
                           {"clips_per_talker", synthetic.clips_per_talker},
                           {"seconds", synthetic.seconds},
                           {"seed", synthetic.seed}}},
            {"split", {{"train_talkers", split.train_talkers},
                       {"train_clips", split.train_clips},
                       {"test_talkers", split.test_talkers},
                       {"test_clips", split.test_clips}}},
            {"grid", grid_to_json(grid)},
            {"environments", envs},
            {"train_env", train_env},
            {"features", features.to_json()},
            {"network", network.to_json()},
            {"reward", reward_to_json(reward)},
            {"train", train_to_json(train)},
            {"eval", {{"episodes_per_cell", eval.episodes_per_cell},
                      {"seed", eval.seed},
                      {"baseline_episodes", eval.baseline_episodes}}},
            {"generalize", generalize},
            {"threads", threads}};
  return j;
}

std::uint64_t RunConfig::training_hash() const {
  const json full = to_json();
  json t = full.at("train");
  // Bookkeeping knobs that do not change the learned parameters.
  for (const char* k : {"checkpoint_every", "log_every", "curve_window"}) t.erase(k);
  const json key = {{"seed", seed},
                    {"grid", full.at("grid")},
                    {"env", environment(train_env).to_json()},
                    {"synthetic", corpus_manifest ? json() : full.at("synthetic")},
                    {"split", full.at("split")},
                    {"features", full.at("features")},
                    {"network", full.at("network")},
                    {"reward", full.at("reward")},
                    {"train", t}};
  return fnv1a(key.dump());
}

std::filesystem::path RunConfig::run_dir(const std::string& env_id) const {
  return out_dir / env_id;
}

}  // namespace headorient::harness
