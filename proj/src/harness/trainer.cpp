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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <tuple>

#include "headorient/environment/episode.hpp"
#include "headorient/error.hpp"
#include "headorient/harness/harness.hpp"
#include "headorient/hash.hpp"
#include "headorient/learner/dqn.hpp"

namespace headorient::harness {
namespace fs = std::filesystem;

namespace {

// Independent streams derived from the run seed.
constexpr std::uint64_t kEpisodeStream = 1;
constexpr std::uint64_t kStatsStream = 2;
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kLearnStream = 4;

// Updates dropped in a row before training is declared diverged.
constexpr std::int64_t kMaxConsecutiveSkips = 50;

using FramesPtr = std::shared_ptr<const env::FeatureMatrix>;

struct Session {
  const RunConfig& config;
  std::shared_ptr<const corpus::BrirCache> cache;
  std::shared_ptr<const corpus::ClipSet> clips;
  std::unique_ptr<env::EpisodeEngine> engine;
  learner::GruQNetwork<float> net;
  learner::ReplayBuffer replay;
  Rng learn_rng;
  Checkpoint ck;
  FramesPtr zeros;

  explicit Session(const RunConfig& c)
      : config(c), net(c.network), replay(c.train.replay_per_cell), learn_rng(0) {}

  const env::AngularGrid& grid() const { return cache->grid(); }

  FramesPtr observe(const env::GridCell& talker, const env::GridCell& head, std::size_t clip,
                    int window) const {
    if (window >= static_cast<int>(corpus::kWindowsPerClip)) return zeros;
    auto f = std::make_shared<env::FeatureMatrix>(
        engine->raw_features(talker, head, clip, static_cast<std::size_t>(window)));
    ck.stats.apply(*f);
    return f;
  }
};

env::FeatureStats compute_stats(const env::EpisodeEngine& engine, std::uint64_t seed, int samples) {
  Rng rng(Rng::derive(seed, kStatsStream));
  const auto starts = engine.grid().start_cells();
  const auto cells = engine.grid().cells();
  std::vector<env::FeatureMatrix> frames;
  frames.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const auto talker = starts[rng.uniform_index(starts.size())];
    const auto head = cells[rng.uniform_index(cells.size())];
    const auto clip = rng.uniform_index(engine.clips().clips.size());
    const auto window = rng.uniform_index(corpus::kWindowsPerClip);
    frames.push_back(engine.raw_features(talker, head, clip, window));
  }
  return env::FeatureStats::compute(frames);
}

// Rebuilds replay transitions from their recorded origins. Observations
// shared by consecutive transitions are shared again.
void restore_replay(Session& s) {
  if (s.ck.replay.size() != env::DeviationKey::kCount) {
    throw DataError("checkpoint replay has " + std::to_string(s.ck.replay.size()) + " cells");
  }
  std::map<std::tuple<std::size_t, std::size_t, std::uint32_t, int>, FramesPtr> memo;
  auto frames = [&](const env::GridCell& talker, const env::GridCell& head, std::uint32_t clip,
                    int window) {
    const auto key = std::make_tuple(s.grid().index_of(talker), s.grid().index_of(head), clip, window);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    auto f = s.observe(talker, head, clip, window);
    memo.emplace(key, f);
    return f;
  };
  for (std::size_t i = 0; i < s.ck.replay.size(); ++i) {
    const auto& cell = s.ck.replay[i];
    std::vector<learner::Transition> items;
    items.reserve(cell.origins.size());
    for (std::size_t k = 0; k < cell.origins.size(); ++k) {
      const auto o = TransitionOrigin::unpack(cell.origins[k], s.grid());
      if (o.clip >= s.clips->clips.size()) throw DataError("replay clip index out of range");
      learner::Transition t;
      t.obs = frames(o.talker, o.head, o.clip, o.window);
      t.action = o.action;
      t.reward = cell.rewards[k];
      t.next_obs = frames(o.talker, o.next_head, o.clip, o.window + 1);
      t.terminal = cell.terminal[k] != 0;
      t.key = env::DeviationKey::from(o.talker, o.head);
      t.origin = cell.origins[k];
      items.push_back(std::move(t));
    }
    s.replay.restore_cell(i, std::move(items), cell.next);
  }
}

void snapshot_replay(Session& s) {
  s.ck.replay.assign(env::DeviationKey::kCount, {});
  for (std::size_t i = 0; i < env::DeviationKey::kCount; ++i) {
    auto& cell = s.ck.replay[i];
    cell.next = s.replay.cell_next(i);
    for (const auto& t : s.replay.cell_items(i)) {
      cell.origins.push_back(t.origin);
      cell.rewards.push_back(t.reward);
      cell.terminal.push_back(t.terminal ? 1 : 0);
    }
  }
}

void save(Session& s, const TrainOptions& options) {
  snapshot_replay(s);
  s.ck.learn_rng = s.learn_rng.state();
  s.ck.save(options.run_dir / "checkpoint.htqn");
  write_train_log(options.run_dir / "train_log.csv", s.ck.log);
  write_training_curve(options.run_dir / "training_curve.csv", s.ck.log,
                       s.config.train.curve_window);
  s.ck.replay.clear();
}

// One optimize step; returns the batch loss.
double optimize(Session& s, learner::Vec<float>& grad) {
  const auto& t = s.config.train;
  const auto sample = s.replay.sample(static_cast<std::size_t>(t.batch), s.learn_rng);
  const auto batch = learner::TdBatch<float>::from(sample);
  const double loss = learner::td_loss<float>(s.net, s.ck.theta, s.ck.theta_target, batch, t.td,
                                              &s.learn_rng, &grad);
  ++s.ck.opt_step;
  if (learner::adamw_step<float>(s.ck.theta, grad, s.ck.adam, t.optimizer)) {
    s.ck.consecutive_skips = 0;
  } else if (++s.ck.consecutive_skips > kMaxConsecutiveSkips) {
    throw NumericError("training diverged: " + std::to_string(s.ck.consecutive_skips) +
                       " consecutive updates had non-finite gradients (optimize step " +
                       std::to_string(s.ck.opt_step) + ")");
  }
  if (s.ck.opt_step % t.target_every == 0) {
    learner::soft_update<float>(s.ck.theta_target, s.ck.theta, t.tau);
  }
  return loss;
}

void check_finite(const learner::Vec<float>& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string("non-finite entries in ") + what);
}

}  // namespace

TrainSummary train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const auto start_time = std::chrono::steady_clock::now();
  const auto& tc = config.train;
  const auto& env_spec = config.environment(config.train_env);

  Session s(config);
  auto prepared = corpus::read_prepared(config.data_dir);
  s.clips = std::make_shared<const corpus::ClipSet>(std::move(prepared.train));
  s.cache = std::make_shared<const corpus::BrirCache>(
      corpus::BrirCache::open(config.cache_dir, env_spec, config.grid, corpus::kWindowSamples));
  s.engine = std::make_unique<env::EpisodeEngine>(s.cache, s.clips, config.reward,
                                                  env::FeatureExtractor(config.features));
  s.zeros = std::make_shared<const env::FeatureMatrix>(
      env::FeatureMatrix::Zero(config.features.frames(), config.features.dim()));

  const std::uint64_t hash = config.training_hash();
  // Where the run is written is not part of its state.
  nlohmann::json saved_config = config.to_json();
  saved_config.erase("out_dir");
  nlohmann::json meta = {{"config", saved_config},
                         {"env_id", config.train_env},
                         {"train_talkers", s.clips->talkers()},
                         {"precision", "float32"}};
  if (options.resume) {
    s.ck = Checkpoint::load(*options.resume);
    check_config_hash(s.ck, hash);
    if (s.ck.env_id() != config.train_env) {
      throw ConfigError("checkpoint was trained on '" + s.ck.env_id() + "', config trains '" +
                        config.train_env + "'");
    }
    if (static_cast<std::size_t>(s.ck.theta.size()) != s.net.size()) {
      throw ConfigError("checkpoint holds " + std::to_string(s.ck.theta.size()) +
                        " parameters, the configured network has " + std::to_string(s.net.size()));
    }
    if (s.ck.stats.dim() != static_cast<std::size_t>(config.features.dim())) {
      throw ConfigError("checkpoint feature statistics do not match the feature config");
    }
    s.learn_rng.set_state(s.ck.learn_rng);
    restore_replay(s);
    s.ck.replay.clear();
  } else {
    s.ck.stats = compute_stats(*s.engine, config.seed, tc.stats_samples);
    Rng init(Rng::derive(config.seed, kInitStream));
    s.net.initialize(s.ck.theta, init);
    s.ck.theta_target = s.ck.theta;
    s.ck.adam.m = learner::Vec<float>::Zero(s.ck.theta.size());
    s.ck.adam.v = learner::Vec<float>::Zero(s.ck.theta.size());
    s.learn_rng = Rng(Rng::derive(config.seed, kLearnStream));
  }
  s.ck.config_hash = hash;
  s.ck.meta = meta;
  s.engine->set_stats(s.ck.stats);

  const std::int64_t stop =
      options.stop_after >= 0 ? std::min(tc.episodes, options.stop_after) : tc.episodes;
  const std::size_t learn_start =
      tc.learn_start > 0 ? tc.learn_start : static_cast<std::size_t>(tc.batch);
  const env::AngularGrid& grid = s.grid();
  learner::Vec<float> grad(s.net.size());

  for (std::int64_t e = s.ck.episode; e < stop; ++e) {
    Rng ep_rng(Rng::derive(Rng::derive(config.seed, kEpisodeStream), static_cast<std::uint64_t>(e)));
    EpisodeRecord rec;
    rec.epsilon = learner::schedule_epsilon(e, tc.epsilon);
    env::Observation obs = s.engine->reset(ep_rng);
    double loss_sum = 0.0;
    int loss_n = 0;
    for (;;) {
      const env::EpisodeState before = s.engine->state();
      const auto q = greedy_q_values(s.net, s.ck.theta, *obs.frames);
      const int a = learner::select_action(q, rec.epsilon, ep_rng);
      env::StepResult res = s.engine->step(static_cast<env::Action>(a));

      TransitionOrigin origin{before.talker, before.head, s.engine->state().head,
                              static_cast<std::uint32_t>(before.clip), before.t, a};
      learner::Transition t;
      t.obs = obs.frames;
      t.action = a;
      t.reward = static_cast<float>(res.reward);
      t.next_obs = res.observation.frames;
      t.terminal = res.done;
      t.key = env::DeviationKey::from(before.talker, before.head);
      t.origin = origin.pack(grid);
      s.replay.push(std::move(t));

      rec.reward += res.reward;
      ++s.ck.global_step;
      if (s.replay.size() >= learn_start && s.ck.global_step % tc.train_every == 0) {
        const double loss = optimize(s, grad);
        if (std::isfinite(loss)) {
          loss_sum += loss;
          ++loss_n;
        }
      }
      obs = std::move(res.observation);
      if (res.done) break;
    }
    const auto& st = s.engine->state();
    rec.length = st.t;
    rec.chebyshev = env::chebyshev(st.head, st.talker);
    rec.success = st.head == st.talker;
    rec.loss = loss_n > 0 ? loss_sum / loss_n : std::numeric_limits<double>::quiet_NaN();
    s.ck.log.push_back(rec);
    s.ck.episode = e + 1;

    if (tc.log_every > 0 && s.ck.episode % tc.log_every == 0) {
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(tc.log_every), s.ck.log.size());
      double cheb = 0.0, succ = 0.0, len = 0.0;
      for (std::size_t i = s.ck.log.size() - n; i < s.ck.log.size(); ++i) {
        cheb += s.ck.log[i].chebyshev;
        succ += s.ck.log[i].success ? 1.0 : 0.0;
        len += s.ck.log[i].length;
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
      std::fprintf(stderr,
                   "[%s] episode %lld/%lld  eps %.3f  success %.1f%%  chebyshev %.2f  length %.2f"
                   "  loss %s  replay %zu  %.0fs\n",
                   config.train_env.c_str(), static_cast<long long>(s.ck.episode),
                   static_cast<long long>(tc.episodes), rec.epsilon, 100.0 * succ / n, cheb / n,
                   len / n, format_fixed(rec.loss, 5).c_str(), s.replay.size(), secs);
    }
    if (tc.checkpoint_every > 0 && s.ck.episode % tc.checkpoint_every == 0 && s.ck.episode < stop) {
      check_finite(s.ck.theta, "online parameters");
      save(s, options);
    }
  }

  check_finite(s.ck.theta, "online parameters");
  check_finite(s.ck.theta_target, "target parameters");
  save(s, options);

  TrainSummary summary;
  summary.episodes = s.ck.episode;
  summary.optimize_steps = s.ck.opt_step;
  summary.skipped_updates = s.ck.adam.skipped;
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  summary.checkpoint = options.run_dir / "checkpoint.htqn";
  return summary;
}

}  // namespace headorient::harness
