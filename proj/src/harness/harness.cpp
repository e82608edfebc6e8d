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

#include "headorient/harness/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "headorient/corpus/synthetic.hpp"
#include "headorient/error.hpp"
#include "headorient/rng.hpp"

namespace headorient::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  try {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
  } catch (const fs::filesystem_error& e) {
    throw IoError("cannot create " + path.parent_path().string() + ": " + e.what());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

std::string format_fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

json Metrics::to_json() const {
  return {{"success_rate", success_rate},
          {"chebyshev", mean_final_chebyshev},
          {"episode_length", mean_episode_length},
          {"episodes", episodes}};
}

Metrics Metrics::from_json(const json& j) {
  Metrics m;
  m.success_rate = j.at("success_rate").get<double>();
  m.mean_final_chebyshev = j.at("chebyshev").get<double>();
  m.mean_episode_length = j.at("episode_length").get<double>();
  m.episodes = j.at("episodes").get<std::int64_t>();
  return m;
}

void MetricsAccumulator::add(bool success, int chebyshev, int length) {
  ++n_;
  successes_ += success ? 1 : 0;
  chebyshev_sum_ += chebyshev;
  length_sum_ += length;
}

Metrics MetricsAccumulator::result() const {
  Metrics m;
  m.episodes = n_;
  if (n_ == 0) return m;
  const double n = static_cast<double>(n_);
  m.success_rate = 100.0 * static_cast<double>(successes_) / n;
  m.mean_final_chebyshev = static_cast<double>(chebyshev_sum_) / n;
  m.mean_episode_length = static_cast<double>(length_sum_) / n;
  return m;
}

// ---- data ------------------------------------------------------------------

PrepareReport prepare_data(const RunConfig& config) {
  PrepareReport report;
  corpus::Manifest manifest;
  if (config.corpus_manifest) {
    manifest = corpus::read_manifest(*config.corpus_manifest);
  } else {
    manifest = corpus::synthesize_corpus(config.data_dir / "raw", config.synthetic, config.threads);
    report.synthesized = true;
  }
  const auto plan = corpus::split_corpus(manifest, config.split, config.seed);
  const auto train = corpus::load_clips(plan.train, corpus::Split::kTrain, config.threads);
  const auto test = corpus::load_clips(plan.test, corpus::Split::kTest, config.threads);
  corpus::write_prepared(config.data_dir, train, test, config.seed);
  report.train_clips = train.clips.size();
  report.test_clips = test.clips.size();
  report.train_talkers = train.talkers();
  report.test_talkers = test.talkers();
  return report;
}

corpus::CacheBuildReport build_brirs(const RunConfig& config, const std::string& env_id) {
  return corpus::build_brir_cache(config.cache_dir, config.environment(env_id), config.grid,
                                  config.threads);
}

// ---- grid policies ---------------------------------------------------------

env::Action oracle_action(const env::AngularGrid& grid, const env::GridCell& talker,
                          const env::GridCell& head) {
  env::Action best = env::Action::kE;
  double best_od = std::numeric_limits<double>::infinity();
  for (const auto& [a, next] : env::reachable_states(grid, head)) {
    const double od = env::orientation_deviation(grid, talker, next);
    if (od < best_od) {
      best_od = od;
      best = a;
    }
  }
  return best;
}

namespace {

// One grid episode from straight ahead; returns (success, chebyshev, length).
template <typename Choose>
void roll_out(const env::AngularGrid& grid, const env::RewardConfig& reward,
              const env::GridCell& talker, Choose&& choose, MetricsAccumulator& acc) {
  env::GridCell head{};
  int t = 0;
  while (t < reward.max_steps && !(head == talker)) {
    head = env::apply_action(grid, head, choose(head));
    ++t;
  }
  acc.add(head == talker, env::chebyshev(head, talker), t);
}

}  // namespace

Metrics evaluate_grid_policy(const env::AngularGrid& grid, const env::RewardConfig& reward,
                             int per_cell, const GridPolicy& policy) {
  if (per_cell < 1) throw ArgumentError("per_cell must be >= 1");
  MetricsAccumulator acc;
  for (const auto& talker : grid.start_cells()) {
    for (int k = 0; k < per_cell; ++k) {
      roll_out(grid, reward, talker,
               [&](const env::GridCell& head) { return policy(talker, head); }, acc);
    }
  }
  return acc.result();
}

Metrics random_baseline(const env::AngularGrid& grid, const env::RewardConfig& reward,
                        std::int64_t episodes, std::uint64_t seed) {
  if (episodes < 1) throw ArgumentError("random baseline needs at least one episode");
  const auto starts = grid.start_cells();
  Rng rng(seed);
  MetricsAccumulator acc;
  for (std::int64_t e = 0; e < episodes; ++e) {
    const env::GridCell talker = starts[rng.uniform_index(starts.size())];
    roll_out(grid, reward, talker,
             [&](const env::GridCell&) {
               return static_cast<env::Action>(rng.uniform_index(env::kNumActions));
             },
             acc);
  }
  return acc.result();
}

// ---- reports ---------------------------------------------------------------

void write_train_log(const fs::path& path, const std::vector<EpisodeRecord>& log) {
  std::ostringstream out;
  out << "episode,reward,length,chebyshev,success,loss,epsilon\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& r = log[i];
    out << i << ',' << format_fixed(r.reward, 6) << ',' << r.length << ',' << r.chebyshev << ','
        << (r.success ? 1 : 0) << ',' << format_fixed(r.loss, 8) << ','
        << format_fixed(r.epsilon, 6) << '\n';
  }
  write_text(path, out.str());
}

std::vector<EpisodeRecord> read_train_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing training log " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "episode,reward,length,chebyshev,success,loss,epsilon") {
    throw DataError("unexpected training log header in " + path.string());
  }
  std::vector<EpisodeRecord> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[7];
    for (auto& field : f) std::getline(row, field, ',');
    try {
      EpisodeRecord r;
      r.reward = std::stod(f[1]);
      r.length = std::stoi(f[2]);
      r.chebyshev = std::stoi(f[3]);
      r.success = f[4] == "1";
      r.loss = f[5] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[5]);
      r.epsilon = std::stod(f[6]);
      log.push_back(r);
    } catch (const std::exception&) {
      throw DataError("malformed training log line: " + line);
    }
  }
  return log;
}

void write_training_curve(const fs::path& path, const std::vector<EpisodeRecord>& log, int window) {
  if (window < 1) throw ArgumentError("curve window must be >= 1");
  std::ostringstream out;
  out << "episode,mean_chebyshev,success_rate\n";
  const std::size_t w = static_cast<std::size_t>(window);
  for (std::size_t start = 0; start + w <= log.size(); start += w) {
    double cheb = 0.0;
    double success = 0.0;
    for (std::size_t i = start; i < start + w; ++i) {
      cheb += log[i].chebyshev;
      success += log[i].success ? 1.0 : 0.0;
    }
    out << start + w << ',' << format_fixed(cheb / window, 4) << ','
        << format_fixed(100.0 * success / window, 2) << '\n';
  }
  write_text(path, out.str());
}

void emit_report(const std::vector<std::pair<std::string, Metrics>>& rows, const RunConfig& config,
                 const fs::path& out_dir, const std::vector<EpisodeRecord>& log) {
  json metrics = json::array();
  std::ostringstream table;
  table << "environment,success_rate,chebyshev,episode_length\n";
  for (const auto& [name, m] : rows) {
    json entry = m.to_json();
    entry["environment"] = name;
    metrics.push_back(entry);
    table << name << ',' << format_fixed(m.success_rate, 2) << ','
          << format_fixed(m.mean_final_chebyshev, 3) << ','
          << format_fixed(m.mean_episode_length, 3) << '\n';
  }
  const json doc = {{"metrics", metrics}, {"config", config.to_json()}};
  write_text(out_dir / "metrics.json", doc.dump(2) + "\n");
  write_text(out_dir / "table.csv", table.str());
  if (!log.empty()) write_training_curve(out_dir / "training_curve.csv", log, config.train.curve_window);
}

void write_matrix(const std::vector<MatrixEntry>& matrix, const RunConfig& config,
                  const fs::path& out_dir) {
  json entries = json::array();
  std::ostringstream csv;
  csv << "train_environment,test_environment,success_rate,chebyshev,episode_length\n";
  for (const auto& e : matrix) {
    json j = e.metrics.to_json();
    j["train_environment"] = e.train_env;
    j["test_environment"] = e.test_env;
    entries.push_back(j);
    csv << e.train_env << ',' << e.test_env << ',' << format_fixed(e.metrics.success_rate, 2)
        << ',' << format_fixed(e.metrics.mean_final_chebyshev, 3) << ','
        << format_fixed(e.metrics.mean_episode_length, 3) << '\n';
  }
  const json doc = {{"matrix", entries}, {"config", config.to_json()}};
  write_text(out_dir / "generalization.json", doc.dump(2) + "\n");
  write_text(out_dir / "generalization.csv", csv.str());
}

}  // namespace headorient::harness
