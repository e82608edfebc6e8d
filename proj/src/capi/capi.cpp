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

#include "headorient/headorient.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <new>
#include <sstream>
#include <string>

#include "headorient/error.hpp"
#include "headorient/harness/harness.hpp"

struct ho_config {
  headorient::harness::RunConfig run;
};

namespace {

namespace fs = std::filesystem;
namespace hh = headorient::harness;

thread_local std::string g_last_error;
ho_warning_callback g_warning_callback = nullptr;

ho_status fail(ho_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

ho_status status_of(headorient::ErrorKind kind) {
  switch (kind) {
    case headorient::ErrorKind::kConfig: return HO_ERR_CONFIG;
    case headorient::ErrorKind::kData: return HO_ERR_DATA;
    case headorient::ErrorKind::kNumeric: return HO_ERR_NUMERIC;
    case headorient::ErrorKind::kIo: return HO_ERR_IO;
    case headorient::ErrorKind::kArgument: return HO_ERR_ARGUMENT;
  }
  return HO_ERR_INTERNAL;
}

template <typename Fn>
ho_status guarded(Fn&& fn) {
  try {
    fn();
    return HO_OK;
  } catch (const headorient::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(HO_ERR_CONFIG, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(HO_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HO_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HO_ERR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw headorient::ArgumentError(std::string(what) + " must not be NULL");
}

void fill(const hh::Metrics& m, ho_metrics* out) {
  if (out == nullptr) return;
  out->success_rate = m.success_rate;
  out->chebyshev = m.mean_final_chebyshev;
  out->episode_length = m.mean_episode_length;
  out->episodes = m.episodes;
}

void write_json(const char* path, const nlohmann::json& j) {
  if (path == nullptr) return;
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw headorient::IoError(std::string("cannot write ") + path);
  out << j.dump(2) << "\n";
  if (!out) throw headorient::IoError(std::string("short write to ") + path);
}

void forward_warning(const std::string& message) {
  if (g_warning_callback != nullptr) g_warning_callback(message.c_str());
}

}  // namespace

extern "C" {

const char* ho_version(void) { return "1.0.0"; }

const char* ho_last_error(void) { return g_last_error.c_str(); }

void ho_set_warning_callback(ho_warning_callback callback) {
  static const headorient::WarningSink stderr_sink = headorient::set_warning_sink(nullptr);
  g_warning_callback = callback;
  headorient::set_warning_sink(callback != nullptr ? &forward_warning : stderr_sink);
}

ho_status ho_config_load(const char* path, ho_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ho_config{hh::RunConfig::load(path)};
  });
}

ho_status ho_config_parse(const char* json, ho_config** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      throw headorient::ConfigError(std::string("malformed JSON: ") + e.what());
    }
    *out = new ho_config{hh::RunConfig::from_json(j)};
  });
}

void ho_config_free(ho_config* config) { delete config; }

ho_status ho_config_set_seed(ho_config* config, uint64_t seed) {
  return guarded([&] {
    require(config, "config");
    config->run.seed = seed;
  });
}

ho_status ho_config_set_train_env(ho_config* config, const char* env_id) {
  return guarded([&] {
    require(config, "config");
    require(env_id, "env_id");
    config->run.environment(env_id);
    config->run.train_env = env_id;
  });
}

ho_status ho_config_set_out_dir(ho_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->run.out_dir = path;
  });
}

ho_status ho_config_set_data_dir(ho_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->run.data_dir = path;
  });
}

ho_status ho_config_set_cache_dir(ho_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->run.cache_dir = path;
  });
}

ho_status ho_config_to_json(const ho_config* config, char** json) {
  return guarded([&] {
    require(config, "config");
    require(json, "json");
    *json = copy_string(config->run.to_json().dump(2));
  });
}

ho_status ho_config_train_env(const ho_config* config, char** env_id) {
  return guarded([&] {
    require(config, "config");
    require(env_id, "env_id");
    *env_id = copy_string(config->run.train_env);
  });
}

ho_status ho_config_out_dir(const ho_config* config, char** path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    *path = copy_string(config->run.out_dir.string());
  });
}

ho_status ho_config_environments(const ho_config* config, char** ids) {
  return guarded([&] {
    require(config, "config");
    require(ids, "ids");
    std::string joined;
    for (const auto& e : config->run.environments) joined += (joined.empty() ? "" : ",") + e.id;
    *ids = copy_string(joined);
  });
}

void ho_string_free(char* s) { std::free(s); }

ho_status ho_prepare_data(const ho_config* config) {
  return guarded([&] {
    require(config, "config");
    hh::prepare_data(config->run);
  });
}

ho_status ho_build_brirs(const ho_config* config, const char* env_id) {
  return guarded([&] {
    require(config, "config");
    if (env_id != nullptr) {
      hh::build_brirs(config->run, env_id);
      return;
    }
    for (const auto& e : config->run.environments) hh::build_brirs(config->run, e.id);
  });
}

ho_status ho_train(const ho_config* config, const char* resume, int64_t stop_after,
                   ho_train_summary* summary) {
  return guarded([&] {
    require(config, "config");
    hh::TrainOptions options;
    options.run_dir = config->run.run_dir(config->run.train_env);
    if (resume != nullptr) options.resume = fs::path(resume);
    options.stop_after = stop_after;
    const auto s = hh::train(config->run, options);
    if (summary != nullptr) {
      summary->episodes = s.episodes;
      summary->optimize_steps = s.optimize_steps;
      summary->skipped_updates = s.skipped_updates;
      summary->seconds = s.seconds;
    }
  });
}

ho_status ho_evaluate(const ho_config* config, const char* checkpoint, const char* env_id,
                      const char* json_path, ho_metrics* out) {
  return guarded([&] {
    require(config, "config");
    require(checkpoint, "checkpoint");
    require(env_id, "env_id");
    const auto m = hh::evaluate(config->run, checkpoint, env_id);
    nlohmann::json j = m.to_json();
    j["environment"] = env_id;
    j["checkpoint"] = fs::path(checkpoint).generic_string();
    j["eval_seed"] = config->run.eval.seed;
    j["episodes_per_cell"] = config->run.eval.episodes_per_cell;
    write_json(json_path, j);
    fill(m, out);
  });
}

ho_status ho_random_baseline(const ho_config* config, uint64_t seed, const char* json_path,
                             ho_metrics* out) {
  return guarded([&] {
    require(config, "config");
    const auto& c = config->run;
    const auto m = hh::random_baseline(c.grid, c.reward, c.eval.baseline_episodes, seed);
    nlohmann::json j = m.to_json();
    j["environment"] = "random";
    j["seed"] = seed;
    write_json(json_path, j);
    fill(m, out);
  });
}

ho_status ho_scripted_metrics(const ho_config* config, ho_scripted_policy policy,
                              ho_metrics* out) {
  return guarded([&] {
    require(config, "config");
    const auto& c = config->run;
    hh::GridPolicy fn;
    switch (policy) {
      case HO_POLICY_ORACLE:
        fn = [&](const auto& talker, const auto& head) { return hh::oracle_action(c.grid, talker, head); };
        break;
      case HO_POLICY_ALWAYS_EAST:
        fn = [](const auto&, const auto&) { return headorient::env::Action::kE; };
        break;
      default:
        throw headorient::ArgumentError("unknown scripted policy");
    }
    fill(hh::evaluate_grid_policy(c.grid, c.reward, c.eval.episodes_per_cell, fn), out);
  });
}

ho_status ho_generalize(const ho_config* config, const char* env_id) {
  return guarded([&] {
    require(config, "config");
    const auto& c = config->run;
    std::vector<std::string> trained = c.generalize;
    if (env_id != nullptr) trained = {env_id};
    if (trained.empty()) {
      throw headorient::ConfigError("no training environments listed under 'generalize'");
    }
    std::map<std::string, fs::path> checkpoints;
    for (const auto& e : trained) checkpoints[e] = c.run_dir(e) / "checkpoint.htqn";
    std::vector<std::string> tests;
    for (const auto& e : c.environments) tests.push_back(e.id);
    hh::write_matrix(hh::generalization_matrix(c, checkpoints, tests), c, c.out_dir);
  });
}

ho_status ho_report(const ho_config* config, const char* env_id) {
  return guarded([&] {
    require(config, "config");
    const auto& c = config->run;
    const std::string env = env_id != nullptr ? env_id : c.train_env;
    const fs::path run_dir = c.run_dir(env);
    std::vector<std::pair<std::string, hh::Metrics>> rows;
    auto read = [](const fs::path& p) {
      std::ifstream in(p);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw headorient::DataError("malformed results file " + p.string() + ": " + e.what());
      }
      return hh::Metrics::from_json(j);
    };
    if (fs::exists(c.out_dir / "baseline.json")) rows.emplace_back("random", read(c.out_dir / "baseline.json"));
    for (const auto& e : c.environments) {
      const fs::path p = run_dir / ("eval_" + e.id + ".json");
      if (fs::exists(p)) rows.emplace_back(e.id, read(p));
    }
    if (rows.empty()) {
      throw headorient::DataError("no evaluation results under " + run_dir.string() +
                                  " (run evaluate first)");
    }
    std::vector<hh::EpisodeRecord> log;
    if (fs::exists(run_dir / "train_log.csv")) log = hh::read_train_log(run_dir / "train_log.csv");
    hh::emit_report(rows, c, run_dir, log);
  });
}

ho_status ho_checkpoint_roundtrip(const char* path, int* identical) {
  return guarded([&] {
    require(path, "path");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw headorient::DataError(std::string("missing checkpoint ") + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    const auto again = hh::Checkpoint::deserialize(bytes).serialize();
    if (identical != nullptr) *identical = again == bytes ? 1 : 0;
  });
}

}  // extern "C"
