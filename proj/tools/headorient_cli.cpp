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

// Command-line front end. Links only the C API.

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "headorient/headorient.h"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string env;
  std::string checkpoint;
  std::string out;
};

// 0 ok, 1 config or usage, 2 data or I/O, 3 numeric.
int exit_code(ho_status s) {
  switch (s) {
    case HO_OK: return 0;
    case HO_ERR_CONFIG:
    case HO_ERR_ARGUMENT: return 1;
    case HO_ERR_NUMERIC: return 3;
    case HO_ERR_DATA:
    case HO_ERR_IO:
    case HO_ERR_INTERNAL: return 2;
  }
  return 2;
}

class Failure {
 public:
  explicit Failure(ho_status s) : status(s) {}
  ho_status status;
};

void check(ho_status s) {
  if (s != HO_OK) throw Failure(s);
}

std::string take(char* s) {
  std::string out = s != nullptr ? s : "";
  ho_string_free(s);
  return out;
}

void print_metrics(const char* label, const ho_metrics& m) {
  std::printf("%-10s success %6.2f%%  chebyshev %.3f  length %.3f  (%lld episodes)\n", label,
              m.success_rate, m.chebyshev, m.episode_length, static_cast<long long>(m.episodes));
}

class Session {
 public:
  explicit Session(const Flags& f) : flags_(f) {
    check(ho_config_load(f.config.c_str(), &config_));
    if (f.seed) check(ho_config_set_seed(config_, *f.seed));
  }
  ~Session() { ho_config_free(config_); }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  ho_config* get() { return config_; }
  std::string train_env() { return take_out(ho_config_train_env); }
  std::string out_dir() { return take_out(ho_config_out_dir); }

 private:
  template <typename Fn>
  std::string take_out(Fn fn) {
    char* s = nullptr;
    check(fn(config_, &s));
    return take(s);
  }
  const Flags& flags_;
  ho_config* config_ = nullptr;
};

int run_prepare(const Flags& f) {
  Session s(f);
  if (!f.out.empty()) check(ho_config_set_data_dir(s.get(), f.out.c_str()));
  check(ho_prepare_data(s.get()));
  std::printf("prepared corpus\n");
  return 0;
}

int run_build(const Flags& f) {
  Session s(f);
  if (!f.out.empty()) check(ho_config_set_cache_dir(s.get(), f.out.c_str()));
  check(ho_build_brirs(s.get(), f.env.empty() ? nullptr : f.env.c_str()));
  std::printf("BRIR cache complete\n");
  return 0;
}

int run_train(const Flags& f) {
  Session s(f);
  if (!f.out.empty()) check(ho_config_set_out_dir(s.get(), f.out.c_str()));
  if (!f.env.empty()) check(ho_config_set_train_env(s.get(), f.env.c_str()));
  ho_train_summary summary{};
  check(ho_train(s.get(), f.checkpoint.empty() ? nullptr : f.checkpoint.c_str(), -1, &summary));
  std::printf("trained %lld episodes, %lld optimize steps (%lld skipped) in %.1f s\n",
              static_cast<long long>(summary.episodes),
              static_cast<long long>(summary.optimize_steps),
              static_cast<long long>(summary.skipped_updates), summary.seconds);
  return 0;
}

int run_evaluate(const Flags& f) {
  Session s(f);
  if (!f.out.empty()) check(ho_config_set_out_dir(s.get(), f.out.c_str()));
  const std::string test_env = f.env.empty() ? s.train_env() : f.env;
  // Without --checkpoint, evaluate the agent trained on the test environment.
  std::string ckpt = f.checkpoint;
  std::string run_dir = s.out_dir() + "/" + test_env;
  if (ckpt.empty()) {
    ckpt = run_dir + "/checkpoint.htqn";
  } else {
    const auto slash = ckpt.find_last_of('/');
    run_dir = slash == std::string::npos ? "." : ckpt.substr(0, slash);
  }
  const std::string json = run_dir + "/eval_" + test_env + ".json";
  ho_metrics m{};
  check(ho_evaluate(s.get(), ckpt.c_str(), test_env.c_str(), json.c_str(), &m));
  print_metrics(test_env.c_str(), m);
  return 0;
}

int run_baseline(const Flags& f) {
  Session s(f);
  if (!f.out.empty()) check(ho_config_set_out_dir(s.get(), f.out.c_str()));
  const std::string json = s.out_dir() + "/baseline.json";
  ho_metrics m{};
  check(ho_random_baseline(s.get(), f.seed.value_or(1), json.c_str(), &m));
  print_metrics("random", m);
  check(ho_scripted_metrics(s.get(), HO_POLICY_ORACLE, &m));
  print_metrics("oracle", m);
  return 0;
}

int run_generalize(const Flags& f) {
  Session s(f);
  if (!f.out.empty()) check(ho_config_set_out_dir(s.get(), f.out.c_str()));
  check(ho_generalize(s.get(), f.env.empty() ? nullptr : f.env.c_str()));
  std::printf("wrote %s/generalization.csv\n", s.out_dir().c_str());
  return 0;
}

int run_report(const Flags& f) {
  Session s(f);
  if (!f.out.empty()) check(ho_config_set_out_dir(s.get(), f.out.c_str()));
  const std::string env = f.env.empty() ? s.train_env() : f.env;
  check(ho_report(s.get(), env.c_str()));
  std::printf("wrote report to %s/%s\n", s.out_dir().c_str(), env.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-driven head-orientation learning"};
  app.require_subcommand(1);
  Flags flags;

  auto add = [&](const char* name, const char* help, const char* env_help, const char* out_help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Override the run seed");
    if (env_help != nullptr) sub->add_option("--env", flags.env, env_help);
    sub->add_option("--out", flags.out, out_help);
    return sub;
  };
  auto* prepare = add("prepare-data", "Split the corpus by talker and normalize clips", nullptr,
                      "Prepared corpus directory (overrides data_dir)");
  auto* build = add("build-brirs", "Render the BRIR cache", "Environment (default: all)",
                    "Cache root (overrides cache_dir)");
  auto* train = add("train", "Train a Q-network", "Training environment",
                    "Run root (overrides out_dir)");
  train->add_option("--checkpoint", flags.checkpoint, "Resume from this checkpoint");
  auto* evaluate = add("evaluate", "Greedy evaluation on held-out talkers", "Test environment",
                       "Run root (overrides out_dir)");
  evaluate->add_option("--checkpoint", flags.checkpoint, "Checkpoint to evaluate");
  auto* baseline = add("baseline", "Random and oracle policies on the grid", nullptr,
                       "Run root (overrides out_dir)");
  auto* generalize = add("generalize", "Cross-environment evaluation matrix",
                         "Single training environment", "Run root (overrides out_dir)");
  auto* report = add("report", "Write metrics.json, table.csv and training_curve.csv",
                     "Training environment", "Run root (overrides out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*prepare) return run_prepare(flags);
    if (*build) return run_build(flags);
    if (*train) return run_train(flags);
    if (*evaluate) return run_evaluate(flags);
    if (*baseline) return run_baseline(flags);
    if (*generalize) return run_generalize(flags);
    if (*report) return run_report(flags);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", ho_last_error());
    return exit_code(f.status);
  }
  return 1;
}
