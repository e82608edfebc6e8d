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

#ifndef HEADORIENT_HEADORIENT_H_
#define HEADORIENT_HEADORIENT_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(HEADORIENT_BUILDING_LIBRARY)
#define HO_API __attribute__((visibility("default")))
#else
#define HO_API
#endif

/* Every call returns a status. On failure the message is kept per thread
   and available from ho_last_error() until the next failing call. */
typedef enum ho_status {
  HO_OK = 0,
  HO_ERR_CONFIG = 1,
  HO_ERR_DATA = 2,
  HO_ERR_NUMERIC = 3,
  HO_ERR_IO = 4,
  HO_ERR_ARGUMENT = 5,
  HO_ERR_INTERNAL = 6
} ho_status;

typedef struct ho_config ho_config;

typedef struct ho_metrics {
  double success_rate;   /* percent */
  double chebyshev;      /* mean final Chebyshev distance, grid steps */
  double episode_length; /* mean actions per episode */
  int64_t episodes;
} ho_metrics;

typedef struct ho_train_summary {
  int64_t episodes;
  int64_t optimize_steps;
  int64_t skipped_updates;
  double seconds;
} ho_train_summary;

typedef enum ho_scripted_policy {
  HO_POLICY_ORACLE = 0,     /* smallest next orientation deviation */
  HO_POLICY_ALWAYS_EAST = 1
} ho_scripted_policy;

HO_API const char* ho_version(void);
HO_API const char* ho_last_error(void);

/* Warnings go to stderr by default; a NULL callback restores that. */
typedef void (*ho_warning_callback)(const char* message);
HO_API void ho_set_warning_callback(ho_warning_callback callback);

/* ---- configuration ---- */

HO_API ho_status ho_config_load(const char* path, ho_config** out);
HO_API ho_status ho_config_parse(const char* json, ho_config** out);
HO_API void ho_config_free(ho_config* config);

HO_API ho_status ho_config_set_seed(ho_config* config, uint64_t seed);
HO_API ho_status ho_config_set_train_env(ho_config* config, const char* env_id);
HO_API ho_status ho_config_set_out_dir(ho_config* config, const char* path);
HO_API ho_status ho_config_set_data_dir(ho_config* config, const char* path);
HO_API ho_status ho_config_set_cache_dir(ho_config* config, const char* path);

/* Caller frees *json with ho_string_free. */
HO_API ho_status ho_config_to_json(const ho_config* config, char** json);
HO_API ho_status ho_config_train_env(const ho_config* config, char** env_id);
HO_API ho_status ho_config_out_dir(const ho_config* config, char** path);
/* Environment ids in config order, joined by commas. */
HO_API ho_status ho_config_environments(const ho_config* config, char** ids);
HO_API void ho_string_free(char* s);

/* ---- pipeline ---- */

HO_API ho_status ho_prepare_data(const ho_config* config);
/* env_id NULL builds every configured environment. */
HO_API ho_status ho_build_brirs(const ho_config* config, const char* env_id);

/* Trains config's training environment into out_dir/{env}. resume may be
   NULL; stop_after < 0 runs every configured episode. */
HO_API ho_status ho_train(const ho_config* config, const char* resume, int64_t stop_after,
                          ho_train_summary* summary);

/* Greedy evaluation on held-out talkers. When json_path is non-NULL the
   metrics are also written there. */
HO_API ho_status ho_evaluate(const ho_config* config, const char* checkpoint, const char* env_id,
                             const char* json_path, ho_metrics* out);

/* Audio-free uniform-random policy (eval.baseline_episodes episodes). */
HO_API ho_status ho_random_baseline(const ho_config* config, uint64_t seed, const char* json_path,
                                    ho_metrics* out);

HO_API ho_status ho_scripted_metrics(const ho_config* config, ho_scripted_policy policy,
                                     ho_metrics* out);

/* Every checkpoint out_dir/{train env}/checkpoint.htqn for the configured
   generalize list (or just env_id when non-NULL) against every
   environment. Writes generalization.{csv,json} into out_dir. */
HO_API ho_status ho_generalize(const ho_config* config, const char* env_id);

/* metrics.json, table.csv and training_curve.csv in out_dir/{env_id} from
   the evaluation results and training log found there. */
HO_API ho_status ho_report(const ho_config* config, const char* env_id);

/* Loads and re-serializes a checkpoint; *identical is set to 1 when the
   bytes match the file. */
HO_API ho_status ho_checkpoint_roundtrip(const char* path, int* identical);

#ifdef __cplusplus
}
#endif

#endif /* HEADORIENT_HEADORIENT_H_ */
