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

#ifndef HEADORIENT_CORPUS_BRIR_CACHE_HPP_
#define HEADORIENT_CORPUS_BRIR_CACHE_HPP_

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "headorient/acoustics/binaural.hpp"
#include "headorient/acoustics/room.hpp"
#include "headorient/environment/grid.hpp"

namespace headorient::corpus {

// One acoustic condition: room, how its wall absorption is chosen, and the
// head model.
struct EnvironmentSpec {
  std::string id;
  acoustics::RoomSpec room;
  // "calibrated" (rendered decay matched to t60), "sabine", or a number.
  nlohmann::json absorption = "calibrated";
  nlohmann::json hrir = {{"mode", "parametric"}};

  // anechoic, low (4x6x4 m, 0.2 s), med (5x7x4 m, 0.4 s), high (6x8x4 m,
  // 0.6 s).
  static EnvironmentSpec preset(const std::string& id);
  static EnvironmentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Cache file stem for a pair: "{talkerAz}_{talkerEl}__{headAz}_{headEl}"
// with angles in degrees.
std::string brir_file_stem(double talker_az, double talker_el, double head_az,
                           double head_el);

struct CacheBuildReport {
  std::size_t rendered = 0;
  std::size_t skipped = 0;  // already present from an earlier run
  std::size_t entries = 0;  // distinct files in the cache
  double absorption = 0.0;  // 0 for anechoic
  std::string config_hash;
};

// Renders every BRIR for the environment into root/{env id}/. Anechoic
// caches hold one file per distinct talker-minus-head angle pair (named as
// a pair with the head at 0, 0); reverberant caches hold every pair.
// Existing files from an interrupted build with the same config hash are
// kept. A different hash throws DataError "stale cache".
CacheBuildReport build_brir_cache(const std::filesystem::path& root,
                                  const EnvironmentSpec& env,
                                  const env::AngularGrid& grid,
                                  int parallelism = 1);

std::string brir_cache_hash(const EnvironmentSpec& env,
                            const env::AngularGrid& grid);

class BrirCache {
 public:
  // Loads every entry of a complete cache. When max_length > 0 responses
  // are truncated to that many samples. Throws DataError for a missing,
  // incomplete or stale cache.
  static BrirCache open(const std::filesystem::path& root,
                        const EnvironmentSpec& env,
                        const env::AngularGrid& grid,
                        std::size_t max_length = 0);

  const std::string& env_id() const { return env_id_; }
  const env::AngularGrid& grid() const { return grid_; }
  bool keyed_by_deviation() const { return by_deviation_; }
  std::size_t entries() const { return store_.size(); }
  double absorption() const { return absorption_; }

  // Throws DataError naming the (env, talker, head) triple when absent.
  std::shared_ptr<const acoustics::BinauralImpulseResponse> fetch(
      const env::GridCell& talker, const env::GridCell& head) const;

 private:
  explicit BrirCache(env::AngularGrid grid) : grid_(std::move(grid)) {}

  std::string env_id_;
  env::AngularGrid grid_;
  bool by_deviation_ = false;
  double absorption_ = 0.0;
  // Indexed by grid.index_of(talker) * grid.size() + grid.index_of(head);
  // anechoic caches share pointers across pairs with equal deviation.
  std::vector<std::shared_ptr<const acoustics::BinauralImpulseResponse>> by_pair_;
  std::vector<std::shared_ptr<const acoustics::BinauralImpulseResponse>> store_;
};

}  // namespace headorient::corpus

#endif  // HEADORIENT_CORPUS_BRIR_CACHE_HPP_
