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

#include "headorient/corpus/brir_cache.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <utility>

#include "headorient/error.hpp"
#include "headorient/hash.hpp"
#include "headorient/parallel.hpp"
#include "headorient/wav.hpp"

namespace headorient::corpus {
namespace fs = std::filesystem;
using acoustics::BinauralImpulseResponse;
using env::AngularGrid;
using env::GridCell;
using nlohmann::json;

namespace {

constexpr int kCacheFormat = 1;

std::string degrees(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v == 0.0 ? 0.0 : v);
  return buf;
}

json grid_json(const AngularGrid& grid) {
  return {{"azimuths", grid.azimuths()}, {"elevations", grid.elevations()}};
}

void write_json_atomic(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("short write on " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed cache index " + path.string() + ": " + e.what());
  }
}

void write_brir(const fs::path& path, const BinauralImpulseResponse& ir) {
  AudioBuffer audio;
  audio.sample_rate = ir.sample_rate;
  audio.channels = {ir.left, ir.right};
  const fs::path tmp = path.string() + ".tmp";
  write_wav(tmp, audio, WavEncoding::kFloat32);
  fs::rename(tmp, path);
}

BinauralImpulseResponse read_brir(const fs::path& path, std::size_t max_length) {
  AudioBuffer audio = read_wav(path);
  if (audio.channels.size() != 2) {
    throw DataError("cache entry " + path.string() + " is not stereo");
  }
  BinauralImpulseResponse ir;
  ir.sample_rate = audio.sample_rate;
  ir.left = std::move(audio.channels[0]);
  ir.right = std::move(audio.channels[1]);
  if (max_length > 0 && ir.left.size() > max_length) {
    ir.left.resize(max_length);
    ir.right.resize(max_length);
  }
  ir.validate();
  return ir;
}

// Deviation (talker minus head, degrees) of a pair.
std::pair<double, double> deviation(const AngularGrid& grid, const GridCell& talker,
                                    const GridCell& head) {
  return {grid.azimuth_deg(talker) - grid.azimuth_deg(head),
          grid.elevation_deg(talker) - grid.elevation_deg(head)};
}

std::string pair_stem(const AngularGrid& grid, const GridCell& talker,
                      const GridCell& head, bool by_deviation) {
  if (by_deviation) {
    const auto [daz, del] = deviation(grid, talker, head);
    return brir_file_stem(daz, del, 0.0, 0.0);
  }
  return brir_file_stem(grid.azimuth_deg(talker), grid.elevation_deg(talker),
                        grid.azimuth_deg(head), grid.elevation_deg(head));
}

double resolve_absorption(const EnvironmentSpec& env, const AngularGrid& grid,
                          const acoustics::HrirProvider& provider) {
  if (env.room.anechoic()) return 0.0;
  if (env.absorption.is_number()) return env.absorption.get<double>();
  const std::string mode = env.absorption.get<std::string>();
  if (mode == "sabine") return *acoustics::sabine_absorption(env.room);
  return acoustics::calibrate_absorption(env.room, grid, provider).absorption;
}

}  // namespace

EnvironmentSpec EnvironmentSpec::preset(const std::string& id) {
  EnvironmentSpec e;
  e.id = id;
  if (id == "anechoic") {
    e.room.dims = {4.0, 6.0, 4.0};
    e.room.t60 = 0.0;
  } else if (id == "low") {
    e.room.dims = {4.0, 6.0, 4.0};
    e.room.t60 = 0.2;
  } else if (id == "med") {
    e.room.dims = {5.0, 7.0, 4.0};
    e.room.t60 = 0.4;
  } else if (id == "high") {
    e.room.dims = {6.0, 8.0, 4.0};
    e.room.t60 = 0.6;
  } else {
    throw ConfigError("unknown environment preset '" + id +
                      "' (expected anechoic, low, med or high)");
  }
  return e;
}

EnvironmentSpec EnvironmentSpec::from_json(const json& j) {
  try {
    if (j.is_string()) return preset(j.get<std::string>());
    const std::string id = j.at("id").get<std::string>();
    EnvironmentSpec e;
    bool known = id == "anechoic" || id == "low" || id == "med" || id == "high";
    if (known) e = preset(id);
    e.id = id;
    if (j.contains("dims")) e.room.dims = j.at("dims").get<std::array<double, 3>>();
    if (j.contains("t60")) e.room.t60 = j.at("t60").get<double>();
    if (j.contains("speed_of_sound")) e.room.speed_of_sound = j.at("speed_of_sound").get<double>();
    if (j.contains("sample_rate")) e.room.sample_rate = j.at("sample_rate").get<int>();
    if (j.contains("absorption")) e.absorption = j.at("absorption");
    if (j.contains("hrir")) e.hrir = j.at("hrir");
    if (!known && !j.contains("dims")) {
      throw ConfigError("environment '" + id + "' needs dims and t60");
    }
    if (e.id.empty() || e.id.find_first_of("/\\") != std::string::npos) {
      throw ConfigError("environment id must be a plain name");
    }
    e.room.validate();
    if (e.absorption.is_string()) {
      const auto mode = e.absorption.get<std::string>();
      if (mode != "calibrated" && mode != "sabine") {
        throw ConfigError("absorption must be \"calibrated\", \"sabine\" or a number");
      }
    } else if (e.absorption.is_number()) {
      const double a = e.absorption.get<double>();
      if (!(a > 0.0 && a < 1.0)) throw ConfigError("absorption must lie in (0, 1)");
    } else {
      throw ConfigError("absorption must be \"calibrated\", \"sabine\" or a number");
    }
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("bad environment spec: ") + ex.what());
  }
}

json EnvironmentSpec::to_json() const {
  return {{"id", id},
          {"dims", room.dims},
          {"t60", room.t60},
          {"speed_of_sound", room.speed_of_sound},
          {"sample_rate", room.sample_rate},
          {"absorption", absorption},
          {"hrir", hrir}};
}

std::string brir_file_stem(double talker_az, double talker_el, double head_az,
                           double head_el) {
  return degrees(talker_az) + "_" + degrees(talker_el) + "__" + degrees(head_az) +
         "_" + degrees(head_el);
}

std::string brir_cache_hash(const EnvironmentSpec& env, const AngularGrid& grid) {
  const auto provider = acoustics::make_hrir_provider(env.hrir);
  const json fingerprint = {{"format", kCacheFormat},
                            {"env", env.to_json()},
                            {"grid", grid_json(grid)},
                            {"hrir", provider->describe()},
                            {"latency", acoustics::kRenderLatency}};
  return hash_hex(fnv1a(fingerprint.dump()));
}

CacheBuildReport build_brir_cache(const fs::path& root, const EnvironmentSpec& env,
                                  const AngularGrid& grid, int parallelism) {
  env.room.validate();
  const auto provider = acoustics::make_hrir_provider(env.hrir);
  if (provider->sample_rate() != env.room.sample_rate) {
    throw ConfigError("HRIR sample rate " + std::to_string(provider->sample_rate()) +
                      " differs from the room's " + std::to_string(env.room.sample_rate));
  }
  if (const auto* pack = dynamic_cast<const acoustics::ExternalHrirPack*>(provider.get())) {
    pack->check_covers(grid);
  }

  CacheBuildReport report;
  report.config_hash = brir_cache_hash(env, grid);
  const fs::path dir = root / env.id;
  const fs::path index_path = dir / "index.json";
  fs::create_directories(dir);

  std::optional<double> absorption;
  if (fs::exists(index_path)) {
    const json old = read_json_file(index_path);
    const std::string old_hash = old.value("config_hash", "");
    if (old_hash != report.config_hash) {
      throw DataError("stale cache: " + dir.string() + " was built with config " +
                      old_hash + ", current config is " + report.config_hash);
    }
    if (old.contains("absorption")) absorption = old.at("absorption").get<double>();
  }
  if (!absorption) absorption = resolve_absorption(env, grid, *provider);
  report.absorption = *absorption;

  acoustics::RoomSpec room = env.room;
  if (!room.anechoic()) room.absorption = *absorption;
  const bool by_deviation = room.anechoic();

  json index = {{"format", kCacheFormat},
                {"config_hash", report.config_hash},
                {"env", env.to_json()},
                {"grid", grid_json(grid)},
                {"sample_rate", room.sample_rate},
                {"keyed_by", by_deviation ? "deviation" : "pair"},
                {"absorption", *absorption},
                {"complete", false}};
  write_json_atomic(index_path, index);

  std::mutex report_mutex;
  const auto cells = grid.cells();
  if (by_deviation) {
    // One representative pair per distinct deviation.
    std::map<std::string, std::pair<GridCell, GridCell>> keys;
    for (const auto& t : cells) {
      for (const auto& h : cells) keys.try_emplace(pair_stem(grid, t, h, true), t, h);
    }
    std::vector<std::pair<std::string, std::pair<GridCell, GridCell>>> jobs(keys.begin(),
                                                                          keys.end());
    parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
      const fs::path path = dir / (jobs[i].first + ".wav");
      if (fs::exists(path)) {
        std::lock_guard<std::mutex> lock(report_mutex);
        ++report.skipped;
        return;
      }
      const auto& [t, h] = jobs[i].second;
      write_brir(path, acoustics::render_brir(room, grid, t, h, *provider));
      std::lock_guard<std::mutex> lock(report_mutex);
      ++report.rendered;
    });
    report.entries = jobs.size();
  } else {
    parallel_for(cells.size(), parallelism, [&](std::size_t ti) {
      const GridCell& talker = cells[ti];
      std::vector<std::size_t> missing;
      for (std::size_t hi = 0; hi < cells.size(); ++hi) {
        if (!fs::exists(dir / (pair_stem(grid, talker, cells[hi], false) + ".wav"))) {
          missing.push_back(hi);
        }
      }
      if (!missing.empty()) {
        const auto brirs = acoustics::render_brirs_for_talker(room, grid, talker, *provider);
        for (std::size_t hi : missing) {
          write_brir(dir / (pair_stem(grid, talker, cells[hi], false) + ".wav"),
                     brirs[grid.index_of(cells[hi])]);
        }
      }
      std::lock_guard<std::mutex> lock(report_mutex);
      report.rendered += missing.size();
      report.skipped += cells.size() - missing.size();
    });
    report.entries = cells.size() * cells.size();
  }

  index["complete"] = true;
  index["entries"] = report.entries;
  write_json_atomic(index_path, index);
  return report;
}

BrirCache BrirCache::open(const fs::path& root, const EnvironmentSpec& env,
                          const AngularGrid& grid, std::size_t max_length) {
  const fs::path dir = root / env.id;
  const fs::path index_path = dir / "index.json";
  if (!fs::exists(index_path)) {
    throw DataError("no BRIR cache for environment '" + env.id + "' under " +
                    root.string() + " (run build-brirs first)");
  }
  const json index = read_json_file(index_path);
  const std::string expected = brir_cache_hash(env, grid);
  if (index.value("config_hash", "") != expected) {
    throw DataError("stale cache: " + dir.string() + " has config " +
                    index.value("config_hash", "?") + ", expected " + expected);
  }
  if (!index.value("complete", false)) {
    throw DataError("BRIR cache for '" + env.id + "' is incomplete (rerun build-brirs)");
  }

  BrirCache cache(grid);
  cache.env_id_ = env.id;
  cache.by_deviation_ = index.value("keyed_by", "pair") == "deviation";
  cache.absorption_ = index.value("absorption", 0.0);
  const auto cells = grid.cells();
  const std::size_t n = cells.size();
  cache.by_pair_.resize(n * n);

  std::vector<std::string> stems(n * n);
  std::map<std::string, std::size_t> unique;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t h = 0; h < n; ++h) {
      stems[t * n + h] = pair_stem(grid, cells[t], cells[h], cache.by_deviation_);
      unique.try_emplace(stems[t * n + h], unique.size());
    }
  }
  std::vector<std::string> files(unique.size());
  for (const auto& [stem, i] : unique) files[i] = stem;
  cache.store_.resize(files.size());
  parallel_for(files.size(), 0, [&](std::size_t i) {
    const fs::path path = dir / (files[i] + ".wav");
    if (!fs::exists(path)) {
      throw DataError("BRIR cache '" + env.id + "' lacks " + path.filename().string());
    }
    cache.store_[i] = std::make_shared<const BinauralImpulseResponse>(read_brir(path, max_length));
  });
  for (std::size_t k = 0; k < stems.size(); ++k) {
    cache.by_pair_[k] = cache.store_[unique.at(stems[k])];
  }
  return cache;
}

std::shared_ptr<const BinauralImpulseResponse> BrirCache::fetch(
    const GridCell& talker, const GridCell& head) const {
  if (!grid_.contains(talker) || !grid_.contains(head)) {
    throw DataError("no BRIR for (" + env_id_ + ", talker " + env::to_string(talker) +
                    ", head " + env::to_string(head) + ")");
  }
  return by_pair_[grid_.index_of(talker) * grid_.size() + grid_.index_of(head)];
}

}  // namespace headorient::corpus
