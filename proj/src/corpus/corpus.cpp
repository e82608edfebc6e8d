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

#include "headorient/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "headorient/error.hpp"
#include "headorient/parallel.hpp"
#include "headorient/rng.hpp"
#include "headorient/wav.hpp"

namespace headorient::corpus {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kResampleBeta = 8.0;
constexpr double kResampleZeros = 16.0;  // sinc zero crossings per side

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_index(i)]);
  }
}

json manifest_json(const Manifest& m, const fs::path& relative_to) {
  json out = json::object();
  for (const auto& [talker, paths] : m) {
    json list = json::array();
    for (const auto& p : paths) {
      // Only paths below the manifest's directory are written relative.
      const fs::path rel = relative_to.empty() ? fs::path() : p.lexically_relative(relative_to);
      const bool below = !rel.empty() && *rel.begin() != "..";
      list.push_back(below ? rel.generic_string() : p.generic_string());
    }
    out[talker] = list;
  }
  return out;
}

Manifest manifest_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw DataError("manifest must map talker ids to clip lists");
  Manifest m;
  for (const auto& [talker, list] : j.items()) {
    if (!list.is_array()) {
      throw DataError("manifest entry for talker " + talker + " is not a list");
    }
    auto& paths = m[talker];
    for (const auto& p : list) {
      fs::path path = p.get<std::string>();
      paths.push_back(path.is_absolute() ? path : base / path);
    }
  }
  return m;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write on " + path.string());
}

std::string split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

}  // namespace

std::vector<double> resample(std::span<const double> signal, int from_rate,
                             int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) {
    throw ArgumentError("sample rates must be positive");
  }
  if (from_rate == to_rate) return {signal.begin(), signal.end()};
  const double ratio = static_cast<double>(to_rate) / from_rate;
  const double cutoff = std::min(1.0, ratio) * 0.95;
  const double half = kResampleZeros / cutoff;
  const double norm = std::cyl_bessel_i(0.0, kResampleBeta);

  // Kernel sampled on a fine grid of |x| and linearly interpolated.
  constexpr int kPerSample = 512;
  const auto table_size = static_cast<std::size_t>(std::ceil(half * kPerSample)) + 2;
  std::vector<double> table(table_size, 0.0);
  for (std::size_t i = 0; i < table_size; ++i) {
    const double x = static_cast<double>(i) / kPerSample;
    const double r = x / half;
    if (r >= 1.0) break;
    table[i] = cutoff * sinc(cutoff * x) *
               std::cyl_bessel_i(0.0, kResampleBeta * std::sqrt(1.0 - r * r)) / norm;
  }

  const auto n_in = static_cast<std::int64_t>(signal.size());
  const auto n_out = static_cast<std::size_t>(
      static_cast<std::int64_t>(signal.size()) * to_rate / from_rate);
  std::vector<double> out(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) * from_rate / to_rate;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t - half)));
    const auto hi = std::min<std::int64_t>(n_in - 1, static_cast<std::int64_t>(std::floor(t + half)));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
      const double pos = std::abs(t - static_cast<double>(k)) * kPerSample;
      const auto i = static_cast<std::size_t>(pos);
      if (i + 1 >= table_size) continue;
      const double f = pos - static_cast<double>(i);
      acc += signal[static_cast<std::size_t>(k)] * (table[i] + f * (table[i + 1] - table[i]));
    }
    out[n] = acc;
  }
  return out;
}

double rms(std::span<const double> signal) {
  if (signal.empty()) return 0.0;
  double sum = 0.0;
  for (double v : signal) sum += v * v;
  return std::sqrt(sum / static_cast<double>(signal.size()));
}

void normalize_rms(std::vector<double>& signal, double dbfs) {
  const double level = rms(signal);
  if (!(level > 0.0)) throw DataError("zero energy, cannot normalize");
  const double gain = std::pow(10.0, dbfs / 20.0) / level;
  for (double& v : signal) v *= gain;
}

std::vector<double> ingest_clip(const fs::path& path, double seconds) {
  const AudioBuffer audio = read_wav(path);
  const std::size_t frames = audio.frames();
  std::vector<double> mono(frames, 0.0);
  for (const auto& ch : audio.channels) {
    for (std::size_t i = 0; i < frames; ++i) mono[i] += ch[i];
  }
  const double scale = 1.0 / static_cast<double>(audio.channels.size());
  for (double& v : mono) v *= scale;
  if (audio.sample_rate != kSampleRate) {
    mono = resample(mono, audio.sample_rate, kSampleRate);
  }
  const auto needed = static_cast<std::size_t>(std::llround(seconds * kSampleRate));
  if (mono.size() < needed) {
    throw DataError("clip too short: " + path.string() + " has " +
                    std::to_string(static_cast<double>(mono.size()) / kSampleRate) +
                    " s, need " + std::to_string(seconds) + " s");
  }
  mono.resize(needed);
  normalize_rms(mono);
  return mono;
}

std::vector<std::string> ClipSet::talkers() const {
  std::set<std::string> ids;
  for (const auto& c : clips) ids.insert(c.talker_id);
  return {ids.begin(), ids.end()};
}

Manifest read_manifest(const fs::path& path) {
  return manifest_from_json(read_json(path), path.parent_path());
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  write_text(path, manifest_json(manifest, path.parent_path()).dump(2) + "\n");
}

SplitPlan split_corpus(const Manifest& manifest, const SplitConfig& config,
                       std::uint64_t seed) {
  if (config.train_talkers < 1 || config.test_talkers < 1 ||
      config.train_clips < 1 || config.test_clips < 1) {
    throw ConfigError("split sizes must be positive");
  }
  const auto need = static_cast<std::size_t>(config.train_talkers + config.test_talkers);
  if (manifest.size() < need) {
    throw DataError("insufficient talkers: need " + std::to_string(need) + " (" +
                    std::to_string(config.train_talkers) + " train + " +
                    std::to_string(config.test_talkers) + " test), manifest has " +
                    std::to_string(manifest.size()) + ", short by " +
                    std::to_string(need - manifest.size()));
  }
  Rng rng(seed);
  std::vector<std::string> talkers;
  for (const auto& [id, _] : manifest) talkers.push_back(id);  // sorted by map
  shuffle(talkers, rng);

  SplitPlan plan;
  std::vector<std::string> shortfalls;
  auto take = [&](std::size_t first, int count, int clips, Manifest& out) {
    for (std::size_t i = first; i < first + static_cast<std::size_t>(count); ++i) {
      std::vector<fs::path> paths = manifest.at(talkers[i]);
      std::sort(paths.begin(), paths.end());
      if (paths.size() < static_cast<std::size_t>(clips)) {
        shortfalls.push_back(talkers[i] + " has " + std::to_string(paths.size()) +
                             " of " + std::to_string(clips));
        continue;
      }
      shuffle(paths, rng);
      paths.resize(static_cast<std::size_t>(clips));
      out[talkers[i]] = std::move(paths);
    }
  };
  take(0, config.train_talkers, config.train_clips, plan.train);
  take(static_cast<std::size_t>(config.train_talkers), config.test_talkers,
       config.test_clips, plan.test);
  if (!shortfalls.empty()) {
    std::string msg = "insufficient clips:";
    for (const auto& s : shortfalls) msg += " " + s + ";";
    throw DataError(msg);
  }
  return plan;
}

ClipSet load_clips(const Manifest& part, Split split, int parallelism) {
  ClipSet set;
  set.split = split;
  std::vector<std::pair<std::string, fs::path>> items;
  for (const auto& [talker, paths] : part) {
    for (const auto& p : paths) items.emplace_back(talker, p);
  }
  set.clips.resize(items.size());
  parallel_for(items.size(), parallelism, [&](std::size_t i) {
    const auto signal = ingest_clip(items[i].second);
    auto samples = std::make_shared<std::vector<float>>(signal.begin(), signal.end());
    set.clips[i] = Clip{items[i].first, items[i].second.stem().string(), std::move(samples)};
  });
  return set;
}

std::array<std::span<const float>, kWindowsPerClip> window_clip(
    std::span<const float> clip) {
  if (clip.size() != kClipSamples) {
    throw DataError("window_clip: clip has " + std::to_string(clip.size()) +
                    " samples, expected " + std::to_string(kClipSamples));
  }
  std::array<std::span<const float>, kWindowsPerClip> windows;
  for (std::size_t w = 0; w < kWindowsPerClip; ++w) {
    windows[w] = clip.subspan(w * kWindowSamples, kWindowSamples);
  }
  return windows;
}

void write_prepared(const fs::path& out_dir, const ClipSet& train,
                    const ClipSet& test, std::uint64_t seed) {
  json split = {{"seed", seed}, {"sample_rate", kSampleRate}};
  for (const ClipSet* set : {&train, &test}) {
    const std::string name = split_name(set->split);
    json talkers = json::object();
    for (const auto& clip : set->clips) {
      const fs::path rel = fs::path("clips") / name / clip.talker_id / (clip.clip_id + ".wav");
      fs::create_directories((out_dir / rel).parent_path());
      AudioBuffer audio;
      audio.sample_rate = kSampleRate;
      audio.channels.emplace_back(clip.samples->begin(), clip.samples->end());
      write_wav(out_dir / rel, audio, WavEncoding::kFloat32);
      talkers[clip.talker_id].push_back(rel.generic_string());
    }
    split[name] = talkers;
  }
  write_text(out_dir / "split.json", split.dump(2) + "\n");
}

PreparedCorpus read_prepared(const fs::path& out_dir) {
  const fs::path index = out_dir / "split.json";
  if (!fs::exists(index)) {
    throw DataError("no prepared corpus at " + out_dir.string() +
                    " (run prepare-data first)");
  }
  const json j = read_json(index);
  PreparedCorpus out;
  for (Split s : {Split::kTrain, Split::kTest}) {
    ClipSet& set = s == Split::kTrain ? out.train : out.test;
    set.split = s;
    const std::string name = split_name(s);
    if (!j.contains(name)) throw DataError("split.json lacks the " + name + " split");
    for (const auto& [talker, files] : j.at(name).items()) {
      for (const auto& f : files) {
        const fs::path path = out_dir / f.get<std::string>();
        const AudioBuffer audio = read_wav(path);
        if (audio.sample_rate != kSampleRate || audio.channels.size() != 1 ||
            audio.frames() != kClipSamples) {
          throw DataError("prepared clip " + path.string() +
                          " is not a 10 s mono 16 kHz signal");
        }
        const auto& ch = audio.channels[0];
        set.clips.push_back(Clip{talker, path.stem().string(),
                                 std::make_shared<const std::vector<float>>(ch.begin(), ch.end())});
      }
    }
  }
  return out;
}

}  // namespace headorient::corpus
