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

#ifndef HEADORIENT_CORPUS_CORPUS_HPP_
#define HEADORIENT_CORPUS_CORPUS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace headorient::corpus {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 160000;   // 10 s
inline constexpr std::size_t kWindowSamples = 8000;   // 500 ms
inline constexpr std::size_t kWindowsPerClip = 20;
inline constexpr double kReferenceDbfs = -20.0;

// Band-limited resampling with a Kaiser-windowed sinc.
std::vector<double> resample(std::span<const double> signal, int from_rate,
                             int to_rate);

// Scales to the given RMS level (dB re full scale). Throws DataError
// "zero energy, cannot normalize" for silent input.
void normalize_rms(std::vector<double>& signal, double dbfs = kReferenceDbfs);

double rms(std::span<const double> signal);

// Reads an audio file, mixes to mono, resamples to 16 kHz, keeps the first
// `seconds` and normalizes. Throws DataError "clip too short" and IoError
// for unreadable files.
std::vector<double> ingest_clip(const std::filesystem::path& path,
                                double seconds = 10.0);

struct Clip {
  std::string talker_id;
  std::string clip_id;
  std::shared_ptr<const std::vector<float>> samples;  // kClipSamples
};

enum class Split { kTrain, kTest };

struct ClipSet {
  Split split = Split::kTrain;
  std::vector<Clip> clips;

  std::vector<std::string> talkers() const;  // sorted, unique
};

// talker id -> clip paths. Relative paths in a manifest file are resolved
// against the manifest's directory.
using Manifest = std::map<std::string, std::vector<std::filesystem::path>>;

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct SplitConfig {
  int train_talkers = 40;
  int train_clips = 30;
  int test_talkers = 10;
  int test_clips = 20;
};

struct SplitPlan {
  Manifest train;
  Manifest test;
};

// Shuffles talkers (and each talker's clips) under `seed` and takes disjoint
// train and test talker sets. Throws DataError "insufficient talkers" or
// "insufficient clips" with the shortfall.
SplitPlan split_corpus(const Manifest& manifest, const SplitConfig& config,
                       std::uint64_t seed);

// Ingests every clip of a split. Files are processed in parallel; the result
// order follows the manifest.
ClipSet load_clips(const Manifest& part, Split split, int parallelism = 1);

// The 20 contiguous 500 ms windows of a 10 s clip. Throws DataError on any
// other length.
std::array<std::span<const float>, kWindowsPerClip> window_clip(
    std::span<const float> clip);

// prepare-data output: normalized clips as float WAVs under
// out_dir/clips/{train,test}/{talker}/{clip}.wav plus out_dir/split.json.
struct PreparedCorpus {
  ClipSet train;
  ClipSet test;
};

void write_prepared(const std::filesystem::path& out_dir, const ClipSet& train,
                    const ClipSet& test, std::uint64_t seed);
PreparedCorpus read_prepared(const std::filesystem::path& out_dir);

}  // namespace headorient::corpus

#endif  // HEADORIENT_CORPUS_CORPUS_HPP_
