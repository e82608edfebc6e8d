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

#ifndef HEADORIENT_CORPUS_SYNTHETIC_HPP_
#define HEADORIENT_CORPUS_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "headorient/corpus/corpus.hpp"
#include "headorient/rng.hpp"

namespace headorient::corpus {

// Source-filter voice: glottal pulse train through a formant cascade for
// vowels, shaped noise for fricatives, short bursts for stops.
struct TalkerVoice {
  double f0_hz = 120.0;
  double formant_scale = 1.0;  // vocal tract length factor
  double syllable_rate = 4.0;  // per second
  double breathiness = 0.05;   // aspiration noise mixed into voicing

  static TalkerVoice sample(Rng& rng);
};

std::vector<double> synthesize_utterance(const TalkerVoice& voice,
                                         double seconds, Rng& rng,
                                         int sample_rate = kSampleRate);

struct SyntheticCorpusConfig {
  int talkers = 50;
  int clips_per_talker = 30;
  double seconds = 10.5;
  std::uint64_t seed = 1;
};

// Writes out_dir/{talker}/{clip}.wav (16-bit PCM) and out_dir/manifest.json
// and returns the manifest.
Manifest synthesize_corpus(const std::filesystem::path& out_dir,
                           const SyntheticCorpusConfig& config,
                           int parallelism = 1);

}  // namespace headorient::corpus

#endif  // HEADORIENT_CORPUS_SYNTHETIC_HPP_
