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

#include "headorient/corpus/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "headorient/error.hpp"
#include "headorient/parallel.hpp"
#include "headorient/wav.hpp"

namespace headorient::corpus {
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vowel {
  double f1, f2, f3;
};

// Adult male averages; scaled per talker.
constexpr std::array<Vowel, 9> kVowels = {{{270, 2290, 3010},
                                           {390, 1990, 2550},
                                           {530, 1840, 2480},
                                           {660, 1720, 2410},
                                           {730, 1090, 2440},
                                           {570, 840, 2410},
                                           {440, 1020, 2240},
                                           {300, 870, 2240},
                                           {640, 1190, 2390}}};

// Band-pass biquad with 0 dB peak gain.
class Resonator {
 public:
  Resonator(double hz, double bandwidth, double fs) {
    hz = std::min(hz, 0.45 * fs);
    const double w0 = kTwoPi * hz / fs;
    const double alpha = std::sin(w0) * bandwidth / (2.0 * hz);
    const double a0 = 1.0 + alpha;
    b0_ = alpha / a0;
    a1_ = -2.0 * std::cos(w0) / a0;
    a2_ = (1.0 - alpha) / a0;
  }
  double operator()(double x) {
    const double y = b0_ * (x - x2_) - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_, a1_, a2_;
  double x1_ = 0.0, x2_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

// Raised-cosine attack and release over `ramp` samples.
double envelope(std::size_t i, std::size_t n, std::size_t ramp) {
  ramp = std::min(ramp, n / 2);
  if (ramp == 0) return 1.0;
  auto edge = [&](std::size_t k) {
    return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(k) / ramp);
  };
  if (i < ramp) return edge(i);
  if (i + ramp >= n) return edge(n - 1 - i);
  return 1.0;
}

void add_vowel(std::vector<double>& out, std::size_t start, std::size_t n,
               const TalkerVoice& voice, const Vowel& v, double f0_start,
               double f0_end, double level, Rng& rng, double fs,
               double& phase) {
  Resonator r1(v.f1 * voice.formant_scale, 80, fs);
  Resonator r2(v.f2 * voice.formant_scale, 100, fs);
  Resonator r3(v.f3 * voice.formant_scale, 140, fs);
  Resonator r4(3500 * voice.formant_scale, 200, fs);
  const double tilt_k = 1.0 - std::exp(-kTwoPi * 300.0 / fs);  // glottal roll-off
  double tilt = 0.0;
  double jitter = 1.0;
  for (std::size_t i = 0; i < n && start + i < out.size(); ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n);
    const double f0 = (f0_start + (f0_end - f0_start) * frac) * jitter;
    phase += f0 / fs;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= std::floor(phase);
      pulse = 1.0;
      jitter = 1.0 + 0.01 * rng.normal();
    }
    tilt += tilt_k * (pulse - tilt);
    const double source = tilt + voice.breathiness * 0.02 * rng.normal();
    // Parallel formant branches with falling levels. The band-pass
    // branches keep little of the sparse pulse train's energy; the leading
    // gain brings voicing up to a typical level above frication.
    const double y = 40.0 * (r1(source) + 0.5 * r2(source) + 0.5 * r3(source) +
                             0.4 * r4(source));
    out[start + i] += level * envelope(i, n, static_cast<std::size_t>(0.025 * fs)) * y;
  }
}

void add_noise(std::vector<double>& out, std::size_t start, std::size_t n,
               double center_hz, double bandwidth, double level, Rng& rng,
               double fs) {
  Resonator band(center_hz, bandwidth, fs);
  Resonator band2(center_hz, bandwidth, fs);
  for (std::size_t i = 0; i < n && start + i < out.size(); ++i) {
    const double y = band2(band(rng.normal()));
    out[start + i] += level * envelope(i, n, static_cast<std::size_t>(0.01 * fs)) * y;
  }
}

}  // namespace

TalkerVoice TalkerVoice::sample(Rng& rng) {
  TalkerVoice v;
  const bool high = rng.bernoulli(0.5);
  v.f0_hz = high ? rng.uniform(170.0, 250.0) : rng.uniform(85.0, 150.0);
  v.formant_scale = high ? rng.uniform(1.08, 1.22) : rng.uniform(0.92, 1.05);
  v.syllable_rate = rng.uniform(3.5, 5.5);
  v.breathiness = rng.uniform(0.02, 0.15);
  return v;
}

std::vector<double> synthesize_utterance(const TalkerVoice& voice,
                                         double seconds, Rng& rng,
                                         int sample_rate) {
  if (!(seconds > 0.0) || sample_rate <= 0) {
    throw ArgumentError("synthesize_utterance: bad duration or sample rate");
  }
  const double fs = sample_rate;
  std::vector<double> out(static_cast<std::size_t>(seconds * fs), 0.0);
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.15) * fs);
  double phase = 0.0;
  double f0 = voice.f0_hz;
  while (pos < out.size()) {
    const int syllables = 1 + static_cast<int>(rng.uniform_index(3));
    for (int s = 0; s < syllables && pos < out.size(); ++s) {
      const double syllable = 1.0 / voice.syllable_rate * rng.uniform(0.7, 1.3);
      // Onset consonant.
      const auto kind = rng.uniform_index(4);
      std::size_t onset = 0;
      if (kind == 0) {  // sibilant
        onset = static_cast<std::size_t>(rng.uniform(0.06, 0.12) * fs);
        add_noise(out, pos, onset, rng.uniform(4500, 6500) * voice.formant_scale,
                  1500, 0.12, rng, fs);
      } else if (kind == 1) {  // palatal / labiodental fricative
        onset = static_cast<std::size_t>(rng.uniform(0.05, 0.1) * fs);
        add_noise(out, pos, onset, rng.uniform(2200, 3500) * voice.formant_scale,
                  1200, 0.08, rng, fs);
      } else if (kind == 2) {  // stop: closure then burst
        const auto closure = static_cast<std::size_t>(rng.uniform(0.03, 0.06) * fs);
        const auto burst = static_cast<std::size_t>(0.012 * fs);
        add_noise(out, pos + closure, burst, rng.uniform(1500, 4000), 3000, 0.3,
                  rng, fs);
        onset = closure + burst;
      }
      pos += onset;
      const auto vowel_len = static_cast<std::size_t>(
          std::max(0.06, syllable - static_cast<double>(onset) / fs) * fs);
      const Vowel& v = kVowels[rng.uniform_index(kVowels.size())];
      const double f0_end = std::clamp(f0 * rng.uniform(0.9, 1.08),
                                       voice.f0_hz * 0.75, voice.f0_hz * 1.35);
      add_vowel(out, pos, vowel_len, voice, v, f0, f0_end, rng.uniform(0.6, 1.0),
                rng, fs, phase);
      f0 = f0_end;
      pos += vowel_len;
    }
    // Pause between words; occasionally a longer phrase break.
    const double pause = rng.bernoulli(0.15) ? rng.uniform(0.25, 0.45)
                                             : rng.uniform(0.04, 0.15);
    pos += static_cast<std::size_t>(pause * fs);
    f0 = voice.f0_hz * rng.uniform(0.95, 1.1);
  }
  for (double& v : out) v += 1e-4 * rng.normal();  // room-tone floor
  return out;
}

Manifest synthesize_corpus(const fs::path& out_dir,
                           const SyntheticCorpusConfig& config,
                           int parallelism) {
  if (config.talkers < 1 || config.clips_per_talker < 1 || !(config.seconds > 0)) {
    throw ConfigError("synthetic corpus sizes must be positive");
  }
  Manifest manifest;
  std::vector<std::pair<std::string, fs::path>> jobs;
  for (int t = 0; t < config.talkers; ++t) {
    char id[16];
    std::snprintf(id, sizeof(id), "spk%03d", t);
    for (int c = 0; c < config.clips_per_talker; ++c) {
      char name[32];
      std::snprintf(name, sizeof(name), "%s_%03d.wav", id, c);
      const fs::path path = out_dir / id / name;
      manifest[id].push_back(path);
      jobs.emplace_back(id, path);
    }
  }
  for (const auto& [id, _] : manifest) fs::create_directories(out_dir / id);

  parallel_for(jobs.size(), parallelism, [&](std::size_t j) {
    const auto talker = static_cast<std::uint64_t>(j / config.clips_per_talker);
    const auto clip = static_cast<std::uint64_t>(j % config.clips_per_talker);
    Rng voice_rng(Rng::derive(config.seed, talker));
    const TalkerVoice voice = TalkerVoice::sample(voice_rng);
    Rng rng(Rng::derive(Rng::derive(config.seed, talker), clip + 1));
    std::vector<double> signal = synthesize_utterance(voice, config.seconds, rng);
    // Leave headroom for 16-bit storage; ingest renormalizes anyway.
    double peak = 0.0;
    for (double v : signal) peak = std::max(peak, std::abs(v));
    const double gain = peak > 0.0 ? 0.5 / peak : 1.0;
    for (double& v : signal) v *= gain;
    AudioBuffer audio;
    audio.sample_rate = kSampleRate;
    audio.channels.push_back(std::move(signal));
    write_wav(jobs[j].second, audio, WavEncoding::kPcm16);
  });
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace headorient::corpus
