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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <unistd.h>

#include <json.hpp>

#include "headorient/acoustics/binaural.hpp"
#include "headorient/corpus/brir_cache.hpp"
#include "headorient/corpus/corpus.hpp"
#include "headorient/corpus/synthetic.hpp"
#include "headorient/error.hpp"
#include "headorient/wav.hpp"

namespace headorient::corpus {
namespace {

namespace fs = std::filesystem;
using env::AngularGrid;
using env::GridCell;

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("ho_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<double> sine(double hz, double rate, std::size_t n, double amp = 0.5) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * hz * i / rate);
  return x;
}

template <typename F>
void expect_error_containing(F&& f, const std::string& needle) {
  try {
    f();
    ADD_FAILURE() << "expected an error containing '" << needle << "'";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

// ---- signal prep -----------------------------------------------------------

TEST(Resample, PreservesInBandSine) {
  for (int from : {8000, 22050, 44100, 48000}) {
    const auto x = sine(440.0, from, static_cast<std::size_t>(from));
    const auto y = resample(x, from, 16000);
    ASSERT_EQ(y.size(), 16000u) << from;
    const auto ref = sine(440.0, 16000, 16000);
    double err = 0.0;
    for (std::size_t i = 400; i + 400 < y.size(); ++i) err = std::max(err, std::abs(y[i] - ref[i]));
    EXPECT_LT(err, 2e-3) << from;
  }
}

TEST(Resample, RejectsAboveNewNyquist) {
  const auto x = sine(12000.0, 48000, 48000);
  const auto y = resample(x, 48000, 16000);
  EXPECT_LT(rms(std::span(y).subspan(400, 15000)), 1e-3);
}

TEST(Resample, SameRateIsIdentity) {
  const auto x = sine(100.0, 16000, 1000);
  EXPECT_EQ(resample(x, 16000, 16000), x);
  EXPECT_THROW(resample(x, 0, 16000), ArgumentError);
}

TEST(Normalize, HitsReferenceLevel) {
  auto x = sine(300.0, 16000, 16000, 0.01);
  normalize_rms(x);
  EXPECT_NEAR(20 * std::log10(rms(x)), -20.0, 1e-9);
  std::vector<double> z(100, 0.0);
  expect_error_containing([&] { normalize_rms(z); }, "zero energy");
}

TEST(Ingest, MixesResamplesTrimsAndNormalizes) {
  TempDir dir("ingest");
  AudioBuffer a;
  a.sample_rate = 22050;
  a.channels = {sine(500.0, 22050, 22050 * 11, 0.2), sine(500.0, 22050, 22050 * 11, 0.4)};
  write_wav(dir.path() / "a.wav", a, WavEncoding::kPcm16);
  const auto x = ingest_clip(dir.path() / "a.wav");
  EXPECT_EQ(x.size(), kClipSamples);
  EXPECT_NEAR(20 * std::log10(rms(x)), -20.0, 1e-6);
}

TEST(Ingest, ErrorsNameTheProblem) {
  TempDir dir("ingest_err");
  AudioBuffer a;
  a.sample_rate = 16000;
  a.channels = {sine(500.0, 16000, 16000 * 3)};
  write_wav(dir.path() / "short.wav", a, WavEncoding::kPcm16);
  expect_error_containing([&] { ingest_clip(dir.path() / "short.wav"); }, "clip too short");
  a.channels = {std::vector<double>(16000 * 11, 0.0)};
  write_wav(dir.path() / "silent.wav", a, WavEncoding::kPcm16);
  expect_error_containing([&] { ingest_clip(dir.path() / "silent.wav"); }, "zero energy");
  EXPECT_THROW(ingest_clip(dir.path() / "missing.wav"), IoError);
}

TEST(Windows, PartitionTheClipContiguously) {
  std::vector<float> clip(kClipSamples);
  for (std::size_t i = 0; i < clip.size(); ++i) clip[i] = static_cast<float>(i);
  const auto w = window_clip(clip);
  for (std::size_t k = 0; k < kWindowsPerClip; ++k) {
    ASSERT_EQ(w[k].size(), kWindowSamples);
    EXPECT_EQ(w[k].front(), static_cast<float>(k * kWindowSamples));
    EXPECT_EQ(w[k].back(), static_cast<float>((k + 1) * kWindowSamples - 1));
  }
  std::vector<float> wrong(kClipSamples - 1);
  EXPECT_THROW(window_clip(wrong), DataError);
}

// ---- manifests and splits --------------------------------------------------

Manifest fake_manifest(int talkers, int clips) {
  Manifest m;
  for (int t = 0; t < talkers; ++t) {
    const std::string id = "t" + std::to_string(100 + t);
    for (int c = 0; c < clips; ++c) m[id].push_back("/data/" + id + "/" + std::to_string(c) + ".wav");
  }
  return m;
}

TEST(Manifest, RoundTripsWithRelativePaths) {
  TempDir dir("manifest");
  std::ofstream(dir.path() / "m.json") << R"({"a": ["x/1.wav", "/abs/2.wav"], "b": []})";
  const auto m = read_manifest(dir.path() / "m.json");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("a")[0], dir.path() / "x/1.wav");
  EXPECT_EQ(m.at("a")[1], fs::path("/abs/2.wav"));
  write_manifest(dir.path() / "n.json", m);
  EXPECT_EQ(read_manifest(dir.path() / "n.json"), m);
  std::ofstream(dir.path() / "bad.json") << R"(["not", "a", "map"])";
  EXPECT_THROW(read_manifest(dir.path() / "bad.json"), DataError);
}

TEST(Split, DisjointSizedAndDeterministic) {
  const auto m = fake_manifest(55, 35);
  const auto a = split_corpus(m, SplitConfig{}, 7);
  const auto b = split_corpus(m, SplitConfig{}, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.train.size(), 40u);
  EXPECT_EQ(a.test.size(), 10u);
  for (const auto& [t, clips] : a.train) {
    EXPECT_EQ(clips.size(), 30u);
    EXPECT_EQ(a.test.count(t), 0u) << t;
  }
  for (const auto& [t, clips] : a.test) EXPECT_EQ(clips.size(), 20u);
  const auto c = split_corpus(m, SplitConfig{}, 8);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, InsufficientTalkersAndClips) {
  expect_error_containing([] { split_corpus(fake_manifest(49, 40), SplitConfig{}, 1); },
                          "insufficient talkers: need 50");
  expect_error_containing([] { split_corpus(fake_manifest(60, 25), SplitConfig{}, 1); },
                          "insufficient clips");
}

// ---- synthetic corpus and prepared layout ----------------------------------

TEST(Synthetic, DeterministicUnderSeed) {
  Rng a(3), b(3);
  const auto va = TalkerVoice::sample(a), vb = TalkerVoice::sample(b);
  EXPECT_EQ(synthesize_utterance(va, 1.0, a), synthesize_utterance(vb, 1.0, b));
}

TEST(Synthetic, CorpusFeedsTheSplitter) {
  TempDir dir("synth");
  SyntheticCorpusConfig cfg;
  cfg.talkers = 4;
  cfg.clips_per_talker = 2;
  cfg.seconds = 10.2;
  const auto m = synthesize_corpus(dir.path(), cfg, 0);
  EXPECT_EQ(m.size(), 4u);
  EXPECT_EQ(read_manifest(dir.path() / "manifest.json"), m);
  const auto plan = split_corpus(m, SplitConfig{2, 2, 1, 1}, 5);
  const ClipSet train = load_clips(plan.train, Split::kTrain, 2);
  const ClipSet test = load_clips(plan.test, Split::kTest, 2);
  ASSERT_EQ(train.clips.size(), 4u);
  for (const auto& c : train.clips) {
    ASSERT_EQ(c.samples->size(), kClipSamples);
    const std::vector<double> d(c.samples->begin(), c.samples->end());
    EXPECT_NEAR(20 * std::log10(rms(d)), -20.0, 1e-3);
  }

  write_prepared(dir.path() / "prep", train, test, 5);
  const auto back = read_prepared(dir.path() / "prep");
  EXPECT_EQ(back.train.talkers(), train.talkers());
  EXPECT_EQ(back.test.talkers(), test.talkers());
  ASSERT_EQ(back.train.clips.size(), train.clips.size());
  for (std::size_t i = 0; i < train.clips.size(); ++i) {
    EXPECT_EQ(*back.train.clips[i].samples, *train.clips[i].samples);
  }
  EXPECT_THROW(read_prepared(dir.path() / "nothing"), DataError);
}

// ---- BRIR cache ------------------------------------------------------------

TEST(BrirCache, FileStemFormat) {
  EXPECT_EQ(brir_file_stem(-90, 45, 15, -20), "-90_45__15_-20");
  EXPECT_EQ(brir_file_stem(0, -0.0, 0, 0), "0_0__0_0");
}

TEST(BrirCache, AnechoicKeyedByDeviation) {
  TempDir dir("cache_an");
  const auto spec = EnvironmentSpec::preset("anechoic");
  const auto grid = AngularGrid::reduced();
  const auto report = build_brir_cache(dir.path(), spec, grid, 0);
  EXPECT_EQ(report.entries, 65u);
  EXPECT_EQ(report.rendered, 65u);
  EXPECT_TRUE(fs::exists(dir.path() / "anechoic" / "index.json"));
  EXPECT_TRUE(fs::exists(dir.path() / "anechoic" / "-90_40__0_0.wav"));

  const auto cache = BrirCache::open(dir.path(), spec, grid);
  EXPECT_TRUE(cache.keyed_by_deviation());
  EXPECT_EQ(cache.entries(), 65u);
  // The shared entry equals a direct render of the pair.
  const auto provider = acoustics::make_hrir_provider(spec.hrir);
  const auto direct = acoustics::render_brir(spec.room, grid, {1, 1}, {-2, 0}, *provider);
  const auto cached = cache.fetch({1, 1}, {-2, 0});
  ASSERT_EQ(cached->left.size(), direct.left.size());
  for (std::size_t i = 0; i < direct.left.size(); ++i) {
    ASSERT_NEAR(cached->left[i], direct.left[i], 1e-6);
    ASSERT_NEAR(cached->right[i], direct.right[i], 1e-6);
  }
  EXPECT_EQ(cache.fetch({1, 1}, {-2, 0}), cache.fetch({0, 1}, {-3, 0}));
}

TEST(BrirCache, RebuildIsByteIdenticalAndSkipsExisting) {
  TempDir dir("cache_rb");
  const auto spec = EnvironmentSpec::preset("anechoic");
  const auto grid = AngularGrid::reduced();
  build_brir_cache(dir.path(), spec, grid, 2);
  const auto file = dir.path() / "anechoic" / "15_-20__0_0.wav";
  const std::string before = read_bytes(file);
  const auto again = build_brir_cache(dir.path(), spec, grid, 2);
  EXPECT_EQ(again.rendered, 0u);
  EXPECT_EQ(again.skipped, 65u);

  TempDir other("cache_rb2");
  build_brir_cache(other.path(), spec, grid, 1);
  EXPECT_EQ(read_bytes(other.path() / "anechoic" / "15_-20__0_0.wav"), before);

  // An interrupted build resumes by rendering only the missing file.
  fs::remove(file);
  const auto resumed = build_brir_cache(dir.path(), spec, grid, 1);
  EXPECT_EQ(resumed.rendered, 1u);
  EXPECT_EQ(read_bytes(file), before);
}

TEST(BrirCache, StaleAndIncompleteCachesAreRejected) {
  TempDir dir("cache_stale");
  const auto spec = EnvironmentSpec::preset("anechoic");
  build_brir_cache(dir.path(), spec, AngularGrid::reduced(), 0);
  expect_error_containing([&] { BrirCache::open(dir.path(), spec, AngularGrid::full()); },
                          "stale cache");
  expect_error_containing([&] { build_brir_cache(dir.path(), spec, AngularGrid::full()); },
                          "stale cache");
  expect_error_containing(
      [&] { BrirCache::open(dir.path(), EnvironmentSpec::preset("low"), AngularGrid::reduced()); },
      "no BRIR cache");

  const auto index = dir.path() / "anechoic" / "index.json";
  auto j = nlohmann::json::parse(read_bytes(index));
  j["complete"] = false;
  std::ofstream(index) << j.dump();
  expect_error_containing([&] { BrirCache::open(dir.path(), spec, AngularGrid::reduced()); },
                          "incomplete");
}

TEST(BrirCache, ReverberantCacheHoldsEveryPair) {
  TempDir dir("cache_rev");
  auto spec = EnvironmentSpec::from_json(
      {{"id", "tiny"}, {"dims", {3.5, 4.0, 3.0}}, {"t60", 0.15}, {"absorption", 0.7}});
  const AngularGrid grid({-15.0, 0.0, 15.0}, {0.0});
  const auto report = build_brir_cache(dir.path(), spec, grid, 0);
  EXPECT_EQ(report.entries, 9u);
  EXPECT_DOUBLE_EQ(report.absorption, 0.7);
  const auto cache = BrirCache::open(dir.path(), spec, grid, 4000);
  EXPECT_FALSE(cache.keyed_by_deviation());
  const auto a = cache.fetch({1, 0}, {0, 0});
  const auto b = cache.fetch({0, 0}, {-1, 0});
  EXPECT_LE(a->left.size(), 4000u);
  // Same deviation, different room position: reflections differ.
  EXPECT_NE(a->left, b->left);
  expect_error_containing([&] { cache.fetch({2, 0}, {0, 0}); }, "tiny");
}

TEST(EnvironmentSpec, PresetsAndValidation) {
  const auto med = EnvironmentSpec::preset("med");
  EXPECT_EQ(med.room.dims, (std::array<double, 3>{5, 7, 4}));
  EXPECT_DOUBLE_EQ(med.room.t60, 0.4);
  EXPECT_EQ(EnvironmentSpec::from_json("high").room.t60, 0.6);
  EXPECT_EQ(EnvironmentSpec::from_json(med.to_json()).to_json(), med.to_json());
  EXPECT_THROW(EnvironmentSpec::preset("cathedral"), ConfigError);
  EXPECT_THROW(EnvironmentSpec::from_json({{"id", "x"}}), ConfigError);
  EXPECT_THROW(EnvironmentSpec::from_json({{"id", "low"}, {"absorption", 1.5}}), ConfigError);
  EXPECT_THROW(EnvironmentSpec::from_json({{"id", "a/b"}, {"dims", {3, 3, 3}}, {"t60", 0.2}}),
               ConfigError);
}

}  // namespace
}  // namespace headorient::corpus
