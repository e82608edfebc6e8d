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

#include "headorient/acoustics/binaural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "headorient/acoustics/dsp.hpp"
#include "headorient/error.hpp"
#include "headorient/hash.hpp"
#include "headorient/wav.hpp"

namespace headorient::acoustics {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// First-order Brown-Duda shelf split into its low-pass and high-pass parts,
// H = LP + alpha * HP, bilinear-transformed with K = fs / w0.
struct ShelfParts {
  double k = 1.0;

  void low_pass(std::span<double> x) const {
    const double a0 = 1.0 + k;
    const double a1 = (1.0 - k) / a0;
    const double b = 1.0 / a0;
    double x1 = 0.0, y1 = 0.0;
    for (double& v : x) {
      const double y = b * (v + x1) - a1 * y1;
      x1 = v;
      y1 = y;
      v = y;
    }
  }

  void high_pass(std::span<double> x) const {
    const double a0 = 1.0 + k;
    const double a1 = (1.0 - k) / a0;
    const double b = k / a0;
    double x1 = 0.0, y1 = 0.0;
    for (double& v : x) {
      const double y = b * (v - x1) - a1 * y1;
      x1 = v;
      y1 = y;
      v = y;
    }
  }
};

class ParametricAccumulator : public ArrivalAccumulator {
 public:
  ParametricAccumulator(const ParametricHrir& model, std::size_t length)
      : model_(model), length_(length) {}

  void add(const Doa& doa, double delay_samples, double gain,
           bool /*require_exact*/) override {
    const double fs = model_.sample_rate();
    const double itd = model_.itd_seconds(doa) * fs;
    const double pos = delay_samples + kRenderLatency;
    const double left_pos = pos + std::max(itd, 0.0);
    const double right_pos = pos + std::max(-itd, 0.0);

    const int key = static_cast<int>(
        std::lround(std::clamp(doa.elevation, -45.0, 45.0)));
    Bin& bin = bins_[key];
    if (bin.lp_left.empty()) {
      bin.lp_left.assign(length_, 0.0);
      bin.hp_left.assign(length_, 0.0);
      bin.lp_right.assign(length_, 0.0);
      bin.hp_right.assign(length_, 0.0);
    }
    const auto& fd = FractionalDelay::instance();
    fd.add_impulse(bin.lp_left, left_pos, gain);
    fd.add_impulse(bin.hp_left, left_pos, gain * model_.shadow_alpha(doa, false));
    fd.add_impulse(bin.lp_right, right_pos, gain);
    fd.add_impulse(bin.hp_right, right_pos, gain * model_.shadow_alpha(doa, true));
    const auto first = static_cast<std::size_t>(
        std::max(0.0, std::floor(std::min(left_pos, right_pos)) -
                          FractionalDelay::kHalf));
    bin.first = std::min(bin.first, first);
  }

  BinauralImpulseResponse finish() override {
    const auto& cfg = model_.config();
    const double fs = cfg.sample_rate;
    std::vector<double> lp_left(length_, 0.0), hp_left(length_, 0.0);
    std::vector<double> lp_right(length_, 0.0), hp_right(length_, 0.0);
    for (auto& [key, bin] : bins_) {
      const Biquad notch =
          Biquad::peaking(model_.notch_center_hz(key), cfg.notch_q,
                          -cfg.notch_depth_db, fs);
      const std::size_t f = std::min(bin.first, length_);
      auto tail = [&](std::vector<double>& v) {
        return std::span<double>(v).subspan(f);
      };
      notch.process_add(tail(bin.lp_left), tail(lp_left));
      notch.process_add(tail(bin.hp_left), tail(hp_left));
      notch.process_add(tail(bin.lp_right), tail(lp_right));
      notch.process_add(tail(bin.hp_right), tail(hp_right));
    }
    ShelfParts shelf{fs * cfg.head_radius / cfg.speed_of_sound};
    shelf.low_pass(lp_left);
    shelf.high_pass(hp_left);
    shelf.low_pass(lp_right);
    shelf.high_pass(hp_right);

    BinauralImpulseResponse out;
    out.sample_rate = cfg.sample_rate;
    out.left.resize(length_);
    out.right.resize(length_);
    for (std::size_t i = 0; i < length_; ++i) {
      out.left[i] = lp_left[i] + hp_left[i];
      out.right[i] = lp_right[i] + hp_right[i];
    }
    return out;
  }

 private:
  struct Bin {
    std::vector<double> lp_left, hp_left, lp_right, hp_right;
    std::size_t first = static_cast<std::size_t>(-1);
  };
  const ParametricHrir& model_;
  std::size_t length_;
  std::map<int, Bin> bins_;
};

class PackAccumulator : public ArrivalAccumulator {
 public:
  PackAccumulator(const ExternalHrirPack& pack, std::size_t length)
      : pack_(pack), length_(length) {}

  void add(const Doa& doa, double delay_samples, double gain,
           bool require_exact) override {
    std::size_t index;
    if (require_exact) {
      const int hit = pack_.find_exact(doa);
      if (hit < 0) {
        std::ostringstream msg;
        msg << "HRIR pack has no response for direction (azimuth "
            << doa.azimuth << ", elevation " << doa.elevation << ")";
        throw DataError(msg.str());
      }
      index = static_cast<std::size_t>(hit);
    } else {
      index = pack_.nearest(doa);
    }
    auto& train = trains_[index];
    if (train.empty()) train.assign(length_, 0.0);
    FractionalDelay::instance().add_impulse(train, delay_samples + kRenderLatency,
                                            gain);
  }

  BinauralImpulseResponse finish() override {
    BinauralImpulseResponse out;
    out.sample_rate = pack_.sample_rate();
    out.left.assign(length_, 0.0);
    out.right.assign(length_, 0.0);
    for (const auto& [index, train] : trains_) {
      const auto& e = pack_.entries()[index];
      const auto l = fft_convolve(train, e.left, length_);
      const auto r = fft_convolve(train, e.right, length_);
      for (std::size_t i = 0; i < l.size(); ++i) out.left[i] += l[i];
      for (std::size_t i = 0; i < r.size(); ++i) out.right[i] += r[i];
    }
    return out;
  }

 private:
  const ExternalHrirPack& pack_;
  std::size_t length_;
  std::map<std::size_t, std::vector<double>> trains_;
};

std::array<double, 3> unit_vector(const Doa& d) {
  const double az = d.azimuth * kDeg;
  const double el = d.elevation * kDeg;
  return {std::cos(el) * std::cos(az), -std::cos(el) * std::sin(az),
          std::sin(el)};
}

std::string pack_file_name(const Doa& d) {
  std::ostringstream s;
  s << "az" << d.azimuth << "_el" << d.elevation << ".wav";
  return s.str();
}

}  // namespace

void BinauralImpulseResponse::validate() const {
  if (left.empty() || left.size() != right.size()) {
    throw DataError("binaural impulse response channels must be non-empty and "
                    "of equal length");
  }
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (!std::isfinite(left[i]) || !std::isfinite(right[i])) {
      throw DataError("binaural impulse response contains non-finite samples");
    }
  }
}

double BinauralImpulseResponse::energy() const {
  double e = 0.0;
  for (double v : left) e += v * v;
  for (double v : right) e += v * v;
  return e;
}

BinauralImpulseResponse HrirProvider::hrir(const Doa& doa) const {
  auto acc = accumulator(kRenderLatency + FractionalDelay::kHalf + tail_length());
  acc->add(doa, 0.0, 1.0, true);
  return acc->finish();
}

ParametricHrir::ParametricHrir(ParametricHeadConfig config) : config_(config) {
  if (!(config_.head_radius > 0.0) || !(config_.speed_of_sound > 0.0) ||
      config_.sample_rate <= 0 || !(config_.notch_q > 0.0) ||
      config_.notch_depth_db < 0.0 || config_.tail_length < 32) {
    throw ConfigError("invalid parametric head model configuration");
  }
  const double nyquist = config_.sample_rate / 2.0;
  if (!(config_.notch_low_hz > 0.0) || !(config_.notch_high_hz < nyquist) ||
      config_.notch_low_hz > config_.notch_high_hz) {
    throw ConfigError("notch map must lie inside (0, Nyquist)");
  }
}

std::unique_ptr<ArrivalAccumulator> ParametricHrir::accumulator(
    std::size_t length) const {
  return std::make_unique<ParametricAccumulator>(*this, length);
}

nlohmann::json ParametricHrir::describe() const {
  return {{"mode", "parametric"},
          {"head_radius", config_.head_radius},
          {"speed_of_sound", config_.speed_of_sound},
          {"notch_low_hz", config_.notch_low_hz},
          {"notch_high_hz", config_.notch_high_hz},
          {"notch_depth_db", config_.notch_depth_db},
          {"notch_q", config_.notch_q},
          {"shadow_alpha_min", config_.shadow_alpha_min},
          {"shadow_theta_min_deg", config_.shadow_theta_min_deg},
          {"sample_rate", config_.sample_rate}};
}

double ParametricHrir::itd_seconds(const Doa& doa) const {
  const double s = std::cos(doa.elevation * kDeg) * std::sin(doa.azimuth * kDeg);
  const double lateral = std::asin(std::clamp(s, -1.0, 1.0));
  const double mag = (config_.head_radius / config_.speed_of_sound) *
                     (std::sin(std::abs(lateral)) + std::abs(lateral));
  return lateral >= 0.0 ? mag : -mag;
}

double ParametricHrir::shadow_alpha(const Doa& doa, bool right_ear) const {
  const double s = std::cos(doa.elevation * kDeg) * std::sin(doa.azimuth * kDeg);
  const double cos_theta = right_ear ? s : -s;
  const double theta_deg = std::acos(std::clamp(cos_theta, -1.0, 1.0)) / kDeg;
  const double amin = config_.shadow_alpha_min;
  return (1.0 + amin / 2.0) +
         (1.0 - amin / 2.0) *
             std::cos(theta_deg / config_.shadow_theta_min_deg * std::numbers::pi);
}

double ParametricHrir::notch_center_hz(double elevation_deg) const {
  const double e = std::clamp(elevation_deg, -45.0, 45.0);
  return config_.notch_low_hz +
         (config_.notch_high_hz - config_.notch_low_hz) * (e + 45.0) / 90.0;
}

ExternalHrirPack::ExternalHrirPack(const std::filesystem::path& dir) : dir_(dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open HRIR pack manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
    sample_rate_ = manifest.at("sample_rate").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed HRIR pack manifest: " + std::string(e.what()));
  }
  std::uint64_t h = kFnvOffset;
  for (const auto& d : manifest.at("directions")) {
    Entry e;
    e.doa = {d.at("azimuth").get<double>(), d.at("elevation").get<double>()};
    const std::string file = d.value("file", pack_file_name(e.doa));
    AudioBuffer audio = read_wav(dir / file);
    if (audio.channels.size() != 2) {
      throw DataError("HRIR " + file + " is not stereo");
    }
    if (audio.sample_rate != sample_rate_) {
      throw DataError("HRIR " + file + " sample rate differs from manifest");
    }
    e.left = std::move(audio.channels[0]);
    e.right = std::move(audio.channels[1]);
    tail_ = std::max(tail_, e.left.size());
    for (double v : e.left) h = fnv1a({reinterpret_cast<const char*>(&v), sizeof v}, h);
    for (double v : e.right) h = fnv1a({reinterpret_cast<const char*>(&v), sizeof v}, h);
    entries_.push_back(std::move(e));
  }
  if (entries_.empty()) throw DataError("HRIR pack lists no directions");
  content_hash_ = h;
}

std::unique_ptr<ArrivalAccumulator> ExternalHrirPack::accumulator(
    std::size_t length) const {
  return std::make_unique<PackAccumulator>(*this, length);
}

nlohmann::json ExternalHrirPack::describe() const {
  return {{"mode", "external-pack"},
          {"sample_rate", sample_rate_},
          {"directions", entries_.size()},
          {"content_hash", hash_hex(content_hash_)}};
}

int ExternalHrirPack::find_exact(const Doa& doa) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (std::abs(entries_[i].doa.azimuth - doa.azimuth) <= 0.5 &&
        std::abs(entries_[i].doa.elevation - doa.elevation) <= 0.5) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

std::size_t ExternalHrirPack::nearest(const Doa& doa) const {
  const auto u = unit_vector(doa);
  std::size_t best = 0;
  double best_dot = -2.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto v = unit_vector(entries_[i].doa);
    const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    if (dot > best_dot) {
      best_dot = dot;
      best = i;
    }
  }
  return best;
}

void ExternalHrirPack::check_covers(const env::AngularGrid& grid) const {
  std::string missing;
  for (const auto& cell : grid.cells()) {
    const Doa d{grid.azimuth_deg(cell), grid.elevation_deg(cell)};
    if (find_exact(d) < 0) {
      missing += " (" + std::to_string(static_cast<int>(d.azimuth)) + "," +
                 std::to_string(static_cast<int>(d.elevation)) + ")";
    }
  }
  if (!missing.empty()) {
    throw DataError("HRIR pack " + dir_.string() + " misses grid directions:" +
                    missing);
  }
}

void write_hrir_pack(const std::filesystem::path& dir,
                     const std::vector<ExternalHrirPack::Entry>& entries,
                     int sample_rate) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["sample_rate"] = sample_rate;
  manifest["directions"] = nlohmann::json::array();
  for (const auto& e : entries) {
    const std::string file = pack_file_name(e.doa);
    AudioBuffer audio;
    audio.sample_rate = sample_rate;
    audio.channels = {e.left, e.right};
    write_wav(dir / file, audio, WavEncoding::kFloat32);
    manifest["directions"].push_back(
        {{"azimuth", e.doa.azimuth}, {"elevation", e.doa.elevation}, {"file", file}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write HRIR pack manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

std::unique_ptr<HrirProvider> make_hrir_provider(const nlohmann::json& spec) {
  const std::string mode = spec.value("mode", "parametric");
  if (mode == "parametric") {
    ParametricHeadConfig c;
    c.head_radius = spec.value("head_radius", c.head_radius);
    c.speed_of_sound = spec.value("speed_of_sound", c.speed_of_sound);
    c.notch_low_hz = spec.value("notch_low_hz", c.notch_low_hz);
    c.notch_high_hz = spec.value("notch_high_hz", c.notch_high_hz);
    c.notch_depth_db = spec.value("notch_depth_db", c.notch_depth_db);
    c.notch_q = spec.value("notch_q", c.notch_q);
    c.shadow_alpha_min = spec.value("shadow_alpha_min", c.shadow_alpha_min);
    c.shadow_theta_min_deg = spec.value("shadow_theta_min_deg", c.shadow_theta_min_deg);
    return std::make_unique<ParametricHrir>(c);
  }
  if (mode == "external-pack") {
    if (!spec.contains("pack_dir") || !spec["pack_dir"].is_string()) {
      throw ConfigError("external-pack HRIR mode requires pack_dir");
    }
    return std::make_unique<ExternalHrirPack>(spec["pack_dir"].get<std::string>());
  }
  throw ConfigError("unknown HRIR mode '" + mode + "'");
}

BinauralImpulseResponse parametric_hrir(const Doa& doa, int sample_rate) {
  if (doa.azimuth < -180.0 || doa.azimuth > 180.0 || doa.elevation < -90.0 ||
      doa.elevation > 90.0) {
    throw ArgumentError("parametric_hrir: direction out of range");
  }
  ParametricHeadConfig c;
  c.sample_rate = sample_rate;
  return ParametricHrir(c).hrir(doa);
}

BinauralImpulseResponse render_arrivals(const std::vector<ImageSource>& arrivals,
                                        const HrirProvider& provider) {
  if (arrivals.empty()) throw ArgumentError("render_arrivals: no arrivals");
  const double fs = provider.sample_rate();
  double max_delay = 0.0;
  for (const auto& a : arrivals) max_delay = std::max(max_delay, a.delay);
  const std::size_t length =
      static_cast<std::size_t>(std::ceil(max_delay * fs)) + kRenderLatency +
      FractionalDelay::kHalf + provider.tail_length();
  auto acc = provider.accumulator(length);
  for (const auto& a : arrivals) {
    acc->add(a.doa, a.delay * fs, a.gain, a.order == 0);
  }
  BinauralImpulseResponse out = acc->finish();
  out.validate();
  return out;
}

BinauralImpulseResponse render_brir(const RoomSpec& room,
                                    const env::AngularGrid& grid,
                                    const env::GridCell& talker,
                                    const env::GridCell& head,
                                    const HrirProvider& provider) {
  if (provider.sample_rate() != room.sample_rate) {
    throw ConfigError("HRIR provider and room sample rates differ");
  }
  return render_arrivals(enumerate_image_sources(room, grid, talker, head),
                         provider);
}

std::vector<BinauralImpulseResponse> render_brirs_for_talker(
    const RoomSpec& room, const env::AngularGrid& grid,
    const env::GridCell& talker, const HrirProvider& provider) {
  room.validate();
  if (provider.sample_rate() != room.sample_rate) {
    throw ConfigError("HRIR provider and room sample rates differ");
  }
  const int order = room.anechoic() ? 0 : default_max_order(room);
  const auto images =
      world_images(room, source_geometry(room, grid, talker), order);
  std::vector<BinauralImpulseResponse> out;
  out.reserve(grid.size());
  for (const auto& head : grid.cells()) {
    out.push_back(render_arrivals(
        arrivals_for_head(room, grid, talker, head, images), provider));
  }
  return out;
}

AbsorptionCalibration calibrate_absorption(const RoomSpec& room,
                                           const env::AngularGrid& grid,
                                           const HrirProvider& provider,
                                           double tolerance) {
  if (room.anechoic()) throw ArgumentError("cannot calibrate an anechoic room");
  AbsorptionCalibration result;
  result.sabine = *sabine_absorption(room);

  // T60 is roughly inversely proportional to the per-reflection energy
  // loss -ln(1 - alpha); iterate on that quantity.
  RoomSpec probe = room;
  double loss = -std::log(1.0 - result.sabine);
  const env::GridCell ahead{};
  constexpr int kMaxIterations = 30;
  for (int it = 1; it <= kMaxIterations; ++it) {
    probe.absorption = std::clamp(1.0 - std::exp(-loss), 1e-4, 0.999);
    const auto brir = render_brir(probe, grid, ahead, ahead, provider);
    const std::vector<std::vector<double>> channels{brir.left, brir.right};
    const double t60 = estimate_t60_schroeder(
        std::span<const std::vector<double>>(channels), room.sample_rate);
    result.absorption = *probe.absorption;
    result.achieved_t60 = t60;
    result.iterations = it;
    if (std::abs(t60 - room.t60) <= tolerance * room.t60) break;
    loss *= t60 / room.t60;
  }
  return result;
}

}  // namespace headorient::acoustics
