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

#include "headorient/harness/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "headorient/error.hpp"
#include "headorient/hash.hpp"

namespace headorient::harness {
namespace {

constexpr std::array<char, 4> kMagic = {'H', 'T', 'Q', 'N'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void floats(const float* p, std::size_t n) {
    u64(n);
    for (std::size_t i = 0; i < n; ++i) f32(p[i]);
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint8_t u8() { need(1); return *p_++; }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(*p_++) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(*p_++) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t count(std::size_t unit) {
    const std::uint64_t n = u64();
    if (unit != 0 && n > remaining() / unit) throw DataError("checkpoint is truncated");
    return n;
  }
  std::string str() {
    const auto n = count(1);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  learner::Vec<float> floats() {
    const auto n = count(4);
    learner::Vec<float> v(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f32();
    return v;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

 private:
  void need(std::size_t n) {
    if (remaining() < n) throw DataError("checkpoint is truncated");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

std::vector<float> to_std(const learner::Vec<float>& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::uint64_t TransitionOrigin::pack(const env::AngularGrid& grid) const {
  const std::uint64_t cells = grid.size();
  std::uint64_t bits = grid.index_of(talker);
  bits = bits * cells + grid.index_of(head);
  bits = bits * cells + grid.index_of(next_head);
  bits = bits * env::kNumActions + static_cast<std::uint64_t>(action);
  bits = bits * 32 + static_cast<std::uint64_t>(window);
  return (bits << 32) | clip;
}

TransitionOrigin TransitionOrigin::unpack(std::uint64_t bits, const env::AngularGrid& grid) {
  const std::uint64_t cells = grid.size();
  TransitionOrigin o;
  o.clip = static_cast<std::uint32_t>(bits & 0xffffffffu);
  bits >>= 32;
  o.window = static_cast<int>(bits % 32);
  bits /= 32;
  o.action = static_cast<int>(bits % env::kNumActions);
  bits /= env::kNumActions;
  o.next_head = grid.cell_at(bits % cells);
  bits /= cells;
  o.head = grid.cell_at(bits % cells);
  bits /= cells;
  if (bits >= cells) throw DataError("replay origin does not fit the grid");
  o.talker = grid.cell_at(bits);
  return o;
}

std::vector<std::string> Checkpoint::train_talkers() const {
  return meta.at("train_talkers").get<std::vector<std::string>>();
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(version);
  w.u64(config_hash);
  w.str(meta.dump());
  w.i64(episode);
  w.i64(global_step);
  w.i64(opt_step);
  w.i64(consecutive_skips);
  w.floats(theta.data(), static_cast<std::size_t>(theta.size()));
  w.floats(theta_target.data(), static_cast<std::size_t>(theta_target.size()));
  w.floats(adam.m.data(), static_cast<std::size_t>(adam.m.size()));
  w.floats(adam.v.data(), static_cast<std::size_t>(adam.v.size()));
  w.i64(adam.step);
  w.i64(adam.skipped);
  w.floats(stats.mean.data(), stats.mean.size());
  w.floats(stats.inv_std.data(), stats.inv_std.size());
  w.str(learn_rng);
  w.u64(replay.size());
  for (const auto& cell : replay) {
    w.u64(cell.next);
    w.u64(cell.origins.size());
    for (std::size_t i = 0; i < cell.origins.size(); ++i) {
      w.u64(cell.origins[i]);
      w.f32(cell.rewards[i]);
      w.u8(cell.terminal[i]);
    }
  }
  w.u64(log.size());
  for (const auto& r : log) {
    w.f64(r.reward);
    w.i32(r.length);
    w.i32(r.chebyshev);
    w.u8(r.success ? 1 : 0);
    w.f64(r.loss);
    w.f64(r.epsilon);
  }
  auto& bytes = w.bytes();
  const std::uint64_t sum =
      fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  w.u64(sum);
  return std::move(bytes);
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw DataError("not a checkpoint");
  }
  if (bytes.size() < kMagic.size() + 4 + 8) throw DataError("checkpoint is truncated");
  Reader r(bytes.data() + kMagic.size(), bytes.size() - kMagic.size());
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(c.version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), body)) != stored) {
    throw DataError("checkpoint checksum mismatch (file is corrupted or truncated)");
  }
  c.config_hash = r.u64();
  try {
    c.meta = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint metadata is malformed: ") + e.what());
  }
  c.episode = r.i64();
  c.global_step = r.i64();
  c.opt_step = r.i64();
  c.consecutive_skips = r.i64();
  c.theta = r.floats();
  c.theta_target = r.floats();
  c.adam.m = r.floats();
  c.adam.v = r.floats();
  c.adam.step = r.i64();
  c.adam.skipped = r.i64();
  c.stats.mean = to_std(r.floats());
  c.stats.inv_std = to_std(r.floats());
  c.learn_rng = r.str();
  const auto cells = r.count(16);
  c.replay.resize(cells);
  for (auto& cell : c.replay) {
    cell.next = r.u64();
    const auto n = r.count(13);
    cell.origins.resize(n);
    cell.rewards.resize(n);
    cell.terminal.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      cell.origins[i] = r.u64();
      cell.rewards[i] = r.f32();
      cell.terminal[i] = r.u8();
    }
  }
  const auto episodes = r.count(33);
  c.log.resize(episodes);
  for (auto& e : c.log) {
    e.reward = r.f64();
    e.length = r.i32();
    e.chebyshev = r.i32();
    e.success = r.u8() != 0;
    e.loss = r.f64();
    e.epsilon = r.f64();
  }
  if (r.remaining() != 8) throw DataError("checkpoint has trailing bytes");
  const auto n = c.theta.size();
  if (c.theta_target.size() != n || c.adam.m.size() != n || c.adam.v.size() != n) {
    throw DataError("checkpoint parameter blocks disagree in size");
  }
  if (c.stats.mean.size() != c.stats.inv_std.size()) {
    throw DataError("checkpoint feature statistics are inconsistent");
  }
  if (!c.meta.contains("env_id") || !c.meta.contains("train_talkers") ||
      !c.meta.contains("config")) {
    throw DataError("checkpoint metadata lacks env_id, train_talkers or config");
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + ": " + path.string());
  }
}

bool check_config_hash(const Checkpoint& ckpt, std::uint64_t expected) {
  if (ckpt.config_hash == expected) return true;
  warn("checkpoint config hash " + hash_hex(ckpt.config_hash) + " differs from run config hash " +
       hash_hex(expected));
  return false;
}

}  // namespace headorient::harness
