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
#include <map>
#include <vector>

#include "headorient/error.hpp"
#include "headorient/learner/dqn.hpp"
#include "headorient/learner/network.hpp"

namespace headorient::learner {
namespace {

using env::DeviationKey;
using env::FeatureMatrix;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Reads element (r, c) of a named tensor from the flat vector.
double at(const NetworkConfig& cfg, const Vec<double>& p, const std::string& name, int r,
          int c = 0) {
  for (const auto& t : cfg.tensors()) {
    if (t.name == name) return p[static_cast<Eigen::Index>(t.offset + c * t.rows + r)];
  }
  throw std::runtime_error("no tensor " + name);
}

// Step-by-step GRU recurrence for one sequence, scalar loops only.
std::vector<double> unrolled_q(const NetworkConfig& cfg, const Vec<double>& p,
                               const std::vector<std::vector<double>>& frames) {
  std::vector<std::vector<double>> seq = frames;
  for (std::size_t l = 0; l < cfg.hidden.size(); ++l) {
    const int H = cfg.hidden[l];
    const int I = static_cast<int>(seq.front().size());
    const std::string pre = "gru" + std::to_string(l) + ".";
    std::vector<double> h(H, 0.0);
    std::vector<std::vector<double>> out;
    for (const auto& x : seq) {
      std::vector<double> next(H);
      for (int j = 0; j < H; ++j) {
        double gx[3], gh[3];
        for (int g = 0; g < 3; ++g) {
          const int row = g * H + j;
          gx[g] = at(cfg, p, pre + "b_ih", row);
          gh[g] = at(cfg, p, pre + "b_hh", row);
          for (int i = 0; i < I; ++i) gx[g] += at(cfg, p, pre + "w_ih", row, i) * x[i];
          for (int k = 0; k < H; ++k) gh[g] += at(cfg, p, pre + "w_hh", row, k) * h[k];
        }
        const double r = sigmoid(gx[0] + gh[0]);
        const double z = sigmoid(gx[1] + gh[1]);
        const double n = std::tanh(gx[2] + r * gh[2]);
        next[j] = (1 - z) * n + z * h[j];
      }
      h = next;
      out.push_back(h);
    }
    seq = out;
  }
  const auto& last = seq.back();
  std::vector<double> q(cfg.outputs);
  for (int o = 0; o < cfg.outputs; ++o) {
    q[o] = at(cfg, p, "head.b", o);
    for (std::size_t k = 0; k < last.size(); ++k) {
      q[o] += at(cfg, p, "head.w", o, static_cast<int>(k)) * last[k];
    }
  }
  return q;
}

NetworkConfig tiny_config(std::vector<int> hidden, int input = 5) {
  NetworkConfig cfg;
  cfg.input_dim = input;
  cfg.hidden = std::move(hidden);
  cfg.dropout.assign(cfg.hidden.size(), 0.0);
  return cfg;
}

Vec<double> random_params(const GruQNetwork<double>& net, std::uint64_t seed, double scale) {
  Rng rng(seed);
  Vec<double> p(static_cast<Eigen::Index>(net.size()));
  for (auto& v : p) v = rng.uniform(-scale, scale);
  return p;
}

std::shared_ptr<FeatureMatrix> random_frames(int T, int F, Rng& rng) {
  auto m = std::make_shared<FeatureMatrix>(T, F);
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) (*m)(t, f) = static_cast<float>(rng.uniform(-1.5, 1.5));
  }
  return m;
}

std::vector<Transition> random_transitions(int count, int T, int F, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Transition> out;
  const float rewards[] = {-0.2f, 0.0f, 0.1f, 1.0f};
  for (int i = 0; i < count; ++i) {
    Transition t;
    t.obs = random_frames(T, F, rng);
    t.next_obs = random_frames(T, F, rng);
    t.action = static_cast<int>(rng.uniform_index(8));
    t.reward = rewards[rng.uniform_index(4)];
    t.terminal = i % 3 == 0;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<const Transition*> pointers(const std::vector<Transition>& ts) {
  std::vector<const Transition*> out;
  for (const auto& t : ts) out.push_back(&t);
  return out;
}

TEST(Network, ZeroWeightsGiveZeroQ) {
  GruQNetwork<double> net(tiny_config({3, 2}));
  Vec<double> p = Vec<double>::Zero(static_cast<Eigen::Index>(net.size()));
  Rng rng(1);
  auto f = random_frames(4, 5, rng);
  const RowMat<double> x = stack_sequences<double>({f.get()});
  EXPECT_TRUE(net.forward(p, x, 4, nullptr, nullptr).isZero());
}

TEST(Network, MatchesHandUnrolledRecurrence) {
  const NetworkConfig cfg = tiny_config({3, 2}, 4);
  GruQNetwork<double> net(cfg);
  const Vec<double> p = random_params(net, 7, 0.8);
  Rng rng(3);
  auto a = random_frames(2, 4, rng);
  auto b = random_frames(2, 4, rng);
  const RowMat<double> x = stack_sequences<double>({a.get(), b.get()});
  const Mat<double> q = net.forward(p, x, 2, nullptr, nullptr);
  ASSERT_EQ(q.rows(), 2);
  ASSERT_EQ(q.cols(), 8);
  int b_idx = 0;
  for (const auto* seq : {a.get(), b.get()}) {
    std::vector<std::vector<double>> frames(2, std::vector<double>(4));
    for (int t = 0; t < 2; ++t) {
      for (int f = 0; f < 4; ++f) frames[t][f] = (*seq)(t, f);
    }
    const auto expected = unrolled_q(cfg, p, frames);
    for (int o = 0; o < 8; ++o) EXPECT_NEAR(q(b_idx, o), expected[o], 1e-12);
    ++b_idx;
  }
}

TEST(Network, EvalModeIsDeterministicAndDropoutIsNot) {
  NetworkConfig cfg = tiny_config({6, 4});
  cfg.dropout = {0.5, 0.5};
  GruQNetwork<double> net(cfg);
  Vec<double> p(static_cast<Eigen::Index>(net.size()));
  Rng init(11);
  net.initialize(p, init);
  Rng rng(5);
  auto f = random_frames(3, 5, rng);
  const RowMat<double> x = stack_sequences<double>({f.get()});
  const Mat<double> e1 = net.forward(p, x, 3, nullptr, nullptr);
  const Mat<double> e2 = net.forward(p, x, 3, nullptr, nullptr);
  EXPECT_EQ(e1, e2);
  Rng d1(1), d2(2);
  EXPECT_NE(net.forward(p, x, 3, &d1, nullptr), net.forward(p, x, 3, &d2, nullptr));
}

TEST(Network, InitializationIsOrthogonalWithZeroBiases) {
  const NetworkConfig cfg = tiny_config({6, 4});
  GruQNetwork<double> net(cfg);
  Vec<double> p(static_cast<Eigen::Index>(net.size()));
  Rng rng(9);
  net.initialize(p, rng);
  for (const auto& t : cfg.tensors()) {
    const auto block = p.segment(static_cast<Eigen::Index>(t.offset), static_cast<Eigen::Index>(t.size()));
    if (t.name.ends_with("b_ih") || t.name.ends_with("b_hh") || t.name == "head.b") {
      EXPECT_TRUE(block.isZero()) << t.name;
    }
    if (t.name.ends_with("w_hh")) {
      const int H = t.cols;
      const Eigen::Map<const Mat<double>> w(block.data(), t.rows, t.cols);
      for (int g = 0; g < 3; ++g) {
        const Mat<double> q = w.middleRows(g * H, H);
        EXPECT_TRUE((q.transpose() * q).isIdentity(1e-12)) << t.name << " gate " << g;
      }
    }
  }
}

TEST(Network, ParameterCountMatchesLayout) {
  const NetworkConfig cfg;  // full-size defaults
  std::size_t expected = 0;
  int in = cfg.input_dim;
  for (int h : cfg.hidden) {
    expected += 3 * h * in + 3 * h * h + 6 * h;
    in = h;
  }
  expected += 8 * in + 8;
  EXPECT_EQ(cfg.parameter_count(), expected);
}

TEST(Network, RejectsMismatchedDropoutList) {
  NetworkConfig cfg = tiny_config({3, 2});
  cfg.dropout = {0.1};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(SelectAction, GreedyPicksArgmaxWithLowestIndexTies) {
  Rng rng(1);
  std::vector<double> q(8, 0.0);
  q[7] = 1.0;
  EXPECT_EQ(select_action(q, 0.0, rng), 7);
  std::vector<double> flat(8, 0.3);
  EXPECT_EQ(select_action(flat, 0.0, rng), 0);
}

TEST(SelectAction, UniformWhenEpsilonIsOne) {
  Rng rng(2024);
  std::vector<double> q = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> counts(8, 0);
  const int n = 80000;
  for (int i = 0; i < n; ++i) ++counts[select_action(q, 1.0, rng)];
  const double p = 1.0 / 8, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, n * p, 3 * sigma);
}

TEST(SelectAction, ArgmaxInvariantUnderPositiveAffineMaps) {
  Rng gen(77), rng(0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> q(8), mapped(8);
    const double scale = gen.uniform(0.01, 50.0), shift = gen.uniform(-20, 20);
    for (int i = 0; i < 8; ++i) {
      q[i] = std::round(gen.uniform(-4, 4));  // integers force frequent ties
      mapped[i] = scale * q[i] + shift;
    }
    EXPECT_EQ(select_action(q, 0.0, rng), select_action(mapped, 0.0, rng));
  }
}

TEST(SelectAction, RejectsEpsilonOutsideUnitInterval) {
  Rng rng(1);
  std::vector<double> q(8, 0.0);
  EXPECT_THROW(select_action(q, 1.5, rng), ArgumentError);
  EXPECT_THROW(select_action(q, -0.1, rng), ArgumentError);
}

TEST(Epsilon, LinearDecayThenClamp) {
  const EpsilonSchedule s;
  EXPECT_DOUBLE_EQ(schedule_epsilon(0, s), 0.2);
  EXPECT_NEAR(schedule_epsilon(15000, s), 0.1, 1e-15);
  EXPECT_EQ(schedule_epsilon(50000, s), 0.0);
  EXPECT_THROW(schedule_epsilon(-1, s), ArgumentError);
}

Transition keyed(int daz, int del, float reward) {
  Transition t;
  t.key = {daz, del};
  t.reward = reward;
  return t;
}

TEST(Replay, RingEvictsOldestPerCell) {
  ReplayBuffer buf;
  for (int i = 0; i < 5001; ++i) buf.push(keyed(1, 0, static_cast<float>(i)));
  EXPECT_EQ(buf.cell_size({1, 0}), 5000u);
  EXPECT_EQ(buf.size(), 5000u);
  EXPECT_EQ(buf.capacity(), 325000u);
  Rng rng(4);
  for (const Transition* t : buf.sample(20000, rng)) EXPECT_NE(t->reward, 0.0f);
}

TEST(Replay, DistinctKeysAreIndependentCells) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 10; ++i) buf.push(keyed(0, 1, 1.0f));
  buf.push(keyed(-2, 0, 2.0f));
  EXPECT_EQ(buf.cell_size({0, 1}), 3u);
  EXPECT_EQ(buf.cell_size({-2, 0}), 1u);
  EXPECT_EQ(buf.size(), 4u);
}

TEST(Replay, TwoStageSamplingBalancesCells) {
  ReplayBuffer buf;
  buf.push(keyed(3, 1, 1.0f));
  for (int i = 0; i < 5000; ++i) buf.push(keyed(-1, 0, 0.0f));
  Rng rng(99);
  const auto batch = buf.sample(100000, rng);
  ASSERT_EQ(batch.size(), 100000u);
  int rare = 0;
  for (const Transition* t : batch) rare += t->reward == 1.0f;
  EXPECT_NEAR(rare / 100000.0, 0.5, 0.01);
}

TEST(Replay, SingleCellAndExactBatchSize) {
  ReplayBuffer buf;
  for (int i = 0; i < 10; ++i) buf.push(keyed(2, -1, 0.5f));
  Rng rng(1);
  const auto batch = buf.sample(1024, rng);
  EXPECT_EQ(batch.size(), 1024u);
  for (const Transition* t : batch) EXPECT_EQ(t->key, (DeviationKey{2, -1}));
}

TEST(Replay, EmptyBufferThrows) {
  ReplayBuffer buf;
  Rng rng(1);
  EXPECT_THROW(buf.sample(4, rng), ArgumentError);
}

TEST(Replay, SamplingIsDeterministicUnderSeed) {
  ReplayBuffer a, b;
  Rng fill(12);
  for (int i = 0; i < 3000; ++i) {
    const int daz = static_cast<int>(fill.uniform_index(13)) - 6;
    const int del = static_cast<int>(fill.uniform_index(5)) - 2;
    a.push(keyed(daz, del, static_cast<float>(i)));
    b.push(keyed(daz, del, static_cast<float>(i)));
  }
  Rng ra(5), rb(5);
  const auto sa = a.sample(512, ra), sb = b.sample(512, rb);
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(sa[i]->reward, sb[i]->reward);
}

TEST(Huber, QuadraticInsideLinearOutside) {
  EXPECT_DOUBLE_EQ(huber(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(huber(2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(huber(-2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(huber_grad(-3.0, 1.0), -1.0);
}

TEST(TdLoss, TerminalExactTargetHasZeroLoss) {
  // Linear head on the last frame: Q = W x + b. Put Q(o, 2) = 1 exactly.
  NetworkConfig cfg = tiny_config({}, 2);
  GruQNetwork<double> net(cfg);
  Vec<double> p = Vec<double>::Zero(static_cast<Eigen::Index>(net.size()));
  p[static_cast<Eigen::Index>(cfg.tensors().back().offset + 2)] = 1.0;  // head.b[2]
  Transition t;
  t.obs = std::make_shared<FeatureMatrix>(FeatureMatrix::Zero(1, 2));
  t.next_obs = t.obs;
  t.action = 2;
  t.reward = 1.0f;
  t.terminal = true;
  const auto batch = TdBatch<double>::from({&t});
  std::vector<double> errors;
  EXPECT_EQ(td_loss<double>(net, p, p, batch, TdConfig{}, nullptr, nullptr, &errors), 0.0);
  EXPECT_EQ(errors.at(0), 0.0);
}

TEST(TdLoss, ZeroGammaIsHuberRegressionOntoReward) {
  GruQNetwork<double> net(tiny_config({3, 2}));
  const Vec<double> theta = random_params(net, 21, 0.7);
  const Vec<double> target = random_params(net, 22, 0.7);
  const auto ts = random_transitions(12, 3, 5, 8);
  const auto batch = TdBatch<double>::from(pointers(ts));
  TdConfig cfg;
  cfg.gamma = 0.0;
  const double loss = td_loss<double>(net, theta, target, batch, cfg, nullptr, nullptr);
  const Mat<double> q = net.forward(theta, batch.obs, batch.frames, nullptr, nullptr);
  double expected = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    expected += huber(ts[i].reward - q(static_cast<Eigen::Index>(i), ts[i].action), 1.0);
  }
  EXPECT_NEAR(loss, expected / ts.size(), 1e-14);
}

TEST(TdLoss, BootstrapsFromTargetNetworkOnly) {
  GruQNetwork<double> net(tiny_config({3}));
  const Vec<double> theta = random_params(net, 1, 0.6);
  const Vec<double> target = random_params(net, 2, 0.6);
  auto ts = random_transitions(6, 2, 5, 3);
  for (auto& t : ts) t.terminal = false;
  const auto batch = TdBatch<double>::from(pointers(ts));
  std::vector<double> errors;
  td_loss<double>(net, theta, target, batch, TdConfig{}, nullptr, nullptr, &errors);
  const Mat<double> q = net.forward(theta, batch.obs, 2, nullptr, nullptr);
  const Mat<double> qn = net.forward(target, batch.next_obs, 2, nullptr, nullptr);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double y = ts[i].reward + 0.8 * qn.row(r).maxCoeff();
    EXPECT_NEAR(errors[i], y - q(r, ts[i].action), 1e-14);
  }
}

TEST(GradientCheck, TinyGruStackPerTensor) {
  GruQNetwork<double> net(tiny_config({4, 3}));
  const Vec<double> theta = random_params(net, 31, 0.5);
  const Vec<double> target = random_params(net, 32, 0.5);
  const auto ts = random_transitions(6, 3, 5, 33);
  const auto batch = TdBatch<double>::from(pointers(ts));
  const auto report = gradient_check(net, theta, target, batch, TdConfig{});
  EXPECT_TRUE(report.non_finite.empty());
  ASSERT_EQ(report.tensors.size(), 10u);
  for (const auto& t : report.tensors) EXPECT_LT(t.max_rel_error, 1e-4) << t.tensor;
}

TEST(GradientCheck, SquaredHuberVariant) {
  GruQNetwork<double> net(tiny_config({4, 3}));
  const Vec<double> theta = random_params(net, 41, 0.5);
  const auto ts = random_transitions(5, 3, 5, 42);
  const auto batch = TdBatch<double>::from(pointers(ts));
  TdConfig cfg;
  cfg.squared_huber = true;
  EXPECT_LT(gradient_check(net, theta, theta, batch, cfg).max_rel_error, 1e-4);
}

TEST(GradientCheck, LinearNetworkIsExact) {
  GruQNetwork<double> net(tiny_config({}, 5));
  const Vec<double> theta = random_params(net, 51, 0.1);
  const Vec<double> target = random_params(net, 52, 0.1);
  const auto ts = random_transitions(6, 3, 5, 53);
  const auto batch = TdBatch<double>::from(pointers(ts));
  const auto report = gradient_check(net, theta, target, batch, TdConfig{});
  EXPECT_LT(report.max_rel_error, 1e-8);
}

TEST(GradientCheck, ReportsNonFiniteCoordinates) {
  GruQNetwork<double> net(tiny_config({}, 5));
  Vec<double> theta = random_params(net, 61, 0.1);
  theta[0] = std::numeric_limits<double>::infinity();
  const auto ts = random_transitions(2, 1, 5, 62);
  const auto batch = TdBatch<double>::from(pointers(ts));
  const auto report = gradient_check(net, theta, theta, batch, TdConfig{});
  ASSERT_FALSE(report.non_finite.empty());
  EXPECT_NE(report.non_finite.front().find("head.w["), std::string::npos);
}

TEST(AdamW, ZeroGradientNoDecayLeavesParams) {
  Vec<double> p = Vec<double>::LinSpaced(5, -1, 1);
  const Vec<double> before = p;
  Vec<double> g = Vec<double>::Zero(5);
  AdamWState<double> s;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  for (int i = 0; i < 3; ++i) adamw_step(p, g, s, cfg);
  EXPECT_EQ(p, before);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Vec<double> p = Vec<double>::Zero(1);
  Vec<double> g = Vec<double>::Ones(1);
  AdamWState<double> s;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  adamw_step(p, g, s, cfg);
  EXPECT_NEAR(p[0], -0.001, 1e-9);
}

TEST(AdamW, DecoupledDecayShrinksGeometrically) {
  Vec<double> p = Vec<double>::Constant(3, 2.0);
  AdamWState<double> s;
  AdamWConfig cfg;
  cfg.weight_decay = 0.1;
  for (int i = 0; i < 4; ++i) {
    Vec<double> g = Vec<double>::Zero(3);
    adamw_step(p, g, s, cfg);
  }
  EXPECT_NEAR(p[0], 2.0 * std::pow(1 - 1e-3 * 0.1, 4), 1e-15);
}

TEST(AdamW, ClipsGlobalNorm) {
  Vec<double> p = Vec<double>::Zero(2);
  Vec<double> g(2);
  g << 30.0, 40.0;
  AdamWState<double> s;
  adamw_step(p, g, s, AdamWConfig{});
  EXPECT_NEAR(g.norm(), 10.0, 1e-12);
}

TEST(AdamW, NonFiniteGradientIsSkippedAndCounted) {
  Vec<double> p = Vec<double>::Ones(2);
  Vec<double> g(2);
  g << 1.0, std::nan("");
  AdamWState<double> s;
  EXPECT_FALSE(adamw_step(p, g, s, AdamWConfig{}));
  EXPECT_EQ(s.skipped, 1);
  EXPECT_EQ(s.step, 0);
  EXPECT_EQ(p, Vec<double>::Ones(2));
}

TEST(SoftUpdate, BlendsTowardsOnline) {
  Vec<double> target = Vec<double>::Zero(3);
  const Vec<double> online = Vec<double>::Ones(3);
  soft_update(target, online, 0.00005);
  EXPECT_DOUBLE_EQ(target[1], 0.00005);
  Vec<double> same = target;
  soft_update(same, online, 0.0);
  EXPECT_EQ(same, target);
  soft_update(same, online, 1.0);
  EXPECT_EQ(same, online);
}

TEST(SoftUpdate, OptimizerNeverTouchesTarget) {
  GruQNetwork<double> net(tiny_config({3}));
  Vec<double> theta = random_params(net, 71, 0.4);
  const Vec<double> target = random_params(net, 72, 0.4);
  const Vec<double> target_copy = target;
  const auto ts = random_transitions(4, 2, 5, 73);
  const auto batch = TdBatch<double>::from(pointers(ts));
  AdamWState<double> s;
  for (int i = 0; i < 5; ++i) {
    Vec<double> g;
    td_loss<double>(net, theta, target, batch, TdConfig{}, nullptr, &g);
    adamw_step(theta, g, s, AdamWConfig{});
  }
  EXPECT_EQ(target, target_copy);
}

TEST(Training, FloatNetworkFitsFixedTargets) {
  // A few hundred AdamW steps on terminal transitions must drive the loss
  // well below its starting value.
  NetworkConfig cfg = tiny_config({8});
  GruQNetwork<float> net(cfg);
  Vec<float> theta(static_cast<Eigen::Index>(net.size()));
  Rng init(3);
  net.initialize(theta, init);
  auto ts = random_transitions(16, 3, 5, 81);
  for (auto& t : ts) t.terminal = true;
  const auto batch = TdBatch<float>::from(pointers(ts));
  AdamWState<float> s;
  AdamWConfig opt;
  opt.lr = 1e-2;
  const double start = td_loss<float>(net, theta, theta, batch, TdConfig{}, nullptr, nullptr);
  for (int i = 0; i < 300; ++i) {
    Vec<float> g;
    td_loss<float>(net, theta, theta, batch, TdConfig{}, nullptr, &g);
    adamw_step(theta, g, s, opt);
  }
  const double end = td_loss<float>(net, theta, theta, batch, TdConfig{}, nullptr, nullptr);
  EXPECT_LT(end, 0.1 * start);
}

}  // namespace
}  // namespace headorient::learner
