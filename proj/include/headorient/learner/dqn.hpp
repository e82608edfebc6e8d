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

#ifndef HEADORIENT_LEARNER_DQN_HPP_
#define HEADORIENT_LEARNER_DQN_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "headorient/environment/episode.hpp"
#include "headorient/environment/grid.hpp"
#include "headorient/learner/network.hpp"
#include "headorient/rng.hpp"

namespace headorient::learner {

// ---- action selection ------------------------------------------------------

// Greedy with probability 1 - epsilon (lowest index wins ties), otherwise
// uniform over all actions. The RNG is only consumed when epsilon > 0.
int select_action(std::span<const double> q, double epsilon, Rng& rng);
int argmax_lowest(std::span<const double> q);

struct EpsilonSchedule {
  double start = 0.2;
  double end = 0.0;
  double decay_episodes = 30000;
};
// Linear from start to end over decay_episodes, constant afterwards.
double schedule_epsilon(std::int64_t episode, const EpsilonSchedule& schedule);

// ---- replay ----------------------------------------------------------------

struct Transition {
  std::shared_ptr<const env::FeatureMatrix> obs;
  int action = 0;
  float reward = 0.0f;
  std::shared_ptr<const env::FeatureMatrix> next_obs;
  bool terminal = false;
  env::DeviationKey key;
  std::uint64_t origin = 0;  // caller tag, carried through untouched
};

// One FIFO ring per deviation key.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_per_cell = 5000);

  void push(Transition t);
  // Cell uniform over non-empty cells, then a transition uniform within the
  // cell. Throws ArgumentError when every cell is empty.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

  std::size_t size() const;
  std::size_t cell_size(const env::DeviationKey& key) const;
  std::size_t capacity_per_cell() const { return capacity_; }
  std::size_t capacity() const { return capacity_ * env::DeviationKey::kCount; }
  void clear();

  // Ring contents in slot order and the slot the next push overwrites once
  // the ring is full. restore_cell() replaces a ring wholesale.
  const std::vector<Transition>& cell_items(std::size_t index) const;
  std::size_t cell_next(std::size_t index) const;
  void restore_cell(std::size_t index, std::vector<Transition> items, std::size_t next);

 private:
  struct Ring {
    std::vector<Transition> items;
    std::size_t next = 0;  // slot overwritten by the next push once full
  };
  std::size_t capacity_;
  std::array<Ring, env::DeviationKey::kCount> cells_;
};

// ---- loss ------------------------------------------------------------------

struct TdConfig {
  double gamma = 0.8;
  double huber_delta = 1.0;
  bool squared_huber = false;  // literal Huber(e)^2 reading
};

double huber(double e, double delta);
double huber_grad(double e, double delta);

template <typename S>
struct TdBatch {
  RowMat<S> obs;       // stacked, see stack_sequences
  RowMat<S> next_obs;  // stacked
  int frames = 0;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;

  std::size_t size() const { return actions.size(); }
  static TdBatch from(const std::vector<const Transition*>& transitions);
};

// Mean (optionally squared) Huber loss of y - Q(o, a; theta) with
// y = r for terminal transitions and r + gamma * max_a' Q(o', a'; theta_target)
// otherwise. The target pass always runs in eval mode. Dropout in the online
// pass is sampled when `dropout_rng` is non-null. When `grad` is non-null
// it is overwritten with dLoss/dtheta.
template <typename S>
double td_loss(const GruQNetwork<S>& net, const Vec<S>& theta,
               const Vec<S>& theta_target, const TdBatch<S>& batch,
               const TdConfig& config, Rng* dropout_rng, Vec<S>* grad,
               std::vector<double>* td_errors = nullptr);

// ---- optimization ----------------------------------------------------------

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 10.0;  // <= 0 disables clipping
};

template <typename S>
struct AdamWState {
  Vec<S> m;
  Vec<S> v;
  std::int64_t step = 0;
  std::int64_t skipped = 0;  // updates dropped for non-finite gradients
};

// Decoupled weight decay then the bias-corrected Adam step. Gradients are
// clipped to clip_norm (global norm) first. Returns false and leaves the
// parameters alone when the gradient has a non-finite entry.
template <typename S>
bool adamw_step(Vec<S>& params, Vec<S>& grad, AdamWState<S>& state,
                const AdamWConfig& config);

// theta_target <- tau * theta + (1 - tau) * theta_target.
template <typename S>
void soft_update(Vec<S>& theta_target, const Vec<S>& theta, double tau);

// ---- gradient check --------------------------------------------------------

struct TensorCheck {
  std::string tensor;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;  // within the tensor
  int worst_row = 0;
  int worst_col = 0;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::vector<TensorCheck> tensors;
  // Coordinates ("gru0.w_hh[3,1]") whose analytic or numeric gradient was
  // not finite.
  std::vector<std::string> non_finite;
};

// Central differences (f(w + h) - f(w - h)) / 2h of td_loss over every
// parameter, without dropout, compared against backward(). Relative error
// is |a - n| / max(|a|, |n|, 1e-8).
GradientCheckReport gradient_check(const GruQNetwork<double>& net, const Vec<double>& theta,
                                   const Vec<double>& theta_target,
                                   const TdBatch<double>& batch, const TdConfig& config,
                                   double h = 1e-5);

}  // namespace headorient::learner

#endif  // HEADORIENT_LEARNER_DQN_HPP_
