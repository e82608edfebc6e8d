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

#include "headorient/learner/dqn.hpp"

#include <algorithm>
#include <cmath>

#include "headorient/error.hpp"

namespace headorient::learner {

int argmax_lowest(std::span<const double> q) {
  if (q.empty()) throw ArgumentError("argmax of an empty Q vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return static_cast<int>(best);
}

int select_action(std::span<const double> q, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ArgumentError("epsilon must lie in [0, 1]");
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    return static_cast<int>(rng.uniform_index(q.size()));
  }
  return argmax_lowest(q);
}

double schedule_epsilon(std::int64_t episode, const EpsilonSchedule& s) {
  if (episode < 0) throw ArgumentError("episode index must be >= 0");
  if (!(s.decay_episodes > 0.0)) return s.end;
  const double frac = std::min(1.0, static_cast<double>(episode) / s.decay_episodes);
  return std::max(0.0, s.start + (s.end - s.start) * frac);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_per_cell) : capacity_(capacity_per_cell) {
  if (capacity_ == 0) throw ConfigError("replay capacity per cell must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  const std::size_t idx = t.key.index();
  if (idx >= cells_.size()) throw ArgumentError("deviation key outside the replay grid");
  Ring& ring = cells_[idx];
  if (ring.items.size() < capacity_) {
    ring.items.push_back(std::move(t));
  } else {
    ring.items[ring.next] = std::move(t);
    ring.next = (ring.next + 1) % capacity_;
  }
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> filled;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!cells_[i].items.empty()) filled.push_back(i);
  }
  if (filled.empty()) throw ArgumentError("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Ring& ring = cells_[filled[rng.uniform_index(filled.size())]];
    out.push_back(&ring.items[rng.uniform_index(ring.items.size())]);
  }
  return out;
}

std::size_t ReplayBuffer::size() const {
  std::size_t total = 0;
  for (const auto& r : cells_) total += r.items.size();
  return total;
}

std::size_t ReplayBuffer::cell_size(const env::DeviationKey& key) const {
  return cells_.at(key.index()).items.size();
}

const std::vector<Transition>& ReplayBuffer::cell_items(std::size_t index) const {
  return cells_.at(index).items;
}

std::size_t ReplayBuffer::cell_next(std::size_t index) const { return cells_.at(index).next; }

void ReplayBuffer::restore_cell(std::size_t index, std::vector<Transition> items,
                                std::size_t next) {
  if (index >= cells_.size()) throw ArgumentError("replay cell index out of range");
  if (items.size() > capacity_ || (next != 0 && next >= items.size())) {
    throw DataError("replay cell " + std::to_string(index) + " does not fit the buffer");
  }
  for (const auto& t : items) {
    if (t.key.index() != index) throw DataError("replay transition filed under the wrong key");
  }
  cells_[index].items = std::move(items);
  cells_[index].next = next;
}

void ReplayBuffer::clear() {
  for (auto& r : cells_) {
    r.items.clear();
    r.next = 0;
  }
}

double huber(double e, double delta) {
  const double a = std::abs(e);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

double huber_grad(double e, double delta) {
  if (std::abs(e) <= delta) return e;
  return e > 0 ? delta : -delta;
}

template <typename S>
TdBatch<S> TdBatch<S>::from(const std::vector<const Transition*>& transitions) {
  if (transitions.empty()) throw ArgumentError("empty TD batch");
  TdBatch<S> b;
  std::vector<const env::FeatureMatrix*> obs, next;
  obs.reserve(transitions.size());
  next.reserve(transitions.size());
  for (const Transition* t : transitions) {
    obs.push_back(t->obs.get());
    next.push_back(t->next_obs.get());
    b.actions.push_back(t->action);
    b.rewards.push_back(t->reward);
    b.terminal.push_back(t->terminal ? 1 : 0);
  }
  b.frames = static_cast<int>(transitions.front()->obs->rows());
  b.obs = stack_sequences<S>(obs);
  b.next_obs = stack_sequences<S>(next);
  return b;
}

template <typename S>
double td_loss(const GruQNetwork<S>& net, const Vec<S>& theta, const Vec<S>& theta_target,
               const TdBatch<S>& batch, const TdConfig& config, Rng* dropout_rng,
               Vec<S>* grad, std::vector<double>* td_errors) {
  const std::size_t n = batch.size();
  if (n == 0) throw ArgumentError("empty TD batch");
  const Mat<S> q_next = net.forward(theta_target, batch.next_obs, batch.frames, nullptr, nullptr);
  typename GruQNetwork<S>::Cache cache;
  const Mat<S> q = net.forward(theta, batch.obs, batch.frames, dropout_rng, grad ? &cache : nullptr);

  Mat<S> dq = Mat<S>::Zero(q.rows(), q.cols());
  double loss = 0.0;
  if (td_errors) td_errors->assign(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double y = batch.rewards[i];
    if (!batch.terminal[i]) y += config.gamma * static_cast<double>(q_next.row(row).maxCoeff());
    const int a = batch.actions[i];
    if (a < 0 || a >= q.cols()) throw ArgumentError("action index out of range in TD batch");
    const double e = y - static_cast<double>(q(row, a));
    if (td_errors) (*td_errors)[i] = e;
    const double h = huber(e, config.huber_delta);
    const double hg = huber_grad(e, config.huber_delta);
    if (config.squared_huber) {
      loss += h * h * inv_n;
      dq(row, a) = static_cast<S>(-2.0 * h * hg * inv_n);
    } else {
      loss += h * inv_n;
      dq(row, a) = static_cast<S>(-hg * inv_n);
    }
  }
  if (grad) {
    *grad = Vec<S>::Zero(theta.size());
    net.backward(theta, cache, dq, *grad);
  }
  return loss;
}

template <typename S>
bool adamw_step(Vec<S>& params, Vec<S>& grad, AdamWState<S>& state, const AdamWConfig& c) {
  if (grad.size() != params.size()) throw ArgumentError("gradient / parameter size mismatch");
  if (state.m.size() != params.size()) {
    state.m = Vec<S>::Zero(params.size());
    state.v = Vec<S>::Zero(params.size());
  }
  if (!grad.allFinite()) {
    ++state.skipped;
    return false;
  }
  if (c.clip_norm > 0.0) {
    const double norm = static_cast<double>(grad.norm());
    if (norm > c.clip_norm) grad *= static_cast<S>(c.clip_norm / norm);
  }
  state.step += 1;
  const auto b1 = static_cast<S>(c.beta1);
  const auto b2 = static_cast<S>(c.beta2);
  state.m = b1 * state.m + (S(1) - b1) * grad;
  state.v = b2 * state.v + (S(1) - b2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const auto lr = static_cast<S>(c.lr);
  if (c.weight_decay > 0.0) params *= static_cast<S>(1.0 - c.lr * c.weight_decay);
  params.array() -= lr * (state.m.array() / static_cast<S>(bc1)) /
                    ((state.v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(c.eps));
  return true;
}

template <typename S>
void soft_update(Vec<S>& theta_target, const Vec<S>& theta, double tau) {
  if (theta_target.size() != theta.size()) throw ArgumentError("soft_update: shape mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in [0, 1]");
  if (tau == 1.0) {
    theta_target = theta;
    return;
  }
  if (tau == 0.0) return;
  theta_target = static_cast<S>(tau) * theta + static_cast<S>(1.0 - tau) * theta_target;
}

GradientCheckReport gradient_check(const GruQNetwork<double>& net, const Vec<double>& theta,
                                   const Vec<double>& theta_target,
                                   const TdBatch<double>& batch, const TdConfig& config,
                                   double h) {
  Vec<double> analytic;
  td_loss<double>(net, theta, theta_target, batch, config, nullptr, &analytic);
  GradientCheckReport report;
  Vec<double> w = theta;
  for (const auto& t : net.config().tensors()) {
    TensorCheck tc;
    tc.tensor = t.name;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(t.offset + k);
      const double saved = w[i];
      w[i] = saved + h;
      const double up = td_loss<double>(net, w, theta_target, batch, config, nullptr, nullptr);
      w[i] = saved - h;
      const double down = td_loss<double>(net, w, theta_target, batch, config, nullptr, nullptr);
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const int row = static_cast<int>(k % static_cast<std::size_t>(t.rows));
      const int col = static_cast<int>(k / static_cast<std::size_t>(t.rows));
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        report.non_finite.push_back(t.name + "[" + std::to_string(row) + "," +
                                    std::to_string(col) + "]");
        continue;
      }
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > tc.max_rel_error) {
        tc.max_rel_error = rel;
        tc.worst_index = k;
        tc.worst_row = row;
        tc.worst_col = col;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
    report.tensors.push_back(tc);
  }
  return report;
}

template struct TdBatch<float>;
template struct TdBatch<double>;
template double td_loss<float>(const GruQNetwork<float>&, const Vec<float>&, const Vec<float>&,
                               const TdBatch<float>&, const TdConfig&, Rng*, Vec<float>*,
                               std::vector<double>*);
template double td_loss<double>(const GruQNetwork<double>&, const Vec<double>&,
                                const Vec<double>&, const TdBatch<double>&, const TdConfig&,
                                Rng*, Vec<double>*, std::vector<double>*);
template bool adamw_step<float>(Vec<float>&, Vec<float>&, AdamWState<float>&, const AdamWConfig&);
template bool adamw_step<double>(Vec<double>&, Vec<double>&, AdamWState<double>&,
                                 const AdamWConfig&);
template void soft_update<float>(Vec<float>&, const Vec<float>&, double);
template void soft_update<double>(Vec<double>&, const Vec<double>&, double);

}  // namespace headorient::learner
