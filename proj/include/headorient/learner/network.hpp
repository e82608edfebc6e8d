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

#ifndef HEADORIENT_LEARNER_NETWORK_HPP_
#define HEADORIENT_LEARNER_NETWORK_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "headorient/environment/features.hpp"
#include "headorient/rng.hpp"

namespace headorient::learner {

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// GRU stack followed by a linear head on the last time step. An empty
// hidden list makes the network a linear map of the last input frame.
struct NetworkConfig {
  int input_dim = 128;
  std::vector<int> hidden{512, 256, 128, 64};
  // One rate per GRU layer, applied to that layer's output (for the last
  // layer, to the final hidden state feeding the head).
  std::vector<double> dropout{0.2, 0.2, 0.2, 0.5};
  int outputs = 8;

  void validate() const;
  static NetworkConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  struct Tensor {
    std::string name;  // e.g. "gru0.w_ih", "head.b"
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };
  // Layout of the flat parameter vector. Per GRU layer: w_ih (3H x I),
  // w_hh (3H x H), b_ih (3H), b_hh (3H), gate blocks ordered reset, update,
  // candidate. Then head.w (O x H) and head.b (O). Matrices are column
  // major.
  std::vector<Tensor> tensors() const;
  std::size_t parameter_count() const;
};

// Inputs for a batch of B sequences of T frames: a (T * B) x input_dim
// matrix whose row t * B + b is frame t of sequence b.
template <typename S>
RowMat<S> stack_sequences(const std::vector<const env::FeatureMatrix*>& seqs);

template <typename S>
class GruQNetwork {
 public:
  explicit GruQNetwork(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  std::size_t size() const { return size_; }

  // Orthogonal recurrent blocks, uniform(+-1/sqrt(fan_in)) input and head
  // weights, zero biases.
  void initialize(Vec<S>& params, Rng& rng) const;

  // Everything backward() needs from a forward pass.
  struct Cache {
    int T = 0;
    int B = 0;
    const RowMat<S>* x = nullptr;  // layer 0 input; must outlive the cache
    std::vector<Mat<S>> inputs;    // layers 1.., (T*B) x I, after dropout
    std::vector<Mat<S>> h;       // per layer, ((T+1)*B) x H, block 0 zeros
    std::vector<Mat<S>> r, z, n, gh_n;  // per layer, (T*B) x H
    std::vector<Mat<S>> masks;   // per layer dropout scale, empty if none
    Mat<S> last;                 // B x H_last (after dropout)
  };

  // Q-values, B x outputs. Dropout is sampled only when `rng` is non-null.
  // `cache` may be null when no gradient is needed.
  Mat<S> forward(const Vec<S>& params, const RowMat<S>& x, int T, Rng* rng,
                 Cache* cache) const;

  // Adds dLoss/dparams to `grad` given dLoss/dQ (B x outputs).
  void backward(const Vec<S>& params, const Cache& cache, const Mat<S>& dq,
                Vec<S>& grad) const;

 private:
  NetworkConfig config_;
  std::vector<NetworkConfig::Tensor> tensors_;
  std::size_t size_ = 0;
};

extern template class GruQNetwork<float>;
extern template class GruQNetwork<double>;

}  // namespace headorient::learner

#endif  // HEADORIENT_LEARNER_NETWORK_HPP_
