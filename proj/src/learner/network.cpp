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

#include "headorient/learner/network.hpp"

#include <cmath>

#include <Eigen/QR>

#include "headorient/error.hpp"

namespace headorient::learner {
namespace {

template <typename S>
using MapM = Eigen::Map<Mat<S>>;
template <typename S>
using CMapM = Eigen::Map<const Mat<S>>;
template <typename S>
using MapV = Eigen::Map<Vec<S>>;
template <typename S>
using CMapV = Eigen::Map<const Vec<S>>;

template <typename S>
CMapM<S> view(const Vec<S>& p, const NetworkConfig::Tensor& t) {
  return CMapM<S>(p.data() + t.offset, t.rows, t.cols);
}
template <typename S>
MapM<S> view(Vec<S>& p, const NetworkConfig::Tensor& t) {
  return MapM<S>(p.data() + t.offset, t.rows, t.cols);
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  using S = typename Derived::Scalar;
  return (S(1) + (-a).exp()).inverse();
}

}  // namespace

void NetworkConfig::validate() const {
  if (input_dim < 1) throw ConfigError("network input_dim must be >= 1");
  if (outputs < 1) throw ConfigError("network outputs must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("GRU hidden sizes must be >= 1");
  }
  if (dropout.size() != hidden.size()) {
    throw ConfigError("need one dropout rate per GRU layer (" +
                      std::to_string(hidden.size()) + "), got " +
                      std::to_string(dropout.size()));
  }
  for (double p : dropout) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout rates must lie in [0, 1)");
  }
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  NetworkConfig c;
  try {
    c.input_dim = j.value("input_dim", c.input_dim);
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("dropout")) c.dropout = j.at("dropout").get<std::vector<double>>();
    c.outputs = j.value("outputs", c.outputs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad network config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"input_dim", input_dim}, {"hidden", hidden}, {"dropout", dropout},
          {"outputs", outputs}};
}

std::vector<NetworkConfig::Tensor> NetworkConfig::tensors() const {
  std::vector<Tensor> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    out.push_back(Tensor{std::move(name), offset, rows, cols});
    offset += out.back().size();
  };
  int in = input_dim;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const int h = hidden[l];
    const std::string p = "gru" + std::to_string(l) + ".";
    add(p + "w_ih", 3 * h, in);
    add(p + "w_hh", 3 * h, h);
    add(p + "b_ih", 3 * h, 1);
    add(p + "b_hh", 3 * h, 1);
    in = h;
  }
  add("head.w", outputs, in);
  add("head.b", outputs, 1);
  return out;
}

std::size_t NetworkConfig::parameter_count() const {
  const auto t = tensors();
  return t.back().offset + t.back().size();
}

template <typename S>
RowMat<S> stack_sequences(const std::vector<const env::FeatureMatrix*>& seqs) {
  if (seqs.empty()) throw ArgumentError("stack_sequences: empty batch");
  const Eigen::Index T = seqs.front()->rows();
  const Eigen::Index F = seqs.front()->cols();
  const auto B = static_cast<Eigen::Index>(seqs.size());
  RowMat<S> staged(T * B, F);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& m = *seqs[static_cast<std::size_t>(b)];
    if (m.rows() != T || m.cols() != F) {
      throw DataError("observation shape mismatch in batch");
    }
    for (Eigen::Index t = 0; t < T; ++t) staged.row(t * B + b) = m.row(t).template cast<S>();
  }
  return staged;
}

template RowMat<float> stack_sequences<float>(const std::vector<const env::FeatureMatrix*>&);
template RowMat<double> stack_sequences<double>(const std::vector<const env::FeatureMatrix*>&);

template <typename S>
GruQNetwork<S>::GruQNetwork(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  tensors_ = config_.tensors();
  size_ = config_.parameter_count();
}

template <typename S>
void GruQNetwork<S>::initialize(Vec<S>& params, Rng& rng) const {
  params = Vec<S>::Zero(static_cast<Eigen::Index>(size_));
  auto uniform_fill = [&](const NetworkConfig::Tensor& t) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols));
    auto m = view(params, t);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<S>(rng.uniform(-bound, bound));
  };
  const std::size_t layers = config_.hidden.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int h = config_.hidden[l];
    uniform_fill(tensors_[4 * l]);
    auto whh = view(params, tensors_[4 * l + 1]);
    for (int g = 0; g < 3; ++g) {
      Eigen::MatrixXd a(h, h);
      for (Eigen::Index j = 0; j < h; ++j)
        for (Eigen::Index i = 0; i < h; ++i) a(i, j) = rng.normal();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(h, h);
      const Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
      for (Eigen::Index i = 0; i < h; ++i) {
        if (r(i, i) < 0) q.col(i) *= -1.0;
      }
      whh.block(g * h, 0, h, h) = q.cast<S>();
    }
  }
  uniform_fill(tensors_[4 * layers]);
}

template <typename S>
Mat<S> GruQNetwork<S>::forward(const Vec<S>& params, const RowMat<S>& x, int T, Rng* rng,
                               Cache* cache) const {
  if (static_cast<std::size_t>(params.size()) != size_) {
    throw ArgumentError("parameter vector has the wrong size");
  }
  if (x.cols() != config_.input_dim || T < 1 || x.rows() % T != 0) {
    throw DataError("network input shape mismatch: got " + std::to_string(x.rows()) + "x" +
                    std::to_string(x.cols()) + " for T=" + std::to_string(T) +
                    ", input_dim=" + std::to_string(config_.input_dim));
  }
  const auto B = static_cast<Eigen::Index>(x.rows() / T);
  const std::size_t layers = config_.hidden.size();
  Cache local;
  Cache& c = cache ? *cache : local;
  c.T = T;
  c.B = static_cast<int>(B);
  c.x = &x;
  c.inputs.assign(layers, Mat<S>());
  c.h.assign(layers, Mat<S>());
  c.r.assign(layers, Mat<S>());
  c.z.assign(layers, Mat<S>());
  c.n.assign(layers, Mat<S>());
  c.gh_n.assign(layers, Mat<S>());
  c.masks.assign(layers, Mat<S>());

  auto draw_mask = [&](Eigen::Index rows, Eigen::Index cols, double p) {
    Mat<S> m(rows, cols);
    const S keep = static_cast<S>(1.0 / (1.0 - p));
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng->uniform() < p ? S(0) : keep;
    return m;
  };

  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index H = config_.hidden[l];
    const auto w_ih = view(params, tensors_[4 * l]);
    const auto w_hh = view(params, tensors_[4 * l + 1]);
    const auto b_ih = view(params, tensors_[4 * l + 2]);
    const auto b_hh = view(params, tensors_[4 * l + 3]);
    Mat<S> gx;
    if (l == 0) {
      gx.noalias() = x * w_ih.transpose();
    } else {
      c.inputs[l] = c.h[l - 1].bottomRows(T * B);
      if (rng && config_.dropout[l - 1] > 0.0) {
        c.masks[l - 1] = draw_mask(T * B, c.inputs[l].cols(), config_.dropout[l - 1]);
        c.inputs[l].array() *= c.masks[l - 1].array();
      }
      gx.noalias() = c.inputs[l] * w_ih.transpose();
    }
    gx.rowwise() += b_ih.col(0).transpose();

    Mat<S>& h = c.h[l];
    h.setZero((T + 1) * B, H);
    c.r[l].resize(T * B, H);
    c.z[l].resize(T * B, H);
    c.n[l].resize(T * B, H);
    c.gh_n[l].resize(T * B, H);
    Mat<S> gh(B, 3 * H);
    for (int t = 0; t < T; ++t) {
      const auto hprev = h.middleRows(t * B, B);
      gh.noalias() = hprev * w_hh.transpose();
      gh.rowwise() += b_hh.col(0).transpose();
      auto r = c.r[l].middleRows(t * B, B);
      auto z = c.z[l].middleRows(t * B, B);
      auto n = c.n[l].middleRows(t * B, B);
      r = sigmoid(gx.block(t * B, 0, B, H).array() + gh.leftCols(H).array()).matrix();
      z = sigmoid(gx.block(t * B, H, B, H).array() + gh.middleCols(H, H).array()).matrix();
      c.gh_n[l].middleRows(t * B, B) = gh.rightCols(H);
      n = (gx.block(t * B, 2 * H, B, H).array() + r.array() * gh.rightCols(H).array())
              .tanh()
              .matrix();
      h.middleRows((t + 1) * B, B) =
          ((S(1) - z.array()) * n.array() + z.array() * hprev.array()).matrix();
    }
  }

  // Head on the last time step.
  if (layers == 0) {
    c.last = x.bottomRows(B);
  } else {
    c.last = c.h[layers - 1].bottomRows(B);
    if (rng && config_.dropout[layers - 1] > 0.0) {
      c.masks[layers - 1] = draw_mask(B, c.last.cols(), config_.dropout[layers - 1]);
      c.last.array() *= c.masks[layers - 1].array();
    }
  }
  const auto w = view(params, tensors_[4 * layers]);
  const auto b = view(params, tensors_[4 * layers + 1]);
  Mat<S> q = c.last * w.transpose();
  q.rowwise() += b.col(0).transpose();
  return q;
}

template <typename S>
void GruQNetwork<S>::backward(const Vec<S>& params, const Cache& c, const Mat<S>& dq,
                              Vec<S>& grad) const {
  if (grad.size() != params.size()) grad = Vec<S>::Zero(params.size());
  const std::size_t layers = config_.hidden.size();
  const Eigen::Index T = c.T;
  const Eigen::Index B = c.B;
  if (dq.rows() != B || dq.cols() != config_.outputs) {
    throw ArgumentError("backward: dq shape mismatch");
  }

  const auto w = view(params, tensors_[4 * layers]);
  view(grad, tensors_[4 * layers]).noalias() += dq.transpose() * c.last;
  view(grad, tensors_[4 * layers + 1]).col(0) += dq.colwise().sum().transpose();
  if (layers == 0) return;

  // Gradient w.r.t. the current layer's output sequence, (T*B) x H.
  Mat<S> d_out = Mat<S>::Zero(T * B, config_.hidden[layers - 1]);
  {
    Mat<S> d_last = dq * w;
    if (c.masks[layers - 1].size() > 0) d_last.array() *= c.masks[layers - 1].array();
    d_out.bottomRows(B) = d_last;
  }

  for (std::size_t li = layers; li-- > 0;) {
    const Eigen::Index H = config_.hidden[li];
    const auto w_ih = view(params, tensors_[4 * li]);
    const auto w_hh = view(params, tensors_[4 * li + 1]);
    Mat<S> d_gx(T * B, 3 * H);
    Mat<S> d_gh(T * B, 3 * H);
    Mat<S> carry = Mat<S>::Zero(B, H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const auto r = c.r[li].middleRows(t * B, B).array();
      const auto z = c.z[li].middleRows(t * B, B).array();
      const auto n = c.n[li].middleRows(t * B, B).array();
      const auto ghn = c.gh_n[li].middleRows(t * B, B).array();
      const auto hprev = c.h[li].middleRows(t * B, B).array();
      const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> dh =
          d_out.middleRows(t * B, B).array() + carry.array();
      const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> da_n = dh * (S(1) - z) * (S(1) - n * n);
      const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> da_r = da_n * ghn * r * (S(1) - r);
      const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> da_z = dh * (hprev - n) * z * (S(1) - z);
      d_gx.block(t * B, 0, B, H) = da_r.matrix();
      d_gx.block(t * B, H, B, H) = da_z.matrix();
      d_gx.block(t * B, 2 * H, B, H) = da_n.matrix();
      d_gh.block(t * B, 0, B, H) = da_r.matrix();
      d_gh.block(t * B, H, B, H) = da_z.matrix();
      d_gh.block(t * B, 2 * H, B, H) = (da_n * r).matrix();
      carry = (dh * z).matrix();
      carry.noalias() += d_gh.middleRows(t * B, B) * w_hh;
    }
    if (li == 0) {
      view(grad, tensors_[4 * li]).noalias() += d_gx.transpose() * (*c.x);
    } else {
      view(grad, tensors_[4 * li]).noalias() += d_gx.transpose() * c.inputs[li];
    }
    view(grad, tensors_[4 * li + 1]).noalias() += d_gh.transpose() * c.h[li].topRows(T * B);
    view(grad, tensors_[4 * li + 2]).col(0) += d_gx.colwise().sum().transpose();
    view(grad, tensors_[4 * li + 3]).col(0) += d_gh.colwise().sum().transpose();
    if (li > 0) {
      d_out = d_gx * w_ih;
      if (c.masks[li - 1].size() > 0) d_out.array() *= c.masks[li - 1].array();
    }
  }
}

template class GruQNetwork<float>;
template class GruQNetwork<double>;

}  // namespace headorient::learner
